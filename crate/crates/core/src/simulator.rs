//! Monte Carlo of the source -> CU pipeline.
//!
//! The age trajectory is a sawtooth. At the j-th completion it drops to
//! `v_j = D_j + S_j` and then grows linearly for `L_j = Z_j + S_{j+1}` until the
//! next completion, so each cycle contributes the trapezoid
//! `v_j L_j + L_j^2 / 2`. The mean age is total area over total time.
//!
//! Two ways of producing `(D, S, Z)`:
//!
//! * [`Mode::Fast`] draws `D` and `Z` as fresh exponentials.
//! * [`Mode::FullStream`] generates every packet. Under [`Policy::ZeroWait`]
//!   packet `i+1` leaves the source when packet `i` reaches the CU, so CU
//!   interarrival times equal packet delays and arrivals during service are
//!   dropped. Under [`Policy::ReturnTriggered`] the next packet leaves when
//!   the computed result is returned.
//!
//! Confidence intervals use batch means of the ratio estimator.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::schemes::{Scheme, ServiceSampler, ServiceTime, SystemParams};

pub const DEFAULT_BATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Fast,
    FullStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// Send the next update as soon as the current one reaches the CU.
    #[default]
    ZeroWait,
    /// Send the next update when the computed result comes back.
    ReturnTriggered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub cycles: usize,
    pub seed: u64,
    pub mode: Mode,
    pub policy: Policy,
    pub batches: usize,
}

impl SimConfig {
    pub fn new(cycles: usize, seed: u64) -> Self {
        Self {
            cycles,
            seed,
            mode: Mode::Fast,
            policy: Policy::ZeroWait,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn batches(mut self, batches: usize) -> Self {
        self.batches = batches;
        self
    }
}

/// One update cycle as seen from the CU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSample {
    pub d: f64,
    pub s: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchSums {
    pub area: f64,
    pub time: f64,
    pub cycles: usize,
}

impl BatchSums {
    pub fn ratio(&self) -> f64 {
        self.area / self.time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn mean(&self, count: usize) -> f64 {
        self.sum / count as f64
    }

    fn second(&self, count: usize) -> f64 {
        self.sum_sq / count as f64
    }

    fn standard_error(&self, count: usize) -> f64 {
        let m = self.mean(count);
        let var =
            (self.second(count) - m * m).max(0.0) * count as f64 / (count as f64 - 1.0).max(1.0);
        (var / count as f64).sqrt()
    }
}

/// Mergeable per-replication sums.
#[derive(Debug, Clone, PartialEq, Default)]
struct Accumulator {
    batches: Vec<BatchSums>,
    d: Moments,
    s: Moments,
    z: Moments,
    cycles: usize,
    arrivals: u64,
    dropped: u64,
}

impl Accumulator {
    fn merge(&mut self, other: Accumulator) {
        self.batches.extend(other.batches);
        self.d.merge(&other.d);
        self.s.merge(&other.s);
        self.z.merge(&other.z);
        self.cycles += other.cycles;
        self.arrivals += other.arrivals;
        self.dropped += other.dropped;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub mean_age: f64,
    pub ci95_halfwidth: f64,
    pub cycles: usize,
    pub empirical_es: f64,
    pub empirical_es2: f64,
    pub empirical_ed: f64,
    pub empirical_ez: f64,
    pub se_es: f64,
    pub se_ed: f64,
    pub se_ez: f64,
    /// Fraction of CU arrivals dropped (full-stream zero-wait only).
    pub dropped_fraction: Option<f64>,
    pub seed: u64,
    pub batches: Vec<BatchSums>,
}

impl SimReport {
    fn from_accumulator(acc: Accumulator, seed: u64, track_drops: bool) -> Self {
        let (area, time) = acc
            .batches
            .iter()
            .fold((0.0, 0.0), |(a, t), b| (a + b.area, t + b.time));
        let n = acc.cycles;
        SimReport {
            mean_age: area / time,
            ci95_halfwidth: batch_means_halfwidth(&acc.batches),
            cycles: n,
            empirical_es: acc.s.mean(n),
            empirical_es2: acc.s.second(n),
            empirical_ed: acc.d.mean(n),
            empirical_ez: acc.z.mean(n),
            se_es: acc.s.standard_error(n),
            se_ed: acc.d.standard_error(n),
            se_ez: acc.z.standard_error(n),
            dropped_fraction: track_drops.then(|| acc.dropped as f64 / acc.arrivals.max(1) as f64),
            seed,
            batches: acc.batches,
        }
    }

    /// Leave-one-batch-out jackknife half-width of the ratio estimator.
    pub fn jackknife_halfwidth(&self) -> f64 {
        jackknife_halfwidth(&self.batches)
    }
}

fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY)
}

fn batch_means_halfwidth(batches: &[BatchSums]) -> f64 {
    let b = batches.len();
    if b < 2 {
        return f64::INFINITY;
    }
    let ratios: Vec<f64> = batches.iter().map(BatchSums::ratio).collect();
    let mean = ratios.iter().sum::<f64>() / b as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    t_quantile_975(b - 1) * (var / b as f64).sqrt()
}

pub fn jackknife_halfwidth(batches: &[BatchSums]) -> f64 {
    let b = batches.len();
    if b < 2 {
        return f64::INFINITY;
    }
    let (area, time) = batches
        .iter()
        .fold((0.0, 0.0), |(a, t), x| (a + x.area, t + x.time));
    let loo: Vec<f64> = batches
        .iter()
        .map(|x| (area - x.area) / (time - x.time))
        .collect();
    let mean = loo.iter().sum::<f64>() / b as f64;
    let var = (b - 1) as f64 / b as f64 * loo.iter().map(|r| (r - mean).powi(2)).sum::<f64>();
    t_quantile_975(b - 1) * var.sqrt()
}

/// Produces successive cycles for one replication.
struct CycleSource<'a, S: ServiceTime> {
    service: &'a mut S,
    lambda: f64,
    mode: Mode,
    policy: Policy,
    arrivals_rng: RandomStream,
    service_rng: RandomStream,
    arrivals: u64,
    dropped: u64,
}

impl<'a, S: ServiceTime> CycleSource<'a, S> {
    fn new(service: &'a mut S, lambda: f64, cfg: &SimConfig, rng: &RandomStream) -> Self {
        Self {
            service,
            lambda,
            mode: cfg.mode,
            policy: cfg.policy,
            arrivals_rng: rng.split(0),
            service_rng: rng.split(1),
            arrivals: 0,
            dropped: 0,
        }
    }

    fn delay(&mut self) -> f64 {
        self.arrivals_rng.exp(self.lambda)
    }

    fn first_delay(&mut self) -> f64 {
        let d = self.delay();
        self.arrivals += 1;
        d
    }

    /// Service time of the packet being served, then the idle time before the
    /// next successful arrival and that arrival's delay.
    fn serve(&mut self) -> (f64, f64, f64) {
        let s = self.service.sample(&mut self.service_rng);
        match (self.mode, self.policy) {
            (Mode::Fast, Policy::ZeroWait) => {
                let z = self.delay();
                let d_next = self.delay();
                (s, z, d_next)
            }
            (_, Policy::ReturnTriggered) => {
                // next packet leaves at completion, so idle time is its own delay
                let d_next = self.delay();
                self.arrivals += 1;
                (s, d_next, d_next)
            }
            (Mode::FullStream, Policy::ZeroWait) => {
                // packet generated at each arrival; walk arrivals past the completion
                let mut since_last_arrival = 0.0;
                loop {
                    let gap = self.delay();
                    self.arrivals += 1;
                    if since_last_arrival + gap > s {
                        let z = since_last_arrival + gap - s;
                        return (s, z, gap);
                    }
                    since_last_arrival += gap;
                    self.dropped += 1;
                }
            }
        }
    }
}

fn boundaries(cycles: usize, batches: usize) -> impl Fn(usize) -> usize {
    move |j| j * batches / cycles
}

fn run_replication<S: ServiceTime>(
    service: &mut S,
    lambda: f64,
    cycles: usize,
    cfg: &SimConfig,
    rng: &RandomStream,
) -> Accumulator {
    let mut src = CycleSource::new(service, lambda, cfg, rng);
    let batch_of = boundaries(cycles, cfg.batches);
    let mut acc = Accumulator {
        batches: vec![BatchSums::default(); cfg.batches],
        ..Default::default()
    };

    let mut d = src.first_delay();
    let (mut s, mut z, mut d_next) = src.serve();
    for j in 0..cycles {
        let (s_next, z_next, d_after) = src.serve();
        let v = d + s;
        let len = z + s_next;
        let b = &mut acc.batches[batch_of(j)];
        b.area += v * len + 0.5 * len * len;
        b.time += len;
        b.cycles += 1;
        acc.d.push(d);
        acc.s.push(s);
        acc.z.push(z);
        d = d_next;
        s = s_next;
        z = z_next;
        d_next = d_after;
    }
    acc.cycles = cycles;
    acc.arrivals = src.arrivals;
    acc.dropped = src.dropped;
    acc
}

fn check_cycles(cycles: usize, batches: usize) -> Result<()> {
    if batches < 2 || cycles < batches {
        return Err(Error::InsufficientCycles { cycles, batches });
    }
    Ok(())
}

fn tracks_drops(cfg: &SimConfig) -> bool {
    cfg.mode == Mode::FullStream && cfg.policy == Policy::ZeroWait
}

/// Simulates `cfg.cycles` complete cycles with an arbitrary service-time source.
pub fn run_with_service<S: ServiceTime>(
    service: &mut S,
    lambda: f64,
    cfg: &SimConfig,
) -> Result<SimReport> {
    check_cycles(cfg.cycles, cfg.batches)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParams(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    let rng = RandomStream::from_seed(cfg.seed).split(0);
    let acc = run_replication(service, lambda, cfg.cycles, cfg, &rng);
    Ok(SimReport::from_accumulator(
        acc,
        cfg.seed,
        tracks_drops(cfg),
    ))
}

pub fn run(scheme: Scheme, p: &SystemParams, cfg: &SimConfig) -> Result<SimReport> {
    let mut sampler = ServiceSampler::new(scheme, p)?;
    run_with_service(&mut sampler, p.lambda(), cfg)
}

/// `reps` independent replications of `cycles_per_rep` cycles on split
/// substreams, pooled in replication order. `cfg.cycles` is ignored.
pub fn run_parallel_with<S, F>(
    make_service: F,
    lambda: f64,
    cycles_per_rep: usize,
    reps: usize,
    cfg: &SimConfig,
) -> Result<SimReport>
where
    S: ServiceTime,
    F: Fn() -> Result<S> + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidParams("reps must be >= 1".into()));
    }
    check_cycles(cycles_per_rep, cfg.batches)?;
    let root = RandomStream::from_seed(cfg.seed);
    let parts: Vec<Result<Accumulator>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut service = make_service()?;
            let rng = root.split(i as u64);
            Ok(run_replication(
                &mut service,
                lambda,
                cycles_per_rep,
                cfg,
                &rng,
            ))
        })
        .collect();
    let mut pooled = Accumulator::default();
    for part in parts {
        pooled.merge(part?);
    }
    Ok(SimReport::from_accumulator(
        pooled,
        cfg.seed,
        tracks_drops(cfg),
    ))
}

pub fn run_parallel(
    scheme: Scheme,
    p: &SystemParams,
    cycles_per_rep: usize,
    reps: usize,
    cfg: &SimConfig,
) -> Result<SimReport> {
    ServiceSampler::new(scheme, p)?;
    run_parallel_with(
        || ServiceSampler::new(scheme, p),
        p.lambda(),
        cycles_per_rep,
        reps,
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::age;
    use crate::schemes::ZeroService;

    fn params(mu: f64, n: usize) -> SystemParams {
        SystemParams::new(1.0, 1.0, mu, n).unwrap()
    }

    struct Deterministic(f64);

    impl ServiceTime for Deterministic {
        fn sample(&mut self, _rng: &mut RandomStream) -> f64 {
            self.0
        }
    }

    #[test]
    fn zero_service_gives_two_over_lambda() {
        let r = run_with_service(&mut ZeroService, 1.0, &SimConfig::new(1_000_000, 1)).unwrap();
        assert!(
            (r.mean_age - 2.0).abs() < r.ci95_halfwidth.max(1e-3) * 1.5,
            "{r:?}"
        );
        assert_eq!(r.empirical_es, 0.0);
    }

    #[test]
    fn deterministic_service_matches_formula() {
        let cfg = SimConfig::new(400_000, 9);
        let r = run_with_service(&mut Deterministic(1.0), 1.0, &cfg).unwrap();
        assert!(
            (r.mean_age - 3.25).abs() < 3.0 * r.ci95_halfwidth,
            "{}",
            r.mean_age
        );
    }

    #[test]
    fn insufficient_cycles() {
        let r = run_with_service(&mut ZeroService, 1.0, &SimConfig::new(10, 1));
        assert!(matches!(r, Err(Error::InsufficientCycles { .. })));
    }

    #[test]
    fn repetition_non_divisor_rejected() {
        let r = run(
            Scheme::Repetition { k: 33 },
            &params(1.0, 100),
            &SimConfig::new(100, 1),
        );
        assert!(matches!(r, Err(Error::InvalidScheme(_))));
    }

    #[test]
    fn reps_one_equals_run() {
        let p = params(1.0, 20);
        let s = Scheme::Mds { k: 12 };
        let cfg = SimConfig::new(3_000, 17);
        let a = run(s, &p, &cfg).unwrap();
        let b = run_parallel(s, &p, 3_000, 1, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_across_calls() {
        let p = params(0.5, 30);
        for mode in [Mode::Fast, Mode::FullStream] {
            let cfg = SimConfig::new(5_000, 4).mode(mode);
            let a = run_parallel(Scheme::Uncoded, &p, 5_000, 6, &cfg).unwrap();
            let b = run_parallel(Scheme::Uncoded, &p, 5_000, 6, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn batches_cover_all_cycles() {
        let r = run(Scheme::Uncoded, &params(1.0, 5), &SimConfig::new(1_001, 3)).unwrap();
        assert_eq!(r.batches.len(), DEFAULT_BATCHES);
        assert_eq!(r.batches.iter().map(|b| b.cycles).sum::<usize>(), 1_001);
        let spread: Vec<usize> = r.batches.iter().map(|b| b.cycles).collect();
        assert!(spread.iter().max().unwrap() - spread.iter().min().unwrap() <= 1);
    }

    #[test]
    fn fast_mode_matches_analytic_mds() {
        let p = params(1.0, 100);
        let s = Scheme::Mds { k: 69 };
        let r = run_parallel(s, &p, 50_000, 4, &SimConfig::new(0, 21)).unwrap();
        let a = age::age(s, &p).unwrap().delta;
        assert!(
            (r.mean_age - a).abs() < 3.0 * r.ci95_halfwidth,
            "{} vs {a}",
            r.mean_age
        );
    }

    #[test]
    fn jackknife_close_to_batch_means() {
        let r = run(
            Scheme::Uncoded,
            &params(1.0, 10),
            &SimConfig::new(200_000, 8),
        )
        .unwrap();
        let jk = r.jackknife_halfwidth();
        assert!(
            (jk / r.ci95_halfwidth - 1.0).abs() < 0.2,
            "{jk} vs {}",
            r.ci95_halfwidth
        );
    }

    #[test]
    fn idle_and_delay_are_exponential_in_fast_mode() {
        let r = run(
            Scheme::Mds { k: 5 },
            &params(1.0, 10),
            &SimConfig::new(200_000, 12),
        )
        .unwrap();
        assert!((r.empirical_ed - 1.0).abs() < 3.0 * r.se_ed);
        assert!((r.empirical_ez - 1.0).abs() < 3.0 * r.se_ez);
    }

    #[test]
    fn full_stream_drop_fraction() {
        let p = params(1.0, 10);
        let s = Scheme::Uncoded;
        let cfg = SimConfig::new(200_000, 5).mode(Mode::FullStream);
        let r = run(s, &p, &cfg).unwrap();
        let es = age::age(s, &p).unwrap().es;
        let expected = es / (es + 1.0);
        let dropped = r.dropped_fraction.unwrap();
        assert!(dropped > 0.0 && dropped < 1.0);
        assert!((dropped - expected).abs() < 0.01, "{dropped} vs {expected}");
        // idle time is memoryless even when drops happen
        assert!((r.empirical_ez - 1.0).abs() < 3.0 * r.se_ez);
    }

    #[test]
    fn return_triggered_has_no_drops_and_matches_formula() {
        let p = params(1.0, 10);
        let s = Scheme::Uncoded;
        for mode in [Mode::Fast, Mode::FullStream] {
            let cfg = SimConfig::new(400_000, 6)
                .mode(mode)
                .policy(Policy::ReturnTriggered);
            let r = run(s, &p, &cfg).unwrap();
            assert_eq!(r.dropped_fraction, None);
            let a = age::age(s, &p).unwrap().delta;
            assert!(
                (r.mean_age - a).abs() < 3.0 * r.ci95_halfwidth,
                "{} vs {a}",
                r.mean_age
            );
        }
    }
}
