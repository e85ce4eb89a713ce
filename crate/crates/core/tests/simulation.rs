use coded_aoi::schemes::{ServiceSampler, ServiceTime};
use coded_aoi::simulator::{self, Mode, Policy, SimConfig};
use coded_aoi::{age, service_moments, RandomStream, Scheme, SystemParams};

struct Fixed(f64);

impl ServiceTime for Fixed {
    fn sample(&mut self, _rng: &mut RandomStream) -> f64 {
        self.0
    }
}

fn params(mu: f64, n: usize) -> SystemParams {
    SystemParams::new(1.0, 1.0, mu, n).unwrap()
}

/// Mean and standard error of `f(S)` over `draws` samples.
fn sample_stat(
    scheme: Scheme,
    p: &SystemParams,
    draws: usize,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let mut sampler = ServiceSampler::new(scheme, p).unwrap();
    let mut rng = RandomStream::from_seed(31);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let x = f(sampler.sample(&mut rng));
        sum += x;
        sum_sq += x * x;
    }
    let m = sum / draws as f64;
    let var = (sum_sq / draws as f64 - m * m) * draws as f64 / (draws - 1) as f64;
    (m, (var / draws as f64).sqrt())
}

#[test]
fn pooled_replications_match_one_long_run() {
    let p = params(1.0, 20);
    let scheme = Scheme::Mds { k: 10 };
    let pooled =
        simulator::run_parallel(scheme, &p, 25_000, 8, &SimConfig::new(25_000, 3)).unwrap();
    let long = simulator::run(scheme, &p, &SimConfig::new(200_000, 1003)).unwrap();
    assert_eq!(pooled.cycles, long.cycles);
    let joint = pooled.ci95_halfwidth.hypot(long.ci95_halfwidth);
    assert!((pooled.mean_age - long.mean_age).abs() <= joint);
}

#[test]
fn service_moments_within_three_standard_errors() {
    for mu in [1.0, 0.5] {
        let p = params(mu, 100);
        for scheme in [
            Scheme::Uncoded,
            Scheme::Repetition { k: 50 },
            Scheme::Mds { k: 69 },
        ] {
            let m = service_moments(&scheme, &p).unwrap();
            let (es, se) = sample_stat(scheme, &p, 200_000, |s| s);
            assert!(
                (es - m.es).abs() < 3.0 * se,
                "{scheme} mu={mu}: {es} vs {}",
                m.es
            );
            let (es2, se2) = sample_stat(scheme, &p, 200_000, |s| s * s);
            assert!(
                (es2 - m.es2).abs() < 3.0 * se2,
                "{scheme} mu={mu}: {es2} vs {}",
                m.es2
            );
        }
    }
}

#[test]
fn mm_mds_mean_service_gap_shrinks_with_n() {
    let gap = |n: usize, k: usize| {
        let p = params(1.0, n);
        let scheme = Scheme::MmMds { k, ell: 2 };
        let predicted = service_moments(&scheme, &p).unwrap().es;
        let (es, _) = sample_stat(scheme, &p, 40_000, |s| s);
        (es - predicted).abs() / predicted
    };
    let small = gap(100, 136);
    let large = gap(1000, 1287);
    assert!(large < 0.01, "n=1000 gap {large}");
    assert!(large < small, "gap {small} at n=100, {large} at n=1000");
}

#[test]
fn return_triggered_policy_matches_zero_wait() {
    let p = params(0.5, 100);
    let scheme = Scheme::Mds { k: 58 };
    let zw = simulator::run(scheme, &p, &SimConfig::new(300_000, 8)).unwrap();
    let rt = simulator::run(
        scheme,
        &p,
        &SimConfig::new(300_000, 9).policy(Policy::ReturnTriggered),
    )
    .unwrap();
    let analytic = age(scheme, &p).unwrap().delta;
    assert!((rt.mean_age - analytic).abs() <= rt.ci95_halfwidth);
    assert!((rt.mean_age - zw.mean_age).abs() <= rt.ci95_halfwidth.hypot(zw.ci95_halfwidth));
}

#[test]
fn full_stream_delay_is_length_biased() {
    // S = 1, lambda = 1: the successful packet's delay is the interarrival gap
    // straddling the completion, so E[D] = 1 + E[min(1, Exp(1))] = 2 - 1/e
    let cfg = SimConfig::new(400_000, 10).mode(Mode::FullStream);
    let r = simulator::run_with_service(&mut Fixed(1.0), 1.0, &cfg).unwrap();
    let excess = 1.0 - (-1.0f64).exp();
    assert!((r.empirical_ed - (1.0 + excess)).abs() < 3.0 * r.se_ed);
    assert!((r.empirical_ez - 1.0).abs() < 3.0 * r.se_ez);
    let expected = 3.25 + excess;
    assert!(
        (r.mean_age - expected).abs() <= r.ci95_halfwidth,
        "{} vs {expected}",
        r.mean_age
    );

    let fast =
        simulator::run_with_service(&mut Fixed(1.0), 1.0, &SimConfig::new(400_000, 10)).unwrap();
    assert!((fast.mean_age - 3.25).abs() <= fast.ci95_halfwidth);
}

#[test]
fn full_stream_drop_fraction_bounded() {
    let p = params(1.0, 100);
    let cfg = SimConfig::new(50_000, 12).mode(Mode::FullStream);
    for scheme in [Scheme::Uncoded, Scheme::Mds { k: 69 }] {
        let r = simulator::run(scheme, &p, &cfg).unwrap();
        let f = r.dropped_fraction.unwrap();
        let es = service_moments(&scheme, &p).unwrap().es;
        assert!(f > 0.0 && f < 1.0);
        assert!(
            (f - es / (es + 1.0)).abs() < 0.1 * es / (es + 1.0) + 0.002,
            "{scheme}: {f}"
        );
    }
}
