//! Task-distribution schemes and the computation time `S` each one induces.
//!
//! A whole task on one worker takes `X ~ (c, mu)` (shift, rate). Splitting it
//! into `m` equal subtasks gives per-subtask times `(c/m, m*mu)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::levels::{self, LevelSplit};
use crate::rng::RandomStream;
use crate::stats::{kth_smallest, OrderIndex, ShiftedExp};

/// Transmission rate plus the mother runtime `(c, mu)` and worker count `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    lambda: f64,
    c: f64,
    mu: f64,
    n: usize,
}

impl SystemParams {
    pub fn new(lambda: f64, c: f64, mu: f64, n: usize) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("c", c), ("mu", mu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if n == 0 {
            return Err(Error::InvalidParams("n must be >= 1".into()));
        }
        Ok(Self { lambda, c, mu, n })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.lambda, self.c, self.mu, n)
    }

    /// Per-subtask runtime when the task is cut into `pieces` equal parts.
    fn subtask(&self, pieces: usize) -> ShiftedExp {
        ShiftedExp::new(self.c / pieces as f64, pieces as f64 * self.mu)
            .expect("validated parameters give a valid distribution")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Uncoded,
    /// `k` subpackets, each replicated `n/k` times.
    Repetition {
        k: usize,
    },
    /// `(n, k)` MDS code, one coded subtask per worker.
    Mds {
        k: usize,
    },
    /// `(n*ell, k)` MDS code with `ell` coded subtasks queued per worker.
    MmMds {
        k: usize,
        ell: usize,
    },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Uncoded => "uncoded",
            Scheme::Repetition { .. } => "repetition",
            Scheme::Mds { .. } => "mds",
            Scheme::MmMds { .. } => "mm-mds",
        }
    }

    pub fn k(&self, n: usize) -> usize {
        match *self {
            Scheme::Uncoded => n,
            Scheme::Repetition { k } | Scheme::Mds { k } | Scheme::MmMds { k, .. } => k,
        }
    }

    pub fn ell(&self) -> usize {
        match *self {
            Scheme::MmMds { ell, .. } => ell,
            _ => 1,
        }
    }

    /// Checks the invariants needed by the analytic path. Repetition accepts any
    /// `1 <= k <= n` here; the sampler additionally requires `k | n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Scheme::Uncoded => Ok(()),
            Scheme::Repetition { k } => {
                if k == 0 || k > n {
                    return Err(Error::InvalidScheme(format!(
                        "repetition requires 1 <= k <= n (k = {k}, n = {n})"
                    )));
                }
                Ok(())
            }
            Scheme::Mds { k } => {
                if k == 0 {
                    return Err(Error::InvalidScheme("k must be >= 1".into()));
                }
                if k >= n {
                    return Err(Error::InvalidScheme(format!(
                        "k must be < n for mds (k = {k}, n = {n})"
                    )));
                }
                Ok(())
            }
            Scheme::MmMds { k, ell } => {
                if ell == 0 {
                    return Err(Error::InvalidScheme("ell must be >= 1".into()));
                }
                if k == 0 || k >= n * ell {
                    return Err(Error::InvalidScheme(format!(
                        "mm-mds requires 1 <= k < n*ell (k = {k}, n*ell = {})",
                        n * ell
                    )));
                }
                Ok(())
            }
        }
    }

    /// Validation for the sampling path.
    pub fn validate_for_sampling(&self, n: usize) -> Result<()> {
        self.validate(n)?;
        if let Scheme::Repetition { k } = *self {
            if !n.is_multiple_of(k) {
                return Err(Error::InvalidScheme(format!(
                    "repetition sampling requires k to divide n (k = {k}, n = {n})"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Scheme::Uncoded => write!(f, "uncoded"),
            Scheme::Repetition { k } => write!(f, "repetition(k={k})"),
            Scheme::Mds { k } => write!(f, "mds(k={k})"),
            Scheme::MmMds { k, ell } => write!(f, "mm-mds(k={k}, l={ell})"),
        }
    }
}

/// First two moments of the computation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceMoments {
    pub es: f64,
    pub es2: f64,
}

impl ServiceMoments {
    pub fn variance(&self) -> f64 {
        self.es2 - self.es * self.es
    }
}

/// Level structure behind an MM-MDS service time: `S = X~_{k1:n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MmLevels {
    pub split: LevelSplit,
    pub k1: usize,
}

/// Solves the level split for `(n*ell, k)` MM-MDS and sets `k1 = round(alpha_1 * n)`.
pub fn mm_levels(k: usize, ell: usize, p: &SystemParams) -> Result<MmLevels> {
    Scheme::MmMds { k, ell }.validate(p.n)?;
    let alpha = k as f64 / (p.n * ell) as f64;
    let split = levels::solve_levels(ell, alpha, p.mu * p.c)?;
    let alpha_1 = split.alphas()[0];
    let k1 = (alpha_1 * p.n as f64).round() as usize;
    if k1 == 0 {
        return Err(Error::DegenerateLevels { alpha_1, n: p.n });
    }
    Ok(MmLevels {
        split,
        k1: k1.min(p.n),
    })
}

/// The shifted exponential and order statistic whose moments give `S`.
fn order_statistic(s: &Scheme, p: &SystemParams) -> Result<(ShiftedExp, OrderIndex)> {
    s.validate(p.n)?;
    let n = p.n;
    Ok(match *s {
        Scheme::Uncoded => (p.subtask(n), OrderIndex::new(n, n)?),
        Scheme::Repetition { k } => {
            // min over n/k replicas of (c/k, k mu) is (c/k, n mu)
            let d = ShiftedExp::new(p.c / k as f64, n as f64 * p.mu)?;
            (d, OrderIndex::new(k, k)?)
        }
        Scheme::Mds { k } => (p.subtask(k), OrderIndex::new(n, k)?),
        Scheme::MmMds { k, ell } => {
            let lv = mm_levels(k, ell, p)?;
            (p.subtask(k), OrderIndex::new(n, lv.k1)?)
        }
    })
}

pub fn service_moments(s: &Scheme, p: &SystemParams) -> Result<ServiceMoments> {
    let (d, idx) = order_statistic(s, p)?;
    Ok(ServiceMoments {
        es: d.os_mean(idx),
        es2: d.os_second_moment(idx),
    })
}

/// Source of per-cycle computation times for the simulator.
pub trait ServiceTime {
    fn sample(&mut self, rng: &mut RandomStream) -> f64;
}

/// `S == 0`; the zero-service limit of the age formula.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroService;

impl ServiceTime for ZeroService {
    fn sample(&mut self, _rng: &mut RandomStream) -> f64 {
        0.0
    }
}

/// Draws computation times for one scheme, reusing scratch buffers between draws.
#[derive(Debug, Clone)]
pub struct ServiceSampler {
    scheme: Scheme,
    n: usize,
    subtask: ShiftedExp,
    draws: Vec<f64>,
    multiset: Vec<f64>,
}

impl ServiceSampler {
    pub fn new(scheme: Scheme, p: &SystemParams) -> Result<Self> {
        scheme.validate_for_sampling(p.n)?;
        if let Scheme::MmMds { k, ell } = scheme {
            // same failure modes as the analytic path
            mm_levels(k, ell, p)?;
        }
        let pieces = match scheme {
            Scheme::Uncoded => p.n,
            _ => scheme.k(p.n),
        };
        Ok(Self {
            scheme,
            n: p.n,
            subtask: p.subtask(pieces),
            draws: Vec::with_capacity(p.n),
            multiset: Vec::with_capacity(p.n * scheme.ell()),
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

impl ServiceTime for ServiceSampler {
    fn sample(&mut self, rng: &mut RandomStream) -> f64 {
        let d = self.subtask;
        match self.scheme {
            Scheme::Uncoded => (0..self.n).map(|_| d.sample(rng)).fold(0.0, f64::max),
            Scheme::Repetition { k } => {
                let replicas = self.n / k;
                (0..k)
                    .map(|_| {
                        (0..replicas)
                            .map(|_| d.sample(rng))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max)
            }
            Scheme::Mds { k } => {
                let idx = OrderIndex::new(self.n, k).expect("validated");
                d.sample_kth_of_n_into(idx, rng, &mut self.draws)
            }
            Scheme::MmMds { k, ell } => {
                self.draws.clear();
                self.draws.extend((0..self.n).map(|_| d.sample(rng)));
                kth_of_multiset(&self.draws, ell, k, &mut self.multiset)
            }
        }
    }
}

/// k-th smallest of the multiset `{m * x : x in draws, 1 <= m <= ell}`.
///
/// Worker `i` finishing its `m`-th queued subtask at `m * x_i` models identical
/// per-subtask durations within a cycle.
pub fn kth_of_multiset(draws: &[f64], ell: usize, k: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    for m in 1..=ell {
        let m = m as f64;
        scratch.extend(draws.iter().map(|x| m * x));
    }
    kth_smallest(scratch, k)
}

/// One draw of the computation time `S`.
pub fn sample_service(s: &Scheme, p: &SystemParams, rng: &mut RandomStream) -> Result<f64> {
    Ok(ServiceSampler::new(*s, p)?.sample(rng))
}
