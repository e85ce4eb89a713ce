//! Age-optimal code parameters.
//!
//! Large-n continuous optima (per unit `alpha = k / (n * ell)`):
//!
//! * repetition: `alpha* = min(1, c mu)`
//! * MDS: `alpha* = 1 + 1 / W_{-1}(-e^{-mu c - 1})`
//! * MM-MDS: no closed form; minimize `(c + ln(1/(1-alpha_1))/mu) / alpha` over the
//!   level chain, searched along `alpha_1`.
//!
//! The continuous optimum only seeds the search. The reported `k_star` is
//! always the integer minimizer of the exact analytic age.

use std::ops::RangeInclusive;

use crate::age::{self, age_from_moments};
use crate::error::{Error, Result};
use crate::levels::{self, LevelSplit};
use crate::schemes::{self, MmLevels, Scheme, SystemParams};

const INV_E: f64 = 0.367_879_441_171_442_33;
const MM_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Repetition,
    Mds,
    MmMds { ell: usize },
}

impl Family {
    pub fn scheme(&self, k: usize) -> Scheme {
        match *self {
            Family::Repetition => Scheme::Repetition { k },
            Family::Mds => Scheme::Mds { k },
            Family::MmMds { ell } => Scheme::MmMds { k, ell },
        }
    }

    pub fn k_range(&self, n: usize) -> RangeInclusive<usize> {
        match *self {
            Family::Repetition => 1..=n,
            Family::Mds => 1..=n.saturating_sub(1),
            Family::MmMds { ell } => 1..=(n * ell).saturating_sub(1),
        }
    }

    pub fn ell(&self) -> usize {
        match *self {
            Family::MmMds { ell } => ell,
            _ => 1,
        }
    }
}

/// What an integer search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Age,
    MeanService,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub k_star: usize,
    /// Continuous large-n optimum.
    pub alpha_star: f64,
    /// `alpha_star * n * ell`, before integer refinement.
    pub k_continuous: f64,
    pub delta_star: f64,
    /// Minimized large-n `E[S]` at `alpha_star`.
    pub continuous_objective: f64,
    /// Exact `E[S]` at `k_star`.
    pub es_star: f64,
    /// Level structure at `k_star` (MM-MDS only).
    pub levels: Option<MmLevels>,
    pub level_counts: Option<Vec<usize>>,
}

/// Lower real branch `W_{-1}`: the solution `w <= -1` of `w e^w = x`, `x in [-1/e, 0)`.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    if !(-INV_E - 1e-15..0.0).contains(&x) {
        return Err(Error::DomainError { x });
    }
    let x = x.max(-INV_E);
    let f = |w: f64| w * w.exp() - x;
    if f(-1.0) >= 0.0 {
        return Ok(-1.0);
    }

    // f is decreasing on (-inf, -1]: f(lo) > 0 > f(hi)
    let mut hi = -1.0f64;
    let mut lo = -2.0f64;
    while f(lo) <= 0.0 {
        hi = lo;
        lo *= 2.0;
    }

    let mut w = initial_guess(x).clamp(lo, hi);
    for _ in 0..100 {
        let fw = f(w);
        if fw == 0.0 {
            return Ok(w);
        }
        if fw > 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let ew = w.exp();
        let d1 = ew * (w + 1.0);
        let d2 = ew * (w + 2.0);
        let mut next = w - fw / (d1 - fw * d2 / (2.0 * d1));
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 4.0 * f64::EPSILON * w.abs() {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // branch-point series in p = -sqrt(2 (e x + 1))
        let p = -(2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    }
}

pub fn repetition_alpha_star(c: f64, mu: f64) -> f64 {
    (c * mu).min(1.0)
}

pub fn mds_alpha_star(c: f64, mu: f64) -> Result<f64> {
    let w = lambert_w_m1(-(-mu * c - 1.0).exp())?;
    Ok(1.0 + 1.0 / w)
}

/// Hill descent over integers from `k_seed`. Moves left on ties, so a flat
/// sequence ends at `k_min`.
pub fn refine_discrete(
    age_fn: impl Fn(usize) -> f64,
    k_seed: usize,
    k_min: usize,
    k_max: usize,
) -> usize {
    assert!(k_min <= k_seed && k_seed <= k_max, "seed outside range");
    let mut k = k_seed;
    let mut fk = age_fn(k);
    loop {
        if k > k_min {
            let fl = age_fn(k - 1);
            if fl <= fk {
                k -= 1;
                fk = fl;
                continue;
            }
        }
        if k < k_max {
            let fr = age_fn(k + 1);
            if fr < fk {
                k += 1;
                fk = fr;
                continue;
            }
        }
        return k;
    }
}

/// Full sweep; ties go to the smaller `k`.
pub fn sweep_argmin(f: impl Fn(usize) -> f64, k_min: usize, k_max: usize) -> usize {
    let mut best = (f64::INFINITY, k_min);
    for k in k_min..=k_max {
        let v = f(k);
        if v < best.0 {
            best = (v, k);
        }
    }
    best.1
}

/// Hill descent followed by a full sweep; returns `(descent, sweep)`.
pub fn refine_discrete_with_sweep(
    age_fn: impl Fn(usize) -> f64,
    k_seed: usize,
    k_min: usize,
    k_max: usize,
) -> (usize, usize) {
    let descent = refine_discrete(&age_fn, k_seed, k_min, k_max);
    (descent, sweep_argmin(&age_fn, k_min, k_max))
}

fn objective_value(family: Family, p: &SystemParams, k: usize, objective: Objective) -> f64 {
    let Ok(m) = schemes::service_moments(&family.scheme(k), p) else {
        return f64::INFINITY;
    };
    match objective {
        Objective::Age => age_from_moments(p.lambda(), m),
        Objective::MeanService => m.es,
    }
}

/// Exact integer minimizer over the whole valid `k` range.
pub fn integer_argmin(family: Family, p: &SystemParams, objective: Objective) -> Result<usize> {
    let range = family.k_range(p.n());
    if range.is_empty() {
        return Err(Error::InvalidScheme(format!(
            "no valid k for {family:?} with n = {}",
            p.n()
        )));
    }
    Ok(sweep_argmin(
        |k| objective_value(family, p, k, objective),
        *range.start(),
        *range.end(),
    ))
}

fn seed_from(k_continuous: f64, range: &RangeInclusive<usize>) -> usize {
    (k_continuous.round().max(0.0) as usize).clamp(*range.start(), *range.end())
}

pub fn opt_repetition(p: &SystemParams) -> OptResult {
    let n = p.n() as f64;
    let alpha = repetition_alpha_star(p.c(), p.mu());
    let range = Family::Repetition.k_range(p.n());
    let k_continuous = alpha * n;
    let f = |k: usize| age::age_repetition(p, k).map_or(f64::INFINITY, |a| a.delta);
    let k_star = refine_discrete(
        f,
        seed_from(k_continuous, &range),
        *range.start(),
        *range.end(),
    );
    let best = age::age_repetition(p, k_star).expect("k_star in range");
    OptResult {
        k_star,
        alpha_star: alpha,
        k_continuous,
        delta_star: best.delta,
        continuous_objective: p.c() / (alpha * n) + (alpha * n).ln() / (p.mu() * n),
        es_star: best.es,
        levels: None,
        level_counts: None,
    }
}

pub fn opt_mds(p: &SystemParams) -> Result<OptResult> {
    let range = Family::Mds.k_range(p.n());
    if p.n() < 2 {
        return Err(Error::InvalidScheme("mds needs n >= 2".into()));
    }
    let n = p.n() as f64;
    let alpha = mds_alpha_star(p.c(), p.mu())?;
    let k_continuous = alpha * n;
    let f = |k: usize| age::age_mds(p, k).map_or(f64::INFINITY, |a| a.delta);
    let k_star = refine_discrete(
        f,
        seed_from(k_continuous, &range),
        *range.start(),
        *range.end(),
    );
    let best = age::age_mds(p, k_star)?;
    Ok(OptResult {
        k_star,
        alpha_star: alpha,
        k_continuous,
        delta_star: best.delta,
        continuous_objective: (p.c() + (1.0 / (1.0 - alpha)).ln() / p.mu()) / (alpha * n),
        es_star: best.es,
        levels: None,
        level_counts: None,
    })
}

/// Continuous MM-MDS optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct MmContinuous {
    pub alpha: f64,
    pub split: LevelSplit,
    /// `(c + ln(1/(1-alpha_1))/mu) / alpha`; divide by `n * ell` for `E[S]`.
    pub scaled_objective: f64,
}

fn mm_objective(ell: usize, c: f64, mu: f64, alpha_1: f64) -> (f64, f64) {
    let chain = levels::chain_from_first(ell, alpha_1, mu * c);
    let alpha = chain.iter().sum::<f64>() / ell as f64;
    let value = (c + (1.0 / (1.0 - alpha_1)).ln() / mu) / alpha;
    (value, alpha)
}

pub fn mm_mds_continuous(ell: usize, c: f64, mu: f64) -> Result<MmContinuous> {
    if ell == 0 {
        return Err(Error::InvalidParams("ell must be >= 1".into()));
    }
    let g = |a1: f64| mm_objective(ell, c, mu, a1).0;
    let step = 1.0 / MM_GRID as f64;
    let (best_i, _) = (0..MM_GRID).map(|i| (i, g((i as f64 + 0.5) * step))).fold(
        (0, f64::INFINITY),
        |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
    );
    let lo = (best_i as f64 - 0.5).max(0.0) * step;
    let hi = ((best_i as f64 + 1.5) * step).min(1.0 - f64::EPSILON);
    let alpha_1 = golden_section(g, lo, hi, 1e-12);
    let (value, alpha) = mm_objective(ell, c, mu, alpha_1);
    if !value.is_finite() {
        return Err(Error::NoConvergence {
            iterations: MM_GRID,
            residual: value,
        });
    }
    Ok(MmContinuous {
        alpha,
        split: levels::solve_levels(ell, alpha, mu * c)?,
        scaled_objective: value,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

const FULL_SCAN_LIMIT: usize = 200_000;

pub fn opt_mm_mds(p: &SystemParams, ell: usize) -> Result<OptResult> {
    let family = Family::MmMds { ell };
    let range = family.k_range(p.n());
    if range.is_empty() {
        return Err(Error::InvalidScheme("mm-mds needs n * ell >= 2".into()));
    }
    let cont = mm_mds_continuous(ell, p.c(), p.mu())?;
    let scale = (p.n() * ell) as f64;
    let k_continuous = cont.alpha * scale;
    let f = |k: usize| age::age_mm_mds(p, k, ell).map_or(f64::INFINITY, |a| a.delta);

    // rounding k1 makes the exact age ragged in k, so the descent result is
    // only a seed for a scan; the scan covers the full range unless it is huge
    let (lo, hi) = (*range.start(), *range.end());
    let descent = refine_discrete(f, seed_from(k_continuous, &range), lo, hi);
    let (window_lo, window_hi) = if hi - lo <= FULL_SCAN_LIMIT {
        (lo, hi)
    } else {
        let width = hi / 10;
        (
            descent.saturating_sub(width).max(lo),
            (descent + width).min(hi),
        )
    };
    let k_star = sweep_argmin(f, window_lo, window_hi);
    let delta = f(k_star);
    if !delta.is_finite() {
        return Err(Error::NoConvergence {
            iterations: window_hi - window_lo + 1,
            residual: delta,
        });
    }

    let best = age::age_mm_mds(p, k_star, ell)?;
    let lv = schemes::mm_levels(k_star, ell, p)?;
    let counts = lv.split.counts(p.n(), k_star).ok();
    Ok(OptResult {
        k_star,
        alpha_star: cont.alpha,
        k_continuous,
        delta_star: best.delta,
        continuous_objective: cont.scaled_objective / scale,
        es_star: best.es,
        levels: Some(lv),
        level_counts: counts,
    })
}

/// Dispatches on family.
pub fn optimize(family: Family, p: &SystemParams) -> Result<OptResult> {
    match family {
        Family::Repetition => Ok(opt_repetition(p)),
        Family::Mds => opt_mds(p),
        Family::MmMds { ell } => opt_mm_mds(p, ell),
    }
}
