//! Level split for multi-message MDS coding.
//!
//! With `ell` subtasks queued per worker, level `m` holds the `m`-th subtask of
//! every queue. At the moment the k-th result arrives, level `m` has finished a
//! fraction `alpha_m` of its `n` subtasks. For large `n` the last finished
//! subtask of every nonempty level completes at the same time, which gives
//!
//! ```text
//! (1 - alpha_m)^m = e^{mu c} (1 - alpha_{m-1})^{m-1},   sum_m alpha_m = ell * alpha
//! ```
//!
//! Levels whose right-hand side reaches 1 finish nothing and are clamped to 0.
//! The sum is strictly increasing in `alpha_1`, so the split is found by
//! bisection on `ln(1 - alpha_1)`.

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const INTERVAL_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-10;

/// Per-level finished fractions, `alphas[m - 1] = alpha_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSplit {
    alphas: Vec<f64>,
}

impl LevelSplit {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn ell(&self) -> usize {
        self.alphas.len()
    }

    pub fn sum(&self) -> f64 {
        self.alphas.iter().sum()
    }

    /// Integer level counts for `n` workers and `k` needed results.
    pub fn counts(&self, n: usize, k: usize) -> Result<Vec<usize>> {
        level_counts(self, n, k)
    }
}

/// Runs the chain forward from `alpha_1`, clamping unreachable levels to zero.
pub fn chain_from_first(ell: usize, alpha_1: f64, mu_c: f64) -> Vec<f64> {
    chain_from_log(ell, (-alpha_1).ln_1p(), mu_c)
}

// In `L_m = ln(1 - alpha_m)` the chain is `m L_m = mu c + (m - 1) L_{m-1}`.
fn chain_from_log(ell: usize, log_rest_1: f64, mu_c: f64) -> Vec<f64> {
    let mut alphas = Vec::with_capacity(ell);
    let fraction = |log_rest: f64| {
        if log_rest >= 0.0 {
            0.0
        } else {
            -log_rest.exp_m1()
        }
    };
    let mut log_rest = log_rest_1;
    alphas.push(fraction(log_rest));
    for m in 2..=ell {
        let mf = m as f64;
        log_rest = (mu_c + (mf - 1.0) * log_rest) / mf;
        alphas.push(fraction(log_rest));
    }
    alphas
}

fn chain_sum(ell: usize, log_rest_1: f64, mu_c: f64) -> f64 {
    chain_from_log(ell, log_rest_1, mu_c).iter().sum()
}

/// Largest `|(1 - a_m)^m e^{-mu c} - (1 - a_{m-1})^{m-1}|` over consecutive nonzero levels.
pub fn chain_residual(alphas: &[f64], mu_c: f64) -> f64 {
    let shrink = (-mu_c).exp();
    alphas
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > 0.0)
        .map(|(i, w)| {
            let m = i as i32 + 2;
            ((1.0 - w[1]).powi(m) * shrink - (1.0 - w[0]).powi(m - 1)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn solve_levels(ell: usize, alpha: f64, mu_c: f64) -> Result<LevelSplit> {
    if ell == 0 {
        return Err(Error::InvalidParams("ell must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(mu_c.is_finite() && mu_c > 0.0) {
        return Err(Error::InvalidParams(format!(
            "mu*c must be finite and > 0, got {mu_c}"
        )));
    }
    if ell == 1 {
        return Ok(LevelSplit {
            alphas: vec![alpha],
        });
    }

    let target = ell as f64 * alpha;
    // bisection on ln(1 - alpha_1), where the level sum has bounded slope
    let floor = f64::MIN_POSITIVE.ln();
    let supremum = chain_sum(ell, floor, mu_c);
    if target >= supremum {
        return Err(Error::Infeasible { target, supremum });
    }

    let (mut lo, mut hi) = (floor, 0.0f64);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && hi - lo > INTERVAL_TOL * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        if chain_sum(ell, mid, mu_c) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let alphas = chain_from_log(ell, 0.5 * (lo + hi), mu_c);
    let residual = (alphas.iter().sum::<f64>() - target).abs();
    if residual > SUM_TOL {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }
    Ok(LevelSplit { alphas })
}

/// Largest-remainder rounding of `alpha_m * n` so the counts sum to exactly `k`.
///
/// Ties go to the lower level, which keeps the counts nonincreasing.
pub fn level_counts(split: &LevelSplit, n: usize, k: usize) -> Result<Vec<usize>> {
    let scaled: Vec<f64> = split.alphas.iter().map(|a| a * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let floor_sum: usize = counts.iter().sum();
    let inconsistent = Error::InconsistentK {
        k,
        floor_sum,
        levels: counts.len(),
    };
    if floor_sum > k || k - floor_sum > counts.len() {
        return Err(inconsistent);
    }
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - counts[a] as f64;
        let rb = scaled[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(k - floor_sum) {
        counts[i] += 1;
    }
    if counts.iter().any(|&c| c > n) {
        return Err(inconsistent);
    }
    Ok(counts)
}
