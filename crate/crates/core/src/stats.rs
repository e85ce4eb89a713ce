//! Shifted exponential distributions and the moments of their order statistics.
//!
//! For `X ~ shift + Exp(rate)` and `X_{k:n}` the k-th smallest of n i.i.d. copies:
//!
//! ```text
//! E[X_{k:n}]   = shift + (H_n - H_{n-k}) / rate
//! Var[X_{k:n}] = (G_n - G_{n-k}) / rate^2
//! ```
//!
//! with `H_n = sum 1/j` and `G_n = sum 1/j^2`. Both sums come from prefix
//! tables built by direct summation, so values are reproducible bit-for-bit.

use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

struct PrefixTables {
    h: Vec<f64>,
    g: Vec<f64>,
}

static TABLES: RwLock<PrefixTables> = RwLock::new(PrefixTables {
    h: Vec::new(),
    g: Vec::new(),
});

fn prefix(n: usize) -> (f64, f64) {
    {
        let t = TABLES.read().unwrap_or_else(|e| e.into_inner());
        if n < t.h.len() {
            return (t.h[n], t.g[n]);
        }
    }
    let mut t = TABLES.write().unwrap_or_else(|e| e.into_inner());
    if t.h.is_empty() {
        t.h.push(0.0);
        t.g.push(0.0);
    }
    // grow geometrically so a sweep over increasing n stays linear overall
    let target = n.max(2 * t.h.len());
    let (mut h, mut g) = (t.h[t.h.len() - 1], t.g[t.g.len() - 1]);
    for j in t.h.len()..=target {
        let x = j as f64;
        h += 1.0 / x;
        g += 1.0 / (x * x);
        t.h.push(h);
        t.g.push(g);
    }
    (t.h[n], t.g[n])
}

/// `H_n = sum_{j=1..n} 1/j`, with `H_0 = 0`.
pub fn harmonic(n: usize) -> f64 {
    prefix(n).0
}

/// `G_n = sum_{j=1..n} 1/j^2`, with `G_0 = 0`.
pub fn gen_harmonic2(n: usize) -> f64 {
    prefix(n).1
}

/// Shifted exponential `shift + Exp(rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedExp {
    shift: f64,
    rate: f64,
}

/// Rank `k` out of a sample of size `n`, `1 <= k <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderIndex {
    n: usize,
    k: usize,
}

impl OrderIndex {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParams(format!(
                "order index requires 1 <= k <= n, got n = {n}, k = {k}"
            )));
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl ShiftedExp {
    pub fn new(shift: f64, rate: f64) -> Result<Self> {
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "shift must be finite and >= 0, got {shift}"
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "rate must be finite and > 0, got {rate}"
            )));
        }
        Ok(Self { shift, rate })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn os_mean(&self, idx: OrderIndex) -> f64 {
        self.shift + (harmonic(idx.n) - harmonic(idx.n - idx.k)) / self.rate
    }

    pub fn os_var(&self, idx: OrderIndex) -> f64 {
        (gen_harmonic2(idx.n) - gen_harmonic2(idx.n - idx.k)) / (self.rate * self.rate)
    }

    pub fn os_second_moment(&self, idx: OrderIndex) -> f64 {
        let m = self.os_mean(idx);
        m * m + self.os_var(idx)
    }

    /// Inverse-CDF draw: `shift - ln(U) / rate` with `U` uniform on (0, 1].
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        self.from_uniform(rng.uniform_open0())
    }

    /// Maps a uniform variate on (0, 1] through the inverse CDF.
    pub fn from_uniform(&self, u: f64) -> f64 {
        self.shift - u.ln() / self.rate
    }

    /// k-th smallest of `n` fresh draws.
    pub fn sample_kth_of_n(&self, idx: OrderIndex, rng: &mut RandomStream) -> f64 {
        let mut buf = Vec::with_capacity(idx.n);
        self.sample_kth_of_n_into(idx, rng, &mut buf)
    }

    /// Same as [`Self::sample_kth_of_n`], reusing `buf` as scratch space.
    pub fn sample_kth_of_n_into(
        &self,
        idx: OrderIndex,
        rng: &mut RandomStream,
        buf: &mut Vec<f64>,
    ) -> f64 {
        buf.clear();
        buf.extend((0..idx.n).map(|_| self.sample(rng)));
        kth_smallest(buf, idx.k)
    }
}

/// k-th smallest (1-based) by expected linear-time selection. Reorders `values`.
pub fn kth_smallest(values: &mut [f64], k: usize) -> f64 {
    assert!(
        k >= 1 && k <= values.len(),
        "rank {k} out of 1..={}",
        values.len()
    );
    *values.select_nth_unstable_by(k - 1, f64::total_cmp).1
}
