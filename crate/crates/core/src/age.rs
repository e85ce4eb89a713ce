//! Time-average age of information.
//!
//! A successful update waits `D ~ Exp(lambda)` in transit, is computed in `S`,
//! and the CU then idles `Z ~ Exp(lambda)` until the next successful arrival.
//! With cycle length `Y = S + Z` the renewal-reward average is
//!
//! ```text
//! Delta = E[D] + E[S] + E[Y^2] / (2 E[Y])
//! ```
//!
//! and `E[Y^2] = E[S^2] + 2 E[S]/lambda + 2/lambda^2` by independence of `S` and `Z`.
//! Every scheme's closed form is this expression evaluated on its own service moments.

use crate::error::Result;
use crate::schemes::{self, Scheme, ServiceMoments, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeResult {
    pub delta: f64,
    pub es: f64,
    pub es2: f64,
    pub scheme: Scheme,
    pub params: SystemParams,
}

pub fn age_from_moments(lambda: f64, m: ServiceMoments) -> f64 {
    let mean_idle = 1.0 / lambda;
    let ey = m.es + mean_idle;
    let ey2 = m.es2 + 2.0 * m.es * mean_idle + 2.0 * mean_idle * mean_idle;
    mean_idle + m.es + ey2 / (2.0 * ey)
}

/// Analytic age of any scheme.
pub fn age(scheme: Scheme, p: &SystemParams) -> Result<AgeResult> {
    let m = schemes::service_moments(&scheme, p)?;
    Ok(AgeResult {
        delta: age_from_moments(p.lambda(), m),
        es: m.es,
        es2: m.es2,
        scheme,
        params: *p,
    })
}

pub fn age_uncoded(p: &SystemParams) -> AgeResult {
    age(Scheme::Uncoded, p).expect("uncoded is valid for every n")
}

/// Evaluated for any `1 <= k <= n`; divisibility only matters when sampling.
pub fn age_repetition(p: &SystemParams, k: usize) -> Result<AgeResult> {
    age(Scheme::Repetition { k }, p)
}

pub fn age_mds(p: &SystemParams, k: usize) -> Result<AgeResult> {
    age(Scheme::Mds { k }, p)
}

pub fn age_mm_mds(p: &SystemParams, k: usize, ell: usize) -> Result<AgeResult> {
    age(Scheme::MmMds { k, ell }, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::stats::{gen_harmonic2, harmonic};
    use proptest::prelude::*;

    fn params(lambda: f64, c: f64, mu: f64, n: usize) -> SystemParams {
        SystemParams::new(lambda, c, mu, n).unwrap()
    }

    // Written-out closed forms, transcribed independently of age_from_moments.
    // `mean` and `var` are the order-statistic moments of the scheme.
    fn closed_form(lambda: f64, mean: f64, var: f64) -> f64 {
        1.0 / lambda
            + mean
            + (mean * mean + var + 2.0 / lambda * mean + 2.0 / (lambda * lambda))
                / (2.0 * (mean + 1.0 / lambda))
    }

    fn uncoded_closed(lambda: f64, c: f64, mu: f64, n: usize) -> f64 {
        let nf = n as f64;
        let mean = c / nf + harmonic(n) / (nf * mu);
        let var = gen_harmonic2(n) / (nf * nf * mu * mu);
        closed_form(lambda, mean, var)
    }

    fn repetition_closed(lambda: f64, c: f64, mu: f64, n: usize, k: usize) -> f64 {
        let (nf, kf) = (n as f64, k as f64);
        let mean = c / kf + harmonic(k) / (nf * mu);
        let var = gen_harmonic2(k) / (nf * nf * mu * mu);
        closed_form(lambda, mean, var)
    }

    fn mds_closed(lambda: f64, c: f64, mu: f64, n: usize, k: usize, k1: usize) -> f64 {
        let kf = k as f64;
        let mean = c / kf + (harmonic(n) - harmonic(n - k1)) / (kf * mu);
        let var = (gen_harmonic2(n) - gen_harmonic2(n - k1)) / (kf * kf * mu * mu);
        closed_form(lambda, mean, var)
    }

    fn argmin(f: impl Fn(usize) -> f64, ks: impl Iterator<Item = usize>) -> usize {
        let mut best = (f64::INFINITY, 0);
        for k in ks {
            let v = f(k);
            if v < best.0 {
                best = (v, k);
            }
        }
        best.1
    }

    #[test]
    fn zero_service_limit() {
        let zero = ServiceMoments { es: 0.0, es2: 0.0 };
        assert_eq!(age_from_moments(1.0, zero), 2.0);
        assert_eq!(age_from_moments(2.0, zero), 1.0);
    }

    #[test]
    fn deterministic_unit_service() {
        let m = ServiceMoments { es: 1.0, es2: 1.0 };
        assert_eq!(age_from_moments(1.0, m), 3.25);
    }

    #[test]
    fn uncoded_single_worker() {
        let a = age_uncoded(&params(1.0, 1.0, 1.0, 1));
        assert!((a.delta - (1.0 + 2.0 + 11.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn repetition_full_equals_uncoded() {
        for n in [1usize, 7, 100, 1000] {
            let p = params(0.8, 1.3, 0.6, n);
            assert_eq!(age_repetition(&p, n).unwrap().delta, age_uncoded(&p).delta);
        }
    }

    #[test]
    fn mds_two_workers() {
        let a = age_mds(&params(1.0, 1.0, 1.0, 2), 1).unwrap();
        assert_eq!(a.es, 1.5);
        assert!((a.es2 - 2.5).abs() < 1e-15);
        let expected = age_from_moments(1.0, ServiceMoments { es: 1.5, es2: 2.5 });
        assert!((a.delta - expected).abs() < 1e-15);
    }

    #[test]
    fn invalid_k_rejected() {
        let p = params(1.0, 1.0, 1.0, 10);
        assert!(matches!(age_mds(&p, 10), Err(Error::InvalidScheme(_))));
        assert!(matches!(
            age_repetition(&p, 0),
            Err(Error::InvalidScheme(_))
        ));
        assert!(matches!(
            age_mm_mds(&p, 20, 2),
            Err(Error::InvalidScheme(_))
        ));
    }

    #[test]
    fn integer_optima_n100() {
        let p1 = params(1.0, 1.0, 1.0, 100);
        let p05 = params(1.0, 1.0, 0.5, 100);
        assert_eq!(argmin(|k| age_mds(&p1, k).unwrap().delta, 1..100), 69);
        assert_eq!(argmin(|k| age_mds(&p05, k).unwrap().delta, 1..100), 58);
        assert_eq!(
            argmin(|k| age_repetition(&p1, k).unwrap().delta, 1..=100),
            100
        );
        assert_eq!(
            argmin(|k| age_repetition(&p05, k).unwrap().delta, 1..=100),
            50
        );
    }

    #[test]
    fn mds_beats_repetition_beats_uncoded() {
        let p = params(1.0, 1.0, 1.0, 100);
        let mds = (1..100)
            .map(|k| age_mds(&p, k).unwrap().delta)
            .fold(f64::INFINITY, f64::min);
        let rep = (1..=100)
            .map(|k| age_repetition(&p, k).unwrap().delta)
            .fold(f64::INFINITY, f64::min);
        assert!(mds < rep);
        assert!(rep <= age_uncoded(&p).delta);
    }

    #[test]
    fn mm_mds_single_level_equals_mds() {
        let p = params(1.0, 1.0, 0.5, 100);
        for k in 1..100 {
            assert_eq!(
                age_mm_mds(&p, k, 1).unwrap().delta,
                age_mds(&p, k).unwrap().delta
            );
        }
    }

    #[test]
    fn closed_forms_agree_on_grid() {
        for &lambda in &[0.3, 1.0, 4.0] {
            for &(c, mu) in &[(1.0, 1.0), (1.0, 0.5), (2.0, 0.25), (0.1, 7.0)] {
                for &n in &[1usize, 2, 10, 100, 777] {
                    let p = params(lambda, c, mu, n);
                    let a = age_uncoded(&p).delta;
                    assert!((a - uncoded_closed(lambda, c, mu, n)).abs() < 1e-12);
                    for k in (1..=n).step_by(1 + n / 13) {
                        let a = age_repetition(&p, k).unwrap().delta;
                        assert!((a - repetition_closed(lambda, c, mu, n, k)).abs() < 1e-12);
                        if k < n {
                            let a = age_mds(&p, k).unwrap().delta;
                            assert!((a - mds_closed(lambda, c, mu, n, k, k)).abs() < 1e-12);
                        }
                        for ell in [2usize, 3] {
                            let kk = k * ell - 1;
                            if kk == 0 {
                                continue;
                            }
                            if let Ok(r) = age_mm_mds(&p, kk, ell) {
                                let k1 = schemes::mm_levels(kk, ell, &p).unwrap().k1;
                                let closed = mds_closed(lambda, c, mu, n, kk, k1);
                                assert!((r.delta - closed).abs() < 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn more_levels_lower_age() {
        let p = params(1.0, 1.0, 0.01, 100);
        let best: Vec<f64> = (1..=5)
            .map(|ell| {
                (1..100 * ell)
                    .filter_map(|k| age_mm_mds(&p, k, ell).ok())
                    .map(|a| a.delta)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for w in best.windows(2) {
            assert!(w[1] <= w[0], "{best:?}");
        }
        assert!(best[1] < best[0]);
    }

    #[test]
    fn uncoded_asymptotic_bound() {
        for n in [100usize, 1000, 10_000] {
            let p = params(1.0, 1.0, 1.0, n);
            let excess = age_uncoded(&p).delta - 2.0;
            assert!(excess < 10.0 * (n as f64).ln() / n as f64);
        }
    }

    #[test]
    fn mds_order_one_over_n() {
        let scaled = |n: usize| {
            let p = params(1.0, 1.0, 1.0, n);
            (age_mds(&p, n / 2).unwrap().delta - 2.0) * n as f64
        };
        let (a, b) = (scaled(10_000), scaled(20_000));
        assert!((a - b).abs() / a < 0.05);
    }

    proptest! {
        #[test]
        fn age_above_floor(
            lambda in 0.05f64..20.0, c in 0.01f64..5.0, mu in 0.01f64..5.0,
            n in 2usize..500, kf in 0.0f64..1.0,
        ) {
            let p = params(lambda, c, mu, n);
            let k = 1 + ((n - 2) as f64 * kf) as usize;
            let floor = 2.0 / lambda;
            prop_assert!(age_uncoded(&p).delta > floor);
            prop_assert!(age_repetition(&p, k).unwrap().delta > floor);
            prop_assert!(age_mds(&p, k).unwrap().delta > floor);
            if let Ok(a) = age_mm_mds(&p, 2 * k, 2) {
                prop_assert!(a.delta > floor && a.delta.is_finite());
            }
        }

        #[test]
        fn age_increasing_in_mean_service(es in 0.0f64..50.0, extra in 0.0f64..5.0, lambda in 0.1f64..10.0) {
            // deterministic S: the mapped objective is nondecreasing in E[S]
            let a = age_from_moments(lambda, ServiceMoments { es, es2: es * es });
            let es_b = es + extra;
            let b = age_from_moments(lambda, ServiceMoments { es: es_b, es2: es_b * es_b });
            prop_assert!(b >= a);
        }
    }
}
