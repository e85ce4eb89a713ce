//! Parameter sweeps and their CSV output.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::age;
use crate::error::{Error, Result};
use crate::optimizer::{self, Family};
use crate::schemes::{self, Scheme, SystemParams};
use crate::simulator::{self, SimConfig};

pub const CSV_HEADER: &str =
    "scheme,n,k,l,lambda,c,mu,es,es2,age_analytic,age_sim_mean,age_sim_ci95,k1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeFamily {
    Uncoded,
    Repetition,
    Mds,
    MmMds,
}

impl SchemeFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uncoded" | "unc" => Some(Self::Uncoded),
            "repetition" | "rep" => Some(Self::Repetition),
            "mds" => Some(Self::Mds),
            "mm-mds" | "mmmds" => Some(Self::MmMds),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    /// Every valid k for the scheme.
    All,
    /// Inclusive range, clipped to the valid range.
    Range { start: usize, end: usize },
    /// The optimizer's k*.
    Optimal,
}

/// Simulation columns for every row that supports sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlay {
    pub cycles_per_rep: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: SchemeFamily,
    pub ns: Vec<usize>,
    pub ks: KChoice,
    pub ells: Vec<usize>,
    pub lambda: f64,
    pub c: f64,
    pub mu: f64,
    pub overlay: Option<Overlay>,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ells.is_empty() {
            return Err(Error::InvalidParams("sweep ranges must be nonempty".into()));
        }
        if self.ns.contains(&0) || self.ells.contains(&0) {
            return Err(Error::InvalidParams("n and l must be >= 1".into()));
        }
        if let KChoice::Range { start, end } = self.ks {
            if start == 0 || start > end {
                return Err(Error::InvalidParams(format!(
                    "k range {start}..={end} is empty or starts at 0"
                )));
            }
        }
        if let Some(o) = self.overlay {
            if o.reps == 0 || o.cycles_per_rep < simulator::DEFAULT_BATCHES {
                return Err(Error::InvalidParams(format!(
                    "overlay needs reps >= 1 and cycles >= {}",
                    simulator::DEFAULT_BATCHES
                )));
            }
        }
        SystemParams::new(self.lambda, self.c, self.mu, 1).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub n: usize,
    pub lambda: f64,
    pub c: f64,
    pub mu: f64,
    pub es: f64,
    pub es2: f64,
    pub age_analytic: f64,
    pub sim: Option<(f64, f64)>,
    pub k1: Option<usize>,
}

/// Named parameter sets.
pub fn preset(name: &str) -> Option<Vec<SweepSpec>> {
    let base = |family, ns: Vec<usize>, ks, ells: Vec<usize>, mu| SweepSpec {
        family,
        ns,
        ks,
        ells,
        lambda: 1.0,
        c: 1.0,
        mu,
        overlay: None,
    };
    let fig4 = |mu| {
        vec![
            base(SchemeFamily::Uncoded, vec![100], KChoice::All, vec![1], mu),
            base(
                SchemeFamily::Repetition,
                vec![100],
                KChoice::All,
                vec![1],
                mu,
            ),
            base(SchemeFamily::Mds, vec![100], KChoice::All, vec![1], mu),
        ]
    };
    match name {
        "fig4a" => Some(fig4(1.0)),
        "fig4b" => Some(fig4(0.5)),
        "fig5a" => Some(vec![base(
            SchemeFamily::MmMds,
            (1..=100).map(|i| 10 * i).collect(),
            KChoice::Optimal,
            vec![2],
            1.0,
        )]),
        "fig5b" => Some(vec![base(
            SchemeFamily::MmMds,
            vec![100],
            KChoice::Optimal,
            (1..=5).collect(),
            0.01,
        )]),
        _ => None,
    }
}

pub const PRESETS: [&str; 4] = ["fig4a", "fig4b", "fig5a", "fig5b"];

#[derive(Debug, Clone, Copy)]
struct Point {
    family: SchemeFamily,
    n: usize,
    ell: usize,
    k: Option<usize>,
}

fn expand(spec: &SweepSpec) -> Vec<Point> {
    let mut points = Vec::new();
    for &n in &spec.ns {
        let ells: &[usize] = if spec.family == SchemeFamily::MmMds {
            &spec.ells
        } else {
            &[1]
        };
        for &ell in ells {
            let valid = match spec.family {
                SchemeFamily::Uncoded => n..=n,
                SchemeFamily::Repetition => 1..=n,
                SchemeFamily::Mds => 1..=n.saturating_sub(1),
                SchemeFamily::MmMds => 1..=(n * ell).saturating_sub(1),
            };
            let mut push = |k| {
                points.push(Point {
                    family: spec.family,
                    n,
                    ell,
                    k,
                })
            };
            match (spec.family, spec.ks) {
                (SchemeFamily::Uncoded, _) => push(Some(n)),
                (_, KChoice::Optimal) => push(None),
                (_, KChoice::All) => valid.for_each(|k| push(Some(k))),
                (_, KChoice::Range { start, end }) => {
                    (start.max(*valid.start())..=end.min(*valid.end())).for_each(|k| push(Some(k)))
                }
            }
        }
    }
    points
}

fn scheme_for(family: SchemeFamily, k: usize, ell: usize) -> Scheme {
    match family {
        SchemeFamily::Uncoded => Scheme::Uncoded,
        SchemeFamily::Repetition => Scheme::Repetition { k },
        SchemeFamily::Mds => Scheme::Mds { k },
        SchemeFamily::MmMds => Scheme::MmMds { k, ell },
    }
}

fn evaluate(spec: &SweepSpec, pt: Point) -> Result<Option<SweepRow>> {
    let p = SystemParams::new(spec.lambda, spec.c, spec.mu, pt.n)?;
    let k = match pt.k {
        Some(k) => k,
        None => {
            let family = match pt.family {
                SchemeFamily::Repetition => Family::Repetition,
                SchemeFamily::Mds => Family::Mds,
                SchemeFamily::MmMds => Family::MmMds { ell: pt.ell },
                SchemeFamily::Uncoded => unreachable!("uncoded has a single k"),
            };
            optimizer::optimize(family, &p)?.k_star
        }
    };
    let scheme = scheme_for(pt.family, k, pt.ell);
    let a = match age::age(scheme, &p) {
        Ok(a) => a,
        // rows whose level split degenerates carry no analytic value
        Err(Error::DegenerateLevels { .. }) if pt.k.is_some() => return Ok(None),
        Err(e) => return Err(e),
    };
    let k1 = match scheme {
        Scheme::MmMds { k, ell } => Some(schemes::mm_levels(k, ell, &p)?.k1),
        _ => None,
    };
    let sim = match spec.overlay {
        Some(o) if scheme.validate_for_sampling(pt.n).is_ok() => {
            let cfg = SimConfig::new(o.cycles_per_rep, o.seed);
            let r = simulator::run_parallel(scheme, &p, o.cycles_per_rep, o.reps, &cfg)?;
            Some((r.mean_age, r.ci95_halfwidth))
        }
        _ => None,
    };
    Ok(Some(SweepRow {
        scheme,
        n: pt.n,
        lambda: spec.lambda,
        c: spec.c,
        mu: spec.mu,
        es: a.es,
        es2: a.es2,
        age_analytic: a.delta,
        sim,
        k1,
    }))
}

/// Evaluates every grid point; rows come back in grid order.
pub fn run_sweep(specs: &[SweepSpec]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for spec in specs {
        spec.validate()?;
        let points = expand(spec);
        let evaluated: Vec<Result<Option<SweepRow>>> =
            points.par_iter().map(|&pt| evaluate(spec, pt)).collect();
        for r in evaluated {
            if let Some(row) = r? {
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// `%.12g`-style formatting, independent of locale.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{sign}{:02}",
            trim_zeros(mantissa.to_string()),
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn to_csv(rows: &[SweepRow], metadata: &[String]) -> String {
    let mut out = String::new();
    for line in metadata {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (sim_mean, sim_ci) = match r.sim {
            Some((m, h)) => (format_sig(m), format_sig(h)),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scheme.name(),
            r.n,
            r.scheme.k(r.n),
            r.scheme.ell(),
            format_sig(r.lambda),
            format_sig(r.c),
            format_sig(r.mu),
            format_sig(r.es),
            format_sig(r.es2),
            format_sig(r.age_analytic),
            sim_mean,
            sim_ci,
            r.k1.map(|k| k.to_string()).unwrap_or_default(),
        );
    }
    out
}

/// Metadata lines for the commented CSV header.
pub fn metadata(label: &str, seed: Option<u64>) -> Vec<String> {
    vec![
        format!(
            "coded-aoi {} sweep={label} seed={}",
            env!("CARGO_PKG_VERSION"),
            seed.map_or_else(|| "none".to_string(), |s| s.to_string())
        ),
        "repetition rows evaluate the analytic age for every k; simulation columns only where k divides n".into(),
    ]
}

pub fn write_csv(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_k(rows: &[SweepRow], name: &str) -> usize {
        let r = rows
            .iter()
            .filter(|r| r.scheme.name() == name)
            .min_by(|a, b| a.age_analytic.total_cmp(&b.age_analytic))
            .unwrap();
        r.scheme.k(r.n)
    }

    #[test]
    fn format_sig_examples() {
        assert_eq!(format_sig(2.0), "2");
        assert_eq!(format_sig(0.5), "0.5");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(2.0 / 3.0 * 100.0), "66.6666666667");
        assert_eq!(format_sig(1.234e-7), "1.234e-07");
        assert_eq!(format_sig(6.02e23), "6.02e+23");
        assert_eq!(format_sig(-29.0 / 6.0), "-4.83333333333");
        assert_eq!(format_sig(123456789012.0), "123456789012");
        assert_eq!(format_sig(1234567890123.0), "1.23456789012e+12");
    }

    #[test]
    fn single_level_presets() {
        let rows = run_sweep(&preset("fig4a").unwrap()).unwrap();
        assert_eq!(min_k(&rows, "mds"), 69);
        assert_eq!(min_k(&rows, "repetition"), 100);
        assert_eq!(
            rows.iter().filter(|r| r.scheme.name() == "uncoded").count(),
            1
        );
        let rows = run_sweep(&preset("fig4b").unwrap()).unwrap();
        assert_eq!(min_k(&rows, "mds"), 58);
        assert_eq!(min_k(&rows, "repetition"), 50);
    }

    #[test]
    fn multi_level_preset_trend() {
        let rows = run_sweep(&preset("fig5b").unwrap()).unwrap();
        assert_eq!(rows.len(), 5);
        for w in rows.windows(2) {
            assert!(w[1].age_analytic <= w[0].age_analytic);
            assert!(w[1].scheme.ell() == w[0].scheme.ell() + 1);
        }
        assert!(rows.iter().all(|r| r.k1.is_some()));
    }

    #[test]
    fn csv_layout() {
        let spec = SweepSpec {
            family: SchemeFamily::Repetition,
            ns: vec![6],
            ks: KChoice::Range { start: 2, end: 4 },
            ells: vec![1],
            lambda: 1.0,
            c: 1.0,
            mu: 1.0,
            overlay: Some(Overlay {
                cycles_per_rep: 300,
                reps: 2,
                seed: 1,
            }),
        };
        let rows = run_sweep(&[spec]).unwrap();
        let csv = to_csv(&rows, &metadata("test", Some(1)));
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# coded-aoi"));
        assert_eq!(lines[2], CSV_HEADER);
        assert_eq!(lines.len(), 6);
        let k4: Vec<&str> = lines[5].split(',').collect();
        assert_eq!(k4.len(), 13);
        assert_eq!(&k4[..4], &["repetition", "6", "4", "1"]);
        // 4 does not divide 6: no overlay
        assert_eq!(k4[10], "");
        let k3: Vec<&str> = lines[4].split(',').collect();
        assert!(!k3[10].is_empty() && !k3[11].is_empty());
        assert_eq!(k3[12], "");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = preset("fig4a").unwrap().remove(1);
        spec.ns.clear();
        assert!(run_sweep(&[spec.clone()]).is_err());
        spec.ns = vec![10];
        spec.ks = KChoice::Range { start: 5, end: 2 };
        assert!(run_sweep(&[spec]).is_err());
    }
}
