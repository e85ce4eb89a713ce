use std::fmt::Write as _;

use coded_aoi::optimizer::{self, Family};
use coded_aoi::schemes::{self, Scheme, SystemParams};
use coded_aoi::simulator::{self, Mode, Policy, SimConfig};
use coded_aoi::sweep::{self, KChoice, Overlay, SchemeFamily, SweepRow, SweepSpec};

use crate::{
    AgeArgs, CliError, ConfigFile, ModeArg, OptimizeArgs, ParamArgs, PolicyArg, SchemeArgs,
    SimulateArgs, SweepArgs,
};

type Out = Result<String, CliError>;

const DEFAULT_CYCLES: usize = 1_000_000;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn value_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn config_usize(v: &Option<serde_json::Value>, key: &str) -> Result<Option<usize>, CliError> {
    v.as_ref()
        .map(|v| {
            v.as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| usage(format!("config key {key} must be a nonnegative integer")))
        })
        .transpose()
}

fn params(args: &ParamArgs, n: usize, cfg: &ConfigFile) -> Result<SystemParams, CliError> {
    let lambda = args.lambda.or(cfg.lambda).unwrap_or(1.0);
    let c = args.c.or(cfg.c).unwrap_or(1.0);
    let mu = args.mu.or(cfg.mu).unwrap_or(1.0);
    Ok(SystemParams::new(lambda, c, mu, n)?)
}

fn require_n(n: Option<usize>) -> Result<usize, CliError> {
    match n {
        None => Err(usage("--n is required")),
        Some(0) => Err(usage("n must be >= 1")),
        Some(n) => Ok(n),
    }
}

fn scheme(args: &SchemeArgs, cfg: &ConfigFile) -> Result<(Scheme, usize), CliError> {
    let name = args
        .scheme
        .clone()
        .or_else(|| cfg.scheme.clone())
        .ok_or_else(|| usage("--scheme is required"))?;
    let family = SchemeFamily::parse(&name).ok_or_else(|| {
        usage(format!(
            "unknown scheme {name:?}; expected uncoded, repetition, mds or mm-mds"
        ))
    })?;
    let n = require_n(args.n.or(config_usize(&cfg.n, "n")?))?;
    let k = args.k.or(config_usize(&cfg.k, "k")?);
    let ell = args.ell.or(config_usize(&cfg.l, "l")?).unwrap_or(1);
    let need_k = || k.ok_or_else(|| usage(format!("--k is required for scheme {name}")));
    let scheme = match family {
        SchemeFamily::Uncoded => Scheme::Uncoded,
        SchemeFamily::Repetition => Scheme::Repetition { k: need_k()? },
        SchemeFamily::Mds => Scheme::Mds { k: need_k()? },
        SchemeFamily::MmMds => Scheme::MmMds { k: need_k()?, ell },
    };
    scheme.validate(n)?;
    Ok((scheme, n))
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key:<20}{value}");
}

pub fn age(args: AgeArgs, cfg: &ConfigFile) -> Out {
    let (scheme, n) = scheme(&args.scheme, cfg)?;
    let p = params(&args.params, n, cfg)?;
    let a = coded_aoi::age(scheme, &p)?;
    let k1 = match scheme {
        Scheme::MmMds { k, ell } => Some(schemes::mm_levels(k, ell, &p)?.k1),
        _ => None,
    };
    if args.csv || cfg.csv.unwrap_or(false) {
        let row = SweepRow {
            scheme,
            n,
            lambda: p.lambda(),
            c: p.c(),
            mu: p.mu(),
            es: a.es,
            es2: a.es2,
            age_analytic: a.delta,
            sim: None,
            k1,
        };
        return Ok(sweep::to_csv(&[row], &[]));
    }
    let mut out = String::new();
    kv(&mut out, "scheme", scheme);
    kv(&mut out, "n", n);
    kv(&mut out, "age", a.delta);
    kv(&mut out, "es", a.es);
    kv(&mut out, "es2", a.es2);
    if let Some(k1) = k1 {
        kv(&mut out, "k1", k1);
    }
    Ok(out)
}

pub fn optimize(args: OptimizeArgs, cfg: &ConfigFile) -> Out {
    let name = args
        .family
        .clone()
        .or_else(|| cfg.family.clone())
        .ok_or_else(|| usage("--family is required"))?;
    let ell = args.ell.or(config_usize(&cfg.l, "l")?).unwrap_or(1);
    if ell == 0 {
        return Err(usage("l must be >= 1"));
    }
    let family = match name.as_str() {
        "rep" | "repetition" => Family::Repetition,
        "mds" => Family::Mds,
        "mm-mds" => Family::MmMds { ell },
        _ => {
            return Err(usage(format!(
                "unknown family {name:?}; expected rep, mds or mm-mds"
            )))
        }
    };
    let n = require_n(args.n.or(config_usize(&cfg.n, "n")?))?;
    let p = params(&args.params, n, cfg)?;
    let r = optimizer::optimize(family, &p)?;

    let mut out = String::new();
    kv(&mut out, "scheme", family.scheme(r.k_star));
    kv(&mut out, "n", n);
    kv(&mut out, "k_star", r.k_star);
    kv(&mut out, "alpha_star", r.alpha_star);
    kv(&mut out, "k_continuous", r.k_continuous);
    kv(&mut out, "age_star", r.delta_star);
    kv(&mut out, "es_star", r.es_star);
    kv(&mut out, "es_continuous", r.continuous_objective);
    if let Some(lv) = &r.levels {
        let alphas: Vec<String> = lv.split.alphas().iter().map(|a| a.to_string()).collect();
        kv(&mut out, "level_alphas", alphas.join(","));
        kv(&mut out, "k1", lv.k1);
    }
    if let Some(counts) = &r.level_counts {
        let counts: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
        kv(&mut out, "level_counts", counts.join(","));
    }
    Ok(out)
}

pub fn simulate(args: SimulateArgs, cfg: &ConfigFile) -> Out {
    let (scheme, n) = scheme(&args.scheme, cfg)?;
    let p = params(&args.params, n, cfg)?;
    let seed = args
        .seed
        .or(cfg.seed)
        .ok_or_else(|| usage("--seed is required for simulate"))?;
    let cycles = args.cycles.or(cfg.cycles).unwrap_or(DEFAULT_CYCLES);
    let reps = args.reps.or(cfg.reps).unwrap_or(1);
    if reps == 0 {
        return Err(usage("reps must be >= 1"));
    }
    let mode = match args.mode.or(cfg.mode).unwrap_or(ModeArg::Fast) {
        ModeArg::Fast => Mode::Fast,
        ModeArg::FullStream => Mode::FullStream,
    };
    let policy = match args.policy.or(cfg.policy).unwrap_or(PolicyArg::ZeroWait) {
        PolicyArg::ZeroWait => Policy::ZeroWait,
        PolicyArg::ReturnTriggered => Policy::ReturnTriggered,
    };
    scheme.validate_for_sampling(n)?;
    let sim_cfg = SimConfig::new(cycles, seed).mode(mode).policy(policy);
    let r = simulator::run_parallel(scheme, &p, cycles, reps, &sim_cfg)?;
    let analytic = coded_aoi::age(scheme, &p)?.delta;

    let mut out = String::new();
    kv(&mut out, "scheme", scheme);
    kv(&mut out, "n", n);
    kv(&mut out, "mode", format!("{mode:?}"));
    kv(&mut out, "policy", format!("{policy:?}"));
    kv(&mut out, "seed", r.seed);
    kv(&mut out, "reps", reps);
    kv(&mut out, "cycles", r.cycles);
    kv(&mut out, "mean_age", r.mean_age);
    kv(&mut out, "ci95_halfwidth", r.ci95_halfwidth);
    kv(&mut out, "analytic_age", analytic);
    kv(&mut out, "relative_gap", (r.mean_age - analytic) / analytic);
    kv(&mut out, "empirical_es", r.empirical_es);
    kv(&mut out, "empirical_es2", r.empirical_es2);
    kv(&mut out, "empirical_ed", r.empirical_ed);
    kv(&mut out, "empirical_ez", r.empirical_ez);
    if let Some(f) = r.dropped_fraction {
        kv(&mut out, "dropped_fraction", f);
    }
    Ok(out)
}

/// `100`, `10,20,50` or `start:end[:step]`.
fn parse_list(text: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    let bad = || usage(format!("cannot parse --{flag} {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, s] => (num(a)?, num(b)?, num(s)?),
            _ => return Err(bad()),
        };
        if step == 0 || start > end {
            return Err(usage(format!("--{flag} range {text:?} is empty")));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

fn parse_k(text: &str) -> Result<KChoice, CliError> {
    match text {
        "all" => Ok(KChoice::All),
        "opt" | "optimal" => Ok(KChoice::Optimal),
        _ => {
            let v = parse_list(text, "k")?;
            match (text.contains(':'), v.first(), v.last()) {
                (true, Some(&start), Some(&end)) => Ok(KChoice::Range { start, end }),
                (false, Some(&k), _) if v.len() == 1 => Ok(KChoice::Range { start: k, end: k }),
                _ => Err(usage("--k must be all, opt, a single value or a range a:b")),
            }
        }
    }
}

pub fn sweep(args: SweepArgs, cfg: &ConfigFile) -> Out {
    let seed = args
        .seed
        .or(cfg.seed)
        .ok_or_else(|| usage("--seed is required for sweep"))?;
    let preset_name = args.preset.clone().or_else(|| cfg.preset.clone());
    let grid_flags =
        args.scheme.is_some() || args.n.is_some() || args.k.is_some() || args.ell.is_some();
    let param_flags =
        args.params.lambda.is_some() || args.params.c.is_some() || args.params.mu.is_some();

    let (label, mut specs) = match preset_name {
        Some(name) => {
            if grid_flags || param_flags {
                return Err(usage(
                    "--preset fixes the grid and parameters; drop --scheme/--n/--k/--l/--lambda/--c/--mu",
                ));
            }
            let specs = sweep::preset(&name).ok_or_else(|| {
                usage(format!(
                    "unknown preset {name:?}; expected one of {}",
                    sweep::PRESETS.join(", ")
                ))
            })?;
            (name, specs)
        }
        None => ("custom".to_string(), vec![custom_spec(&args, cfg)?]),
    };

    if let Some(cycles) = args.cycles.or(cfg.cycles) {
        let reps = args.reps.or(cfg.reps).unwrap_or(1);
        for s in &mut specs {
            s.overlay = Some(Overlay {
                cycles_per_rep: cycles,
                reps,
                seed,
            });
        }
    }

    let rows = sweep::run_sweep(&specs)?;
    let csv = sweep::to_csv(&rows, &sweep::metadata(&label, Some(seed)));
    match args.out.clone().or_else(|| cfg.out.clone()) {
        Some(path) => {
            sweep::write_csv(&path, &csv)?;
            Ok(String::new())
        }
        None => Ok(csv),
    }
}

fn custom_spec(args: &SweepArgs, cfg: &ConfigFile) -> Result<SweepSpec, CliError> {
    let name = args
        .scheme
        .clone()
        .or_else(|| cfg.scheme.clone())
        .ok_or_else(|| usage("sweep needs --preset or --scheme"))?;
    let family = SchemeFamily::parse(&name).ok_or_else(|| {
        usage(format!(
            "unknown scheme {name:?}; expected uncoded, repetition, mds or mm-mds"
        ))
    })?;
    let n_text = args
        .n
        .clone()
        .or_else(|| cfg.n.as_ref().map(value_text))
        .ok_or_else(|| usage("--n is required"))?;
    let k_text = args
        .k
        .clone()
        .or_else(|| cfg.k.as_ref().map(value_text))
        .unwrap_or_else(|| "all".into());
    let l_text = args
        .ell
        .clone()
        .or_else(|| cfg.l.as_ref().map(value_text))
        .unwrap_or_else(|| "1".into());
    let p = params(&args.params, 1, cfg)?;
    Ok(SweepSpec {
        family,
        ns: parse_list(&n_text, "n")?,
        ks: parse_k(&k_text)?,
        ells: parse_list(&l_text, "l")?,
        lambda: p.lambda(),
        c: p.c(),
        mu: p.mu(),
        overlay: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("100", "n").unwrap(), vec![100]);
        assert_eq!(parse_list("10,20, 50", "n").unwrap(), vec![10, 20, 50]);
        assert_eq!(parse_list("10:40:10", "n").unwrap(), vec![10, 20, 30, 40]);
        assert_eq!(parse_list("3:5", "n").unwrap(), vec![3, 4, 5]);
        assert!(parse_list("5:3", "n").is_err());
        assert!(parse_list("1:5:0", "n").is_err());
        assert!(parse_list("x", "n").is_err());
    }

    #[test]
    fn k_choices() {
        assert_eq!(parse_k("all").unwrap(), KChoice::All);
        assert_eq!(parse_k("opt").unwrap(), KChoice::Optimal);
        assert_eq!(parse_k("4:9").unwrap(), KChoice::Range { start: 4, end: 9 });
        assert_eq!(parse_k("7").unwrap(), KChoice::Range { start: 7, end: 7 });
        assert!(parse_k("1,2").is_err());
    }
}
