use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "coded-aoi",
    version,
    about = "Age of information for coded master/worker computation"
)]
struct Cli {
    /// JSON file whose keys mirror the long flags; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic age, E[S] and E[S^2] for one scheme
    Age(AgeArgs),
    /// Age-optimal k for a code family
    Optimize(OptimizeArgs),
    /// Monte Carlo estimate of the age
    Simulate(SimulateArgs),
    /// Parameter sweep written as CSV
    Sweep(SweepArgs),
}

/// System parameters; each defaults to 1 when neither flag nor config sets it.
#[derive(Debug, Clone, Default, Args)]
struct ParamArgs {
    /// Arrival rate of the exponential transmission delay
    #[arg(long)]
    lambda: Option<f64>,
    /// Shift of the single-worker runtime
    #[arg(long)]
    c: Option<f64>,
    /// Straggling rate of the single-worker runtime
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
struct SchemeArgs {
    /// uncoded, repetition (rep), mds or mm-mds
    #[arg(long)]
    scheme: Option<String>,
    /// Number of workers
    #[arg(long)]
    n: Option<usize>,
    /// Results needed to decode (ignored for uncoded)
    #[arg(long)]
    k: Option<usize>,
    /// Subtasks per worker for mm-mds (default 1)
    #[arg(long = "l")]
    ell: Option<usize>,
}

#[derive(Debug, Args)]
struct AgeArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Print a CSV row in the sweep format instead of key/value lines
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    /// rep, mds or mm-mds
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Subtasks per worker for mm-mds (default 1)
    #[arg(long = "l")]
    ell: Option<usize>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Fast,
    FullStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    ZeroWait,
    ReturnTriggered,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Source policy
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Cycles per replication (default 1000000)
    #[arg(long)]
    cycles: Option<usize>,
    /// Required; all randomness derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// Independent replications pooled into one estimate (default 1)
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// fig4a, fig4b, fig5a or fig5b
    #[arg(long)]
    preset: Option<String>,
    /// Scheme family for a custom grid
    #[arg(long)]
    scheme: Option<String>,
    /// Worker counts: `100`, `10,20,50` or `10:1000:10`
    #[arg(long)]
    n: Option<String>,
    /// `all`, `opt` or an inclusive range `a:b`
    #[arg(long)]
    k: Option<String>,
    /// Levels for mm-mds, same syntax as --n
    #[arg(long = "l")]
    ell: Option<String>,
    #[command(flatten)]
    params: ParamArgs,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Required; seeds the optional simulation overlay
    #[arg(long)]
    seed: Option<u64>,
    /// Enables the simulation overlay with this many cycles per replication
    #[arg(long)]
    cycles: Option<usize>,
    /// Replications per overlay point (default 1)
    #[arg(long)]
    reps: Option<usize>,
}

/// Contents of `--config`. Keys a subcommand does not use are ignored.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scheme: Option<String>,
    family: Option<String>,
    n: Option<serde_json::Value>,
    k: Option<serde_json::Value>,
    l: Option<serde_json::Value>,
    lambda: Option<f64>,
    c: Option<f64>,
    mu: Option<f64>,
    mode: Option<ModeArg>,
    policy: Option<PolicyArg>,
    cycles: Option<usize>,
    seed: Option<u64>,
    reps: Option<usize>,
    preset: Option<String>,
    out: Option<PathBuf>,
    csv: Option<bool>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(coded_aoi::Error),
}

impl From<coded_aoi::Error> for CliError {
    fn from(e: coded_aoi::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use coded_aoi::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(
                E::InvalidParams(_) | E::InvalidScheme(_) | E::InsufficientCycles { .. },
            ) => 2,
            CliError::Core(E::Io { .. }) => 1,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Core(coded_aoi::Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = load_config(cli.config.as_ref()).and_then(|cfg| match cli.command {
        Command::Age(a) => commands::age(a, &cfg),
        Command::Optimize(a) => commands::optimize(a, &cfg),
        Command::Simulate(a) => commands::simulate(a, &cfg),
        Command::Sweep(a) => commands::sweep(a, &cfg),
    });
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
