//! `toeplitz-propagator`: propagator and spectral projector experiments on
//! the quantized torus, and the acceptance self-test.

mod config;
mod experiments;
mod output;
mod symbol;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, ConfigError, Overrides};
use experiments::{Environment, RunError};

#[derive(Parser, Debug)]
#[command(name = "toeplitz-propagator", version, about = "Toeplitz propagator and spectral projector kernels on the torus")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Exact propagator kernel on the graph of the flow against its predictor.
    Propagator(Flags),
    /// Smoothed spectral projector kernel against the return-time predictor.
    Projector(Flags),
    /// Parallel transport, prequantum phase and amplitude factors along the flow.
    Lifts(Flags),
    /// Runs the acceptance criteria and writes a JSON summary (always JSON).
    Selftest(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Configuration file (`key = value` lines under [experiment] and [output]).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Level k, or a comma-separated list of levels.
    #[arg(long, value_name = "N[,N...]")]
    k: Option<String>,
    /// Start point x = (p, q) in the unit cell.
    #[arg(long, value_name = "P,Q", allow_hyphen_values = true)]
    point: Option<String>,
    /// Projector second argument y; repeat for several.
    #[arg(long, value_name = "P,Q")]
    target: Vec<String>,
    /// Time grid A:STEP:B.
    #[arg(long, value_name = "A:STEP:B", allow_hyphen_values = true)]
    tgrid: Option<String>,
    /// Energy level; must equal H at the point.
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    energy: Option<String>,
    /// Fourier pair, bump:T or gaussian:T.
    #[arg(long, value_name = "KIND:T")]
    fhat: Option<String>,
    /// Symbol: model-cos or expr:<formula in p, q, t>.
    #[arg(long, value_name = "SYMBOL")]
    symbol: Option<String>,
    /// Largest step of the time-dependent propagator.
    #[arg(long, value_name = "H")]
    max_step: Option<String>,
    /// Comma-separated acceptance criteria for selftest.
    #[arg(long, value_name = "A1,A2,...")]
    criteria: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_name = "csv|json")]
    format: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Result<Overrides, ConfigError> {
        let wrap = |flag: &str, e: ConfigError| ConfigError(format!("--{flag}: {e}"));
        Ok(Overrides {
            command: None,
            levels: self.k.as_deref().map(config::parse_levels).transpose().map_err(|e| wrap("k", e))?,
            point: self.point.as_deref().map(config::parse_point).transpose().map_err(|e| wrap("point", e))?,
            targets: if self.target.is_empty() {
                None
            } else {
                Some(
                    self.target
                        .iter()
                        .map(|t| config::parse_point(t))
                        .collect::<Result<_, _>>()
                        .map_err(|e| wrap("target", e))?,
                )
            },
            tgrid: self.tgrid.as_deref().map(str::parse).transpose().map_err(|e| wrap("tgrid", e))?,
            energy: self
                .energy
                .as_deref()
                .map(|e| {
                    e.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| ConfigError(format!("{e:?} is not a finite number")))
                })
                .transpose()
                .map_err(|e| wrap("energy", e))?,
            fhat: self.fhat.as_deref().map(str::parse).transpose().map_err(|e| wrap("fhat", e))?,
            symbol: self.symbol.as_deref().map(str::parse).transpose().map_err(|e| wrap("symbol", e))?,
            max_step: self
                .max_step
                .as_deref()
                .map(|h| {
                    h.trim()
                        .parse::<f64>()
                        .map_err(|_| ConfigError(format!("{h:?} is not a number")))
                })
                .transpose()
                .map_err(|e| wrap("max-step", e))?,
            criteria: self
                .criteria
                .as_deref()
                .map(|c| c.split(',').map(|s| s.trim().to_string()).collect()),
            out: self.out.clone(),
            format: self.format.as_deref().map(str::parse).transpose().map_err(|e| wrap("format", e))?,
        })
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        CliCommand::Propagator(f) => (Command::Propagator, f),
        CliCommand::Projector(f) => (Command::Projector, f),
        CliCommand::Lifts(f) => (Command::Lifts, f),
        CliCommand::Selftest(f) => (Command::Selftest, f),
    };
    match run(command, flags) {
        Ok(code) => code,
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run(command: Command, flags: &Flags) -> Result<ExitCode, RunError> {
    let file = match &flags.config {
        Some(path) => config::read_config_file(path)?,
        None => Overrides::default(),
    };
    let cfg = config::resolve(command, file.merge(flags.overrides()?))?;
    let env = Environment::from_env()?;
    let tables = match command {
        Command::Propagator => experiments::run_propagator(&cfg, &env)?,
        Command::Projector => experiments::run_projector(&cfg, &env)?,
        Command::Lifts => experiments::run_lifts(&cfg, &env)?,
        Command::Selftest => return selftest(&cfg, &env),
    };
    let written = output::emit(&tables, cfg.format, cfg.out.as_deref()).map_err(RunError::Config)?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn selftest(cfg: &config::ExperimentConfig, env: &Environment) -> Result<ExitCode, RunError> {
    let results = experiments::run_selftest(cfg, env, |r| eprintln!("{r}"));
    let mut json = serde_json::to_string_pretty(&results).expect("results serialize");
    json.push('\n');
    match &cfg.out {
        Some(path) => output::write_file(path, &json).map_err(RunError::Config)?,
        None => output::print_stdout(&json).map_err(RunError::Config)?,
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    eprintln!("{} of {} criteria passed", results.len() - failed, results.len());
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    })
}
