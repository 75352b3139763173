//! `percolab`: command-line front end of the simulation laboratory.
//!
//! Values come from the TOML file given by `--config`, then the environment
//! (`PERCOLAB_WORKERS`, `PERCOLAB_OUT`), then flags. Failures print a JSON
//! object `{"error": {...}}` on stderr and exit with status 2.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Output;

#[derive(Parser, Debug)]
#[command(name = "percolab", version, about = "Poisson-Boolean continuum percolation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set event.r=4`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    replicas: Option<usize>,

    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Worker threads (default: `PERCOLAB_WORKERS`, then the CPU count).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory (default: `PERCOLAB_OUT`, then `out_dir` of the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Sample the balls meeting a window.
    Sample,
    /// Explore the origin's cluster in a sampled window.
    Explore,
    /// Run the revealment algorithm and write its step trace.
    Reveal,
    /// One-arm probability over a lambda grid.
    EstimateTheta,
    /// Expected cluster volume over a lambda grid.
    EstimateChi,
    /// Survival function of the cluster volume.
    EstimateTail,
    /// Magnetization over a rho grid.
    EstimateMagnetization,
    /// Crossing intensity of the one-arm probability.
    FindLambdaC,
    /// Susceptibility lower bounds.
    CheckSusceptibility,
    /// Critical-volume bounds.
    CheckTail,
    /// Magnetization bounds.
    CheckMagnetization,
    /// Entropic bounds for one event and pair of intensities.
    CheckEntropic,
    /// Exact checks of the relative-entropy toolkit.
    EntropySelftest,
}

impl Command {
    fn name(self) -> &'static str {
        let i = match self {
            Command::Sample => 0,
            Command::Explore => 1,
            Command::Reveal => 2,
            Command::EstimateTheta => 3,
            Command::EstimateChi => 4,
            Command::EstimateTail => 5,
            Command::EstimateMagnetization => 6,
            Command::FindLambdaC => 7,
            Command::CheckSusceptibility => 8,
            Command::CheckTail => 9,
            Command::CheckMagnetization => 10,
            Command::CheckEntropic => 11,
            Command::EntropySelftest => 12,
        };
        commands::SUBCOMMANDS[i]
    }
}

fn parse_override(s: &str) -> Result<(String, String), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::new("usage", format!("override `{s}` is not of the form KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn env_usize(name: &str) -> Result<Option<usize>, CliError> {
    match std::env::var(name) {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::new("usage", format!("{name} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Ok(dir) = std::env::var("PERCOLAB_OUT") {
        overrides.push(("out_dir".into(), toml::Value::String(dir).to_string()));
    }
    for s in &cli.set {
        overrides.push(parse_override(s)?);
    }
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    if let Some(r) = cli.replicas {
        overrides.push(("replicas".into(), r.to_string()));
    }
    if let Some(l) = cli.lambda {
        overrides.push(("lambda".into(), format!("{l:?}")));
    }
    if let Some(dir) = &cli.out {
        overrides.push(("out_dir".into(), toml::Value::String(dir.display().to_string()).to_string()));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let workers = match cli.workers {
        Some(w) => w,
        None => env_usize("PERCOLAB_WORKERS")?
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    };
    if workers == 0 {
        return Err(CliError::new("usage", "worker count must be positive"));
    }
    let name = cli.command.name();
    let mut out = Output::new(PathBuf::from(&cfg.out_dir), &cfg)?;
    let summary = commands::run(name, &cfg, workers, &mut out)?;
    let manifest = out.manifest(name, &cfg, workers, summary)?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
