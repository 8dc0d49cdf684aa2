//! Command-line front end: model configs in, key=value reports and CSV out.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{CliError, Output, Overrides};
pub use config::{Config, ConfigError, ModelConfig};

#[derive(Debug, Parser)]
#[command(name = "divcap", version, about = "Optimal dividend barriers with capital injection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Model configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV sidecars.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub antithetic: bool,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// State name (or index for regime models).
    #[arg(long, global = true)]
    pub state: Option<String>,
    /// Starting surplus for `simulate`.
    #[arg(long, global = true)]
    pub x0: Option<f64>,
    /// Comma-separated barriers, one per state.
    #[arg(long, global = true, value_delimiter = ',')]
    pub barriers: Option<Vec<f64>>,
    /// Read barriers from a saved `solve-aux` or `solve-regime` report.
    #[arg(long, global = true)]
    pub barriers_from: Option<PathBuf>,
    /// Single-regime mode even when a chain is configured.
    #[arg(long, global = true)]
    pub aux: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Optimal barrier and value of the single-regime problem.
    SolveAux,
    /// Fixed point of the regime-switching iteration.
    SolveRegime,
    /// Monte Carlo NPV of a barrier strategy.
    Simulate,
    /// Identity, optimality and simulation checks.
    Verify,
    /// Value curve as CSV.
    Curve,
}

fn read(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs one command and returns its output; files are written to `--out`.
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let cfg = Config::parse(&read(path)?)?;
    let mut ov = Overrides {
        paths: cli.paths,
        dt: cli.dt,
        tmax: cli.tmax,
        seed: cli.seed,
        antithetic: cli.antithetic,
        threads: cli.threads,
        state: cli.state.clone(),
        x0: cli.x0,
        barriers: cli.barriers.clone(),
        aux: cli.aux,
    };
    if let Some(p) = &cli.barriers_from {
        let states = if cfg.has_chain() && !cli.aux { cfg.regime_model()?.states } else { Vec::new() };
        let found = report::parse_barriers(&read(p)?, &states)
            .ok_or_else(|| CliError::Usage(format!("{}: no barrier lines", p.display())))?;
        ov.barriers = Some(found);
    }
    let out = match cli.command {
        Command::SolveAux => commands::solve_aux(&cfg, &ov),
        Command::SolveRegime => commands::solve_regime(&cfg, &ov),
        Command::Simulate => commands::simulate(&cfg, &ov),
        Command::Verify => commands::verify(&cfg, &ov),
        Command::Curve => commands::curve(&cfg, &ov),
    }?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for (name, text) in &out.files {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        }
    }
    Ok(out)
}

/// Runs the command, prints its output and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            if out.failures > 0 {
                eprintln!("{} verification check(s) failed", out.failures);
                4
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
