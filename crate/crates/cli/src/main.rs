//! `phasekit` command-line front end.
//!
//! Exit codes: 0 success, 1 a check or `--threshold` failed, 2 configuration or input error,
//! 3 inadequate grid, 4 rank deficiency.

mod check;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phasekit::PhaseError;

use crate::config::{FileConfig, Overrides, RunConfig};
use crate::output::RunDir;

#[derive(Parser)]
#[command(name = "phasekit", version, about = "Phase-space representation of a truncated oscillator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Frame width; defaults to the matched width 1/sqrt(2 m omega).
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Fock-space truncation D.
    #[arg(long = "dim", global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    spacing: Option<f64>,
    /// auto | H | qmin:qmax:pmin:pmax | off
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
    /// coherent | fock_mixture:w0,w1,.. | matrix_file:PATH
    #[arg(long, global = true)]
    generator: Option<String>,
    /// Parent directory for run directories.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Husimi density of a state on the grid.
    Density {
        #[arg(long)]
        state: String,
    },
    /// Position and momentum marginals of the density.
    Marginals {
        #[arg(long)]
        state: String,
    },
    /// Quantum and classical expectations of closed-form symbols.
    Expect {
        #[arg(long)]
        state: String,
        #[arg(long, default_value = "Q,P,Q2,P2,H")]
        symbols: String,
    },
    /// Effects of a uniform tiling of the grid and their completeness rank.
    Effects {
        #[arg(long, default_value_t = 3)]
        tiles: usize,
        #[arg(long)]
        state: Option<String>,
    },
    /// Recover a density operator from a sampled density CSV.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        /// State to compare against (trace distance).
        #[arg(long)]
        truth: Option<String>,
        /// Fail when the post-projection residual exceeds this value.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Densities along the oscillator evolution.
    Evolve {
        #[arg(long)]
        state: String,
        #[arg(long, default_value = "0,0.5,1", value_delimiter = ',', allow_hyphen_values = true)]
        times: Vec<f64>,
        /// Also compare with the classically transported initial density.
        #[arg(long)]
        liouville: bool,
    },
    /// Bargmann coefficients of a pure state.
    Bargmann {
        #[arg(long)]
        state: String,
    },
    /// Run invariant suites and write a JSON report.
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn exit_code(e: &PhaseError) -> u8 {
    match e {
        PhaseError::InadequateGrid(_) => 3,
        PhaseError::RankDeficient { .. } => 4,
        // a user-supplied acceptance threshold was exceeded
        PhaseError::ResidualTooLarge { .. } => 1,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PHASEKIT_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().map_err(|_| format!("PHASEKIT_THREADS must be a positive integer, got '{raw}'"))?;
    if n == 0 {
        return Err("PHASEKIT_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn resolve(common: Common) -> phasekit::Result<RunConfig> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        m: common.m,
        omega: common.omega,
        sigma: common.sigma,
        dim: common.dim,
        spacing: common.spacing,
        grid: common.grid,
        generator: common.generator,
        out: common.out,
        seed: common.seed,
    };
    RunConfig::resolve(file, flags)
}

/// Ok(true) when every check passed.
fn dispatch(cfg: &RunConfig, command: Command) -> phasekit::Result<bool> {
    match command {
        Command::Density { state } => commands::density(cfg, &state).map(|_| true),
        Command::Marginals { state } => commands::marginals_cmd(cfg, &state).map(|_| true),
        Command::Expect { state, symbols } => commands::expect(cfg, &state, &symbols).map(|_| true),
        Command::Effects { tiles, state } => commands::effects(cfg, tiles, state.as_deref()).map(|_| true),
        Command::Reconstruct { input, truth, threshold } => {
            commands::reconstruct(cfg, &input, truth.as_deref(), threshold).map(|_| true)
        }
        Command::Evolve { state, times, liouville } => commands::evolve(cfg, &state, &times, liouville).map(|_| true),
        Command::Bargmann { state } => commands::bargmann(cfg, &state).map(|_| true),
        Command::Check { suite } => {
            let suite: check::Suite = suite.parse()?;
            let report = check::run(cfg, suite)?;
            let mut run = RunDir::create(cfg, "check", serde_json::json!({ "suite": suite }))?;
            run.write_json("report.json", &report)?;
            run.finish()?;
            if report.pass {
                eprintln!("all {} checks passed ({} skipped)", report.checks.len(), report.skipped.len());
            } else {
                eprintln!("failing checks: {}", report.failing.join(", "));
            }
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let cfg = match resolve(cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match dispatch(&cfg, cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
