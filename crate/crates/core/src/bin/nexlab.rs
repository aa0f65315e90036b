//! Batch CLI: `nexlab <command> --config run.toml [--seed N] [--out PATH]
//! [--format csv|json] [--members N] [--budget N]`.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
//! configuration error. `NEXLAB_THREADS` overrides the worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nexlab::lab::config::DivergenceSection;
use nexlab::lab::{run_command, Command, ExperimentConfig, OutputFormat};
use nexlab::LabError;

#[derive(Parser)]
#[command(name = "nexlab", version, about = "Batch verifications for nonexpansive mappings on hyperbolic spaces")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the hyperbolicity identities of the configured models.
    VerifyAxioms(Common),
    /// Evaluate a metric between two maps.
    Metric {
        #[command(flatten)]
        common: Common,
        /// Add the s = 1 divergence rows for n = 3..=n_max.
        #[arg(long)]
        divergence_demo: bool,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
    },
    /// Build a porosity witness and verify its members.
    Witness(Common),
    /// Picard iteration with optional Rakotch audit.
    Fixpoint(Common),
    /// Local Lipschitz profile of an isometry-patched map.
    LipschitzProfile(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    members: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
}

fn threads(cfg: &ExperimentConfig) -> Result<Option<usize>, LabError> {
    match std::env::var("NEXLAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(LabError::Config(format!("NEXLAB_THREADS={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(cfg.threads),
    }
}

fn execute(cli: Cli) -> Result<bool, LabError> {
    let (cmd, common, demo) = match cli.command {
        Cmd::VerifyAxioms(c) => (Command::VerifyAxioms, c, None),
        Cmd::Metric { common, divergence_demo, n_max } => (Command::Metric, common, divergence_demo.then_some(n_max)),
        Cmd::Witness(c) => (Command::Witness, c, None),
        Cmd::Fixpoint(c) => (Command::Fixpoint, c, None),
        Cmd::LipschitzProfile(c) => (Command::LipschitzProfile, c, None),
    };
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.members {
        cfg.members = m;
    }
    if let Some(b) = common.budget {
        if b == 0 {
            return Err(LabError::Config("budget must be at least 1".into()));
        }
        cfg.budget = b;
    }
    if let Some(f) = common.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(n_max) = demo {
        cfg.divergence = Some(DivergenceSection { n_max });
    }
    let out = common.out.or_else(|| cfg.out.clone().map(PathBuf::from));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads(&cfg)? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| LabError::Config(format!("cannot start worker threads: {e}")))?;
    let report = pool.install(|| run_command(cmd, &cfg))?;
    let body = match cfg.format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Json => report.to_json(),
    };
    match out {
        Some(p) => std::fs::write(&p, body).map_err(|e| LabError::Config(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{body}"),
    }
    let s = report.summary;
    eprintln!("{}: {} checks, {} passed, {} failed", report.command, s.checks, s.passed, s.failed);
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
