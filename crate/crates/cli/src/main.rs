use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bvqpco_cli::config::{ExperimentConfig, Mode};
use bvqpco_cli::plots::emit_plots;
use bvqpco_cli::{exit_code_for, run_experiment, ValidationError, EXIT_ACCEPTANCE, EXIT_OK};
use bvqpco_core::quantum_kernel::Shots;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bvqpco",
    version,
    about = "Bi-level variational quantum PDE-constrained design optimization"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run the mode named in the config (default: full design loop).
    Run(Common),
    /// Classical grid search over the design box.
    Baseline(Common),
    /// VQLS convergence study on fixed designs.
    Vqls(Common),
    /// Check condition-number and Euler-error bounds.
    Verify(Common),
    /// Write charts and contour grids from the artifacts in `--out`.
    Plot(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults to the reference study.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Shots per expectation: a positive integer or `exact`.
    #[arg(long)]
    shots: Option<String>,
}

fn load(common: &Common, mode: Option<Mode>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::reference(mode.unwrap_or(Mode::Bvqpco), common.seed.unwrap_or(0)),
    };
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &common.shots {
        let shots: Shots = s
            .parse()
            .map_err(|e: bvqpco_core::Error| ValidationError(e.to_string()))?;
        cfg.set_shots(shots);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<i32> {
    let (common, mode) = match &cli.verb {
        Verb::Run(c) => (c, None),
        Verb::Baseline(c) => (c, Some(Mode::ClassicalBaseline)),
        Verb::Vqls(c) => (c, Some(Mode::VqlsOnly)),
        Verb::Verify(c) => (c, Some(Mode::VerifyBounds)),
        Verb::Plot(c) => {
            let cfg = load(c, None)?;
            for path in emit_plots(&cfg, &c.out)? {
                println!("wrote {}", path.display());
            }
            return Ok(EXIT_OK);
        }
    };
    let cfg = load(common, mode)?;
    let report = run_experiment(&cfg, &common.out)?;
    for c in &report.checks {
        println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    println!("artifacts in {}", common.out.display());
    Ok(if report.passed() { EXIT_OK } else { EXIT_ACCEPTANCE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
