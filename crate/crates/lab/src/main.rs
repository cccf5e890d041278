use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use movecost_lab::checks::{run_suite, Suite};
use movecost_lab::runner::{run_experiment, summary_json, trace_csv, write_atomic};
use movecost_lab::sweep::{parse_horizons, sweep};
use movecost_lab::{ExperimentConfig, LabError};

#[derive(Parser)]
#[command(name = "movecost", version, about = "Online learning with movement costs: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace and summary.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV path; defaults to the config's outputs.trace.
        #[arg(long)]
        out_trace: Option<PathBuf>,
        /// Summary JSON path; defaults to outputs.summary, else stdout.
        #[arg(long)]
        out_summary: Option<PathBuf>,
    },
    /// Run a config at several horizons and fit the regret growth rate.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated horizons, e.g. 256,1024,4096.
        #[arg(long)]
        horizons: String,
        /// Report JSON path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized property suite.
    Check {
        /// One of oracle, lemmas, ledger, xi, grid.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Case i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply_seed_override()?;
    Ok(cfg)
}

fn emit(path: Option<&PathBuf>, bytes: &[u8]) -> Result<(), LabError> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Run {
            config,
            out_trace,
            out_summary,
        } => {
            let cfg = load(&config)?;
            let out = run_experiment(&cfg)?;
            let trace_path = out_trace.or_else(|| cfg.outputs.trace.clone());
            if let Some(p) = &trace_path {
                write_atomic(p, &trace_csv(&out.trace))?;
            }
            let summary_path = out_summary.or_else(|| cfg.outputs.summary.clone());
            emit(summary_path.as_ref(), &summary_json(&out.summary))?;
            if !out.summary.violations.is_empty() {
                return Err(LabError::Assertion(out.summary.violations.join("; ")));
            }
        }
        Command::Sweep {
            config,
            horizons,
            out,
        } => {
            let cfg = load(&config)?;
            let report = sweep(&cfg, &parse_horizons(&horizons)?)?;
            emit(out.as_ref(), &summary_json(&report))?;
            if !report.violations.is_empty() {
                return Err(LabError::Assertion(report.violations.join("; ")));
            }
        }
        Command::Check { suite, cases, seed } => {
            let suite: Suite = suite.parse()?;
            if cases == 0 {
                return Err(LabError::Config("cases must be at least 1".into()));
            }
            let report = run_suite(suite, cases, seed);
            for f in &report.failures {
                eprintln!(
                    "FAIL {suite} case {} (replay with --seed {} --cases 1): {}",
                    f.case, f.seed, f.message
                );
            }
            println!(
                "{suite}: {} of {cases} cases passed (seed {seed})",
                cases - report.failures.len()
            );
            if !report.passed() {
                return Err(LabError::Property(format!(
                    "{} failing cases",
                    report.failures.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
