//! `ksm` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::experiments::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::harness::{execute, ExecOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ksm", version, about = "Keller-Segel motility simulator and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Compare results against the [check] section and exit 3 on mismatch.
    #[arg(long)]
    check: bool,
    /// Write outputs here instead of experiment.output_dir.
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Record wall-clock time in the manifest.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one initial state.
    Run(ExperimentArgs),
    /// Solve the stationary problem over a mass scan.
    Steady(ExperimentArgs),
    /// Fit the bubble energy against ln(1/eps).
    BubbleEnergy(ExperimentArgs),
    /// Bisect the initial mass between bounded and blow-up runs.
    CriticalMass(ExperimentArgs),
    /// Energy identity and dissipation inequality over a time-step ladder.
    DissipationCheck(ExperimentArgs),
    /// Parse and validate a configuration without running it.
    ValidateConfig {
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_CONFIG
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let c = ExperimentConfig::load(path)?;
    c.validate()?;
    Ok(c)
}

fn base_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn run_experiment(kind: ExperimentKind, args: &ExperimentArgs) -> i32 {
    let config = match load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if config.kind() != kind {
        eprintln!(
            "error: {} describes a {} experiment, not {kind}",
            args.config.display(),
            config.kind()
        );
        return EXIT_CONFIG;
    }
    let opts = ExecOptions {
        output_dir: args.output_dir.clone(),
        check: args.check,
        timing: args.timing,
    };
    match execute(&config, &base_dir(&args.config), &opts) {
        Ok(out) => {
            println!(
                "{}: {} (outputs in {})",
                kind,
                out.manifest.outcome,
                out.output_dir.display()
            );
            for (k, v) in &out.manifest.summary {
                println!("  {k} = {v}");
            }
            if out.solver_failure {
                eprintln!("error: linear solver failed; partial outputs were written");
                return EXIT_SOLVER;
            }
            match out.check {
                Some(c) if !c.passed => {
                    eprintln!("check failed: {}", c.detail);
                    EXIT_CHECK
                }
                Some(c) => {
                    println!("check passed: {}", c.detail);
                    EXIT_OK
                }
                None => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point behind the `ksm` binary. `argv` includes the program name.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Run(a) => run_experiment(ExperimentKind::Run, a),
        Command::Steady(a) => run_experiment(ExperimentKind::Steady, a),
        Command::BubbleEnergy(a) => run_experiment(ExperimentKind::BubbleEnergy, a),
        Command::CriticalMass(a) => run_experiment(ExperimentKind::CriticalMass, a),
        Command::DissipationCheck(a) => run_experiment(ExperimentKind::DissipationCheck, a),
        Command::ValidateConfig { config } => match load(config) {
            Ok(c) => {
                println!("{}: valid {} configuration", config.display(), c.kind());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
    }
}
