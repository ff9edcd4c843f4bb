//! Experiment harness: configuration, the headline experiments and the CLI.

pub mod bisection;
pub mod bubble;
pub mod cli;
pub mod config;
pub mod dissipation;
pub mod harness;

pub use bisection::{bisect_mass, critical_mass_bisection, BisectionReport, Trial, TrialRole};
pub use bubble::{bubble_energy_experiment, fit_line, BubbleEnergyReport, BubbleEnergyRow};
pub use cli::cli_main;
pub use config::{critical_mass, ExperimentConfig, ExperimentKind, InitialSpec};
pub use dissipation::{dissipation_check_experiment, max_energy_increase, DissipationReport, LadderRung};
pub use harness::{execute, CheckResult, ExecOptions, ExperimentOutcome};
