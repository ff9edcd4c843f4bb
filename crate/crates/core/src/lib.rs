//! Structure-preserving finite-volume simulator for the Keller–Segel system
//! with signal-dependent motility,
//!
//! ```text
//! u_t = Δ(e^{-χv} u),   v_t = Δv + u - v   in Ω = [0, lx] x [0, ly],
//! ```
//!
//! with zero-flux boundaries, plus the diagnostics and experiment harness
//! built around it: mass conservation, the Lyapunov energy and its
//! dissipation, boundary-bubble initial data, stationary solutions, and
//! subcritical/supercritical mass experiments.

pub mod energy;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod grid;
pub mod initdata;
pub mod io;
mod linsolve;
pub mod model;
pub mod solver;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use model::{ModelParams, Motility};
pub use solver::{Outcome, RunResult, RunSettings, State, StepControl};

/// Crate version recorded in manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
