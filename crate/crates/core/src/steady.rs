//! Stationary problem
//!
//! ```text
//! -ΔV + V = M e^{χV} / ∫e^{χV} - M/|Ω|,   ∫V = 0,   U = M e^{χV} / ∫e^{χV}
//! ```
//!
//! solved by damped Picard iteration. Non-convergence is returned as data.

use serde::{Deserialize, Serialize};

use crate::energy::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::fields::{integrate, l2_norm, log_exp_integral};
use crate::grid::{laplacian_neumann, solve_helmholtz, Field, Grid};
use crate::initdata::{bubble_pair, BubbleSpec};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyResult {
    /// Mean-zero signal deviation V.
    pub v: Field,
    /// Density U with mass M.
    pub u: Field,
    /// l2 norm of -ΔV + V - rhs(V).
    pub residual: f64,
    pub iterations: usize,
    /// Energy of (U, V + M/|Ω|), the stationary pair of the evolution problem.
    pub energy: EnergyReport,
    pub converged: bool,
}

fn recenter(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    for _ in 0..2 {
        let m = out.iter().sum::<f64>() / out.len() as f64;
        out.iter_mut().for_each(|x| *x -= m);
    }
    out
}

/// U = M e^{χV} / ∫ e^{χV}.
pub fn tilt(v: &Field, mass: f64, chi: f64) -> Field {
    let log_z = log_exp_integral(v, chi);
    let mut u = v.map(|x| mass * (chi * x - log_z).exp());
    let total = integrate(&u);
    if total > 0.0 {
        let s = mass / total;
        u = u.map(|x| x * s);
    }
    u
}

fn steady_rhs(v: &Field, mass: f64, chi: f64) -> Result<(Field, Field)> {
    let u = tilt(v, mass, chi);
    let ubar = mass / v.grid().area();
    let rhs = u.map(|x| x - ubar);
    // zero mean analytically; anything larger means the quadrature is off
    let drift = integrate(&rhs).abs() / mass;
    if drift > 1e-12 {
        return Err(Error::Domain(format!(
            "steady right-hand side has nonzero mean ({drift:e} relative)"
        )));
    }
    Ok((u, rhs))
}

/// -ΔV + V - rhs(V), returned with U.
fn steady_defect(v: &Field, mass: f64, chi: f64) -> Result<(Field, Field)> {
    let (u, rhs) = steady_rhs(v, mass, chi)?;
    let lv = laplacian_neumann(v)?;
    let vals: Vec<f64> = lv
        .values()
        .iter()
        .zip(v.values())
        .zip(rhs.values())
        .map(|((l, x), r)| -l + x - r)
        .collect();
    Ok((u, Field::new(*v.grid(), vals)?))
}

pub fn steady_solve(
    mass: f64,
    chi: f64,
    grid: &Grid,
    opts: &SteadyOptions,
    v_init: Option<&Field>,
) -> Result<SteadyResult> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::Domain(format!("chi must be positive, got {chi}")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Config(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let mut v = match v_init {
        Some(f) => {
            if f.grid() != grid {
                return Err(Error::GridMismatch("initial V is on a different grid".into()));
            }
            Field::new(*grid, recenter(f.values()))?
        }
        None => Field::zeros(*grid),
    };

    let mut best: Option<(f64, Field, Field)> = None;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let (u, defect) = steady_defect(&v, mass, chi)?;
        let residual = l2_norm(&defect);
        if !residual.is_finite() {
            break;
        }
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, v.clone(), u));
        }
        if residual <= opts.tol {
            converged = true;
            break;
        }
        // Picard update written as a correction: V + θ (I - Δ)⁻¹ (rhs - (I - Δ)V)
        let correction = match solve_helmholtz(1.0, &defect.map(|x| -x), 1e-12) {
            Ok(c) => c,
            Err(e) if e.is_solver_failure() => break,
            Err(e) => return Err(e),
        };
        let next: Vec<f64> = v
            .values()
            .iter()
            .zip(correction.values())
            .map(|(a, c)| a + opts.damping * c)
            .collect();
        v = Field::new(*grid, recenter(&next))?;
    }

    let (residual, v, u) = best.ok_or_else(|| Error::Domain("steady iteration produced no finite iterate".into()))?;
    let ubar = mass / grid.area();
    let v_full = v.map(|x| x + ubar);
    let params = ModelParams::exponential(chi)?;
    let energy = energy_report(&u, &v_full, &params)?;
    Ok(SteadyResult {
        v,
        u,
        residual,
        iterations,
        energy,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SteadySeed {
    Constant,
    Bubble { epsilon: f64, x0: (f64, f64) },
}

impl SteadySeed {
    pub fn label(&self) -> String {
        match self {
            SteadySeed::Constant => "constant".into(),
            SteadySeed::Bubble { epsilon, .. } => format!("bubble(eps={epsilon})"),
        }
    }

    /// Initial V for this seed at the given mass.
    pub fn initial_v(&self, mass: f64, chi: f64, grid: &Grid) -> Result<Option<Field>> {
        match *self {
            SteadySeed::Constant => Ok(None),
            SteadySeed::Bubble { epsilon, x0 } => {
                let b = bubble_pair(
                    &BubbleSpec {
                        epsilon,
                        x0,
                        mass,
                        chi,
                    },
                    grid,
                )?;
                Ok(Some(b.v))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub mass: f64,
    pub seed: String,
    pub residual: f64,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn steady_energy_scan(
    masses: &[f64],
    chi: f64,
    grid: &Grid,
    seeds: &[SteadySeed],
    opts: &SteadyOptions,
) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(masses.len() * seeds.len());
    for &mass in masses {
        for seed in seeds {
            let init = seed.initial_v(mass, chi, grid)?;
            let r = steady_solve(mass, chi, grid, opts, init.as_ref())?;
            if !r.converged {
                log::warn!(
                    "steady solve at M = {mass} from {} stopped at residual {:e}",
                    seed.label(),
                    r.residual
                );
            }
            rows.push(ScanRow {
                mass,
                seed: seed.label(),
                residual: r.residual,
                f: r.energy.f.total,
                iterations: r.iterations,
                converged: r.converged,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::constant_state_energy;

    #[test]
    fn zero_seed_is_immediately_steady() {
        let g = Grid::unit_square(16).unwrap();
        let r = steady_solve(3.0, 1.0, &g, &SteadyOptions::default(), None).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.u.values().iter().all(|&x| (x - 3.0).abs() < 1e-13));
        let closed = constant_state_energy(3.0, 1.0, 1.0);
        assert!((r.energy.f.total - closed).abs() < 1e-10);
    }

    #[test]
    fn small_mass_returns_to_constant() {
        let g = Grid::unit_square(24).unwrap();
        let seed = SteadySeed::Bubble {
            epsilon: 0.2,
            x0: (0.0, 0.5),
        };
        let init = seed.initial_v(1.0, 1.0, &g).unwrap();
        let r = steady_solve(1.0, 1.0, &g, &SteadyOptions::default(), init.as_ref()).unwrap();
        assert!(r.converged, "residual {}", r.residual);
        assert!(r.residual < 1e-10);
        assert!(r.v.values().iter().all(|x| x.abs() < 1e-9));
        assert!(integrate(&r.v).abs() < 1e-12);
        assert!((integrate(&r.u) - 1.0).abs() < 1e-12);
        assert!(r.energy.e.fisher < 1e-18);
    }

    #[test]
    fn nonconvergence_is_data() {
        let g = Grid::unit_square(8).unwrap();
        let seed = SteadySeed::Bubble {
            epsilon: 0.2,
            x0: (0.0, 0.5),
        };
        let init = seed.initial_v(1.0, 1.0, &g).unwrap();
        let opts = SteadyOptions {
            max_iter: 2,
            ..SteadyOptions::default()
        };
        let r = steady_solve(1.0, 1.0, &g, &opts, init.as_ref()).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.residual > opts.tol);
    }

    #[test]
    fn scan_single_row() {
        let g = Grid::unit_square(8).unwrap();
        let rows =
            steady_energy_scan(&[1.0], 1.0, &g, &[SteadySeed::Constant], &SteadyOptions::default())
                .unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].converged);
        assert!((rows[0].f - constant_state_energy(1.0, 1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let g = Grid::unit_square(4).unwrap();
        let o = SteadyOptions::default();
        assert!(steady_solve(0.0, 1.0, &g, &o, None).is_err());
        assert!(steady_solve(1.0, -1.0, &g, &o, None).is_err());
        let bad = SteadyOptions {
            damping: 0.0,
            ..o
        };
        assert!(steady_solve(1.0, 1.0, &g, &bad, None).is_err());
    }
}
