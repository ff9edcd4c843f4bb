//! Energy of the bubble family as ε → 0.

use crate::energy::lyapunov;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::initdata::{bubble_pair, BubbleSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleEnergyRow {
    pub epsilon: f64,
    pub log_inv_eps: f64,
    /// F(U_ε, V_ε); NaN when the grid does not resolve ε.
    pub f: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleEnergyReport {
    pub slope: f64,
    pub intercept: f64,
    /// 2 (4π/χ - M)
    pub target: f64,
    /// (slope - target) / |target|, or slope - target when the target is 0.
    pub deviation: f64,
    pub rows: Vec<BubbleEnergyRow>,
}

impl BubbleEnergyReport {
    pub fn within(&self, rel_tol: f64, abs_tol: f64) -> bool {
        if self.target == 0.0 {
            self.deviation.abs() <= abs_tol
        } else {
            self.deviation.abs() <= rel_tol
        }
    }
}

/// Ordinary least squares y = a x + b.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits F(U_ε, V_ε) against ln(1/ε). Values of ε the grid cannot resolve are
/// listed but left out of the fit.
pub fn bubble_energy_experiment(
    chi: f64,
    mass: f64,
    eps_list: &[f64],
    x0: (f64, f64),
    grid: &Grid,
) -> Result<BubbleEnergyReport> {
    let mut rows = Vec::with_capacity(eps_list.len());
    for &epsilon in eps_list {
        let spec = BubbleSpec {
            epsilon,
            x0,
            mass,
            chi,
        };
        spec.validate(grid)?;
        let resolved = spec.resolved_by(grid);
        let f = if resolved {
            let b = bubble_pair(&spec, grid)?;
            lyapunov(&b.u, &b.v, chi)?.total
        } else {
            log::warn!("epsilon = {epsilon} is below the mesh size; left out of the fit");
            f64::NAN
        };
        rows.push(BubbleEnergyRow {
            epsilon,
            log_inv_eps: (1.0 / epsilon).ln(),
            f,
            resolved,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.resolved)
        .map(|r| (r.log_inv_eps, r.f))
        .unzip();
    let distinct = {
        let mut xs = x.clone();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    if distinct < 3 {
        return Err(Error::Config(format!(
            "need at least 3 distinct resolved epsilon values, have {distinct} (h = {})",
            grid.hx().max(grid.hy())
        )));
    }
    let (slope, intercept) = fit_line(&x, &y);
    let target = 2.0 * (4.0 * std::f64::consts::PI / chi - mass);
    let deviation = if target == 0.0 {
        slope
    } else {
        (slope - target) / target.abs()
    };
    Ok(BubbleEnergyReport {
        slope,
        intercept,
        target,
        deviation,
        rows,
    })
}
