//! Initial-data generators.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io::read_snapshot;

/// Boundary-concentrated bubble: V_ε built from ln(ε² / (ε² + π|x - x₀|²)²),
/// centered to mean zero, and U_ε = M e^{χV_ε} / ∫ e^{χV_ε}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleSpec {
    pub epsilon: f64,
    pub x0: (f64, f64),
    pub mass: f64,
    pub chi: f64,
}

impl BubbleSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Domain(format!(
                "bubble epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::Domain(format!(
                "bubble mass must be positive, got {}",
                self.mass
            )));
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::Domain(format!(
                "bubble chi must be positive, got {}",
                self.chi
            )));
        }
        if !grid.on_boundary(self.x0.0, self.x0.1) {
            return Err(Error::Domain(format!(
                "bubble center ({}, {}) is not on the boundary of [0, {}] x [0, {}]",
                self.x0.0,
                self.x0.1,
                grid.lx(),
                grid.ly()
            )));
        }
        Ok(())
    }

    /// The grid resolves the bubble when both cell sizes are at most ε.
    pub fn resolved_by(&self, grid: &Grid) -> bool {
        grid.hx() <= self.epsilon && grid.hy() <= self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubblePair {
    pub u: Field,
    pub v: Field,
    pub resolved: bool,
}

fn subtract_mean(values: &mut [f64]) {
    // a second pass removes the rounding left by the first
    for _ in 0..2 {
        let m = values.iter().sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|x| *x -= m);
    }
}

pub fn bubble_pair(spec: &BubbleSpec, grid: &Grid) -> Result<BubblePair> {
    spec.validate(grid)?;
    let resolved = spec.resolved_by(grid);
    if !resolved {
        log::warn!(
            "bubble epsilon {} is below the grid resolution ({} x {})",
            spec.epsilon,
            grid.hx(),
            grid.hy()
        );
    }
    let eps2 = spec.epsilon * spec.epsilon;
    let (x0, y0) = spec.x0;
    let mut v: Vec<f64> = grid
        .centers()
        .map(|(x, y)| {
            let r2 = (x - x0).powi(2) + (y - y0).powi(2);
            (eps2.ln() - 2.0 * (eps2 + PI * r2).ln()) / spec.chi
        })
        .collect();
    subtract_mean(&mut v);

    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut u: Vec<f64> = v.iter().map(|&x| (spec.chi * (x - top)).exp()).collect();
    for _ in 0..2 {
        let total = u.iter().sum::<f64>() * grid.cell_area();
        let s = spec.mass / total;
        u.iter_mut().for_each(|x| *x *= s);
    }

    Ok(BubblePair {
        u: Field::new(*grid, u)?,
        v: Field::new(*grid, v)?,
        resolved,
    })
}

/// Shifts `v` by a constant so its minimum is zero (no-op when already nonnegative).
/// Returns the shifted field and the shift applied.
pub fn shift_nonnegative(v: &Field) -> (Field, f64) {
    let min = v.min();
    if min >= 0.0 {
        (v.clone(), 0.0)
    } else {
        let s = -min;
        (v.map(|x| (x + s).max(0.0)), s)
    }
}

fn renormalize(values: &mut [f64], grid: &Grid, mass: f64) {
    for _ in 0..2 {
        let total = values.iter().sum::<f64>() * grid.cell_area();
        if total > 0.0 {
            let s = mass / total;
            values.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// u₀ = m/|Ω| (1 + amp cos(kx π x / lx) cos(ky π y / ly)), clipped at zero and
/// renormalized to `mass`; v₀ is built the same way.
pub fn perturbed_constant(
    mass: f64,
    amp: f64,
    mode: (u32, u32),
    grid: &Grid,
) -> Result<(Field, Field)> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    if !amp.is_finite() {
        return Err(Error::Domain(format!("amplitude must be finite, got {amp}")));
    }
    let c = mass / grid.area();
    let (kx, ky) = (mode.0 as f64, mode.1 as f64);
    let (lx, ly) = (grid.lx(), grid.ly());
    let mut u: Vec<f64> = grid
        .centers()
        .map(|(x, y)| {
            let p = (kx * PI * x / lx).cos() * (ky * PI * y / ly).cos();
            (c * (1.0 + amp * p)).max(0.0)
        })
        .collect();
    renormalize(&mut u, grid, mass);
    let u = Field::new(*grid, u)?;
    let v = u.clone();
    Ok((u, v))
}

/// Constant state plus independent uniform noise of relative size `amp`,
/// drawn from a seeded ChaCha stream. u₀ is renormalized to `mass`; v₀ is
/// centered on the same constant.
pub fn random_perturbation(
    mass: f64,
    amp: f64,
    seed: u64,
    grid: &Grid,
) -> Result<(Field, Field)> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    let c = mass / grid.area();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<f64> = (0..grid.len())
        .map(|_| (c * (1.0 + amp * rng.gen_range(-1.0..=1.0))).max(0.0))
        .collect();
    renormalize(&mut u, grid, mass);
    let v: Vec<f64> = (0..grid.len())
        .map(|_| (c * (1.0 + amp * rng.gen_range(-1.0..=1.0))).max(0.0))
        .collect();
    Ok((Field::new(*grid, u)?, Field::new(*grid, v)?))
}

/// Reads `(u₀, v₀)` from two snapshot files on the same grid.
pub fn load_fields(u_path: &Path, v_path: &Path) -> Result<(Field, Field)> {
    let (u, _) = read_snapshot(u_path)?;
    let (v, _) = read_snapshot(v_path)?;
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch(format!(
            "{} and {} are on different grids",
            u_path.display(),
            v_path.display()
        )));
    }
    Ok((u, v))
}

/// Largest absolute face difference, a discrete Lipschitz bound.
pub fn max_face_difference(f: &Field) -> f64 {
    let g = f.grid();
    let v = f.values();
    let (nx, ny) = (g.nx(), g.ny());
    let mut m: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                m = m.max((v[k + 1] - v[k]).abs() / g.hx());
            }
            if j + 1 < ny {
                m = m.max((v[k + nx] - v[k]).abs() / g.hy());
            }
        }
    }
    m
}
