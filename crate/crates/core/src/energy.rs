//! Lyapunov functional and its dissipation rate.
//!
//! F(u, v) = ∫ u ln u + (χ/2) ∫ (v² + |∇v|²) - χ ∫ u v
//! E(u, v) = χ ∫ v_t² + ∫ e^{-χv} u |∇(ln u - χ v)|²
//!
//! Along exact solutions dF/dt + E = 0. The gradient term uses the same
//! face differences as the discrete Laplacian, so F is the energy the
//! semi-implicit scheme actually dissipates.

use crate::error::{Error, Result};
use crate::fields::grad_sq_integral;
use crate::grid::{laplacian_neumann, Field};
use crate::model::{Motility, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lyapunov {
    pub total: f64,
    /// ∫ u ln u
    pub entropy: f64,
    /// (χ/2) ∫ (v² + |∇v|²)
    pub quadratic: f64,
    /// -χ ∫ u v
    pub cross: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dissipation {
    pub total: f64,
    /// χ ∫ v_t²
    pub vt: f64,
    /// ∫ γ u |∇(ln u - χ v)|²
    pub fisher: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub f: Lyapunov,
    pub e: Dissipation,
}

/// u ln u, continuously extended by 0 at u = 0.
fn entropy_density(u: f64) -> f64 {
    if u > 0.0 {
        u * u.ln()
    } else {
        0.0
    }
}

pub fn lyapunov(u: &Field, v: &Field, chi: f64) -> Result<Lyapunov> {
    u.same_grid(v)?;
    let area = u.grid().cell_area();
    let entropy = u.values().iter().map(|&x| entropy_density(x)).sum::<f64>() * area;
    let v_sq = v.values().iter().map(|x| x * x).sum::<f64>() * area;
    let quadratic = 0.5 * chi * (v_sq + grad_sq_integral(v));
    let uv = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * area;
    let cross = -chi * uv;
    Ok(Lyapunov {
        total: entropy + quadratic + cross,
        entropy,
        quadratic,
        cross,
    })
}

/// Right-hand side of the signal equation, Δv + u - v.
pub fn signal_rate(u: &Field, v: &Field) -> Result<Field> {
    u.same_grid(v)?;
    let lv = laplacian_neumann(v)?;
    Ok(Field::from_vec_unchecked(
        *u.grid(),
        lv.values()
            .iter()
            .zip(u.values())
            .zip(v.values())
            .map(|((l, a), b)| l + a - b)
            .collect(),
    ))
}

pub fn dissipation(u: &Field, v: &Field, params: &ModelParams) -> Result<Dissipation> {
    u.same_grid(v)?;
    if let Some(k) = u.values().iter().position(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::Domain(format!(
            "dissipation needs u > 0, got {} at cell {k}",
            u.values()[k]
        )));
    }
    let chi = params.chi();
    let grid = *u.grid();
    let area = grid.cell_area();

    let vt = signal_rate(u, v)?;
    let e_vt = chi * vt.values().iter().map(|x| x * x).sum::<f64>() * area;

    // potential q = ln(γ u), which is ln u - χ v for exponential motility
    let mut w = Vec::with_capacity(u.len());
    let mut q = Vec::with_capacity(u.len());
    for (&uk, &vk) in u.values().iter().zip(v.values()) {
        let (gamma, ln_gamma) = match params.motility() {
            Motility::Exponential => ((-chi * vk).exp(), -chi * vk),
            Motility::Algebraic { .. } => {
                let g = params.gamma(vk).ok_or_else(|| {
                    Error::Domain(format!("algebraic motility needs v > 0, got {vk}"))
                })?;
                (g, g.ln())
            }
        };
        w.push(gamma * uk);
        q.push(uk.ln() + ln_gamma);
    }

    let (nx, ny) = (grid.nx(), grid.ny());
    let cx = 1.0 / (grid.hx() * grid.hx());
    let cy = 1.0 / (grid.hy() * grid.hy());
    let mut fisher = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                let d = q[k + 1] - q[k];
                fisher += 0.5 * (w[k] + w[k + 1]) * d * d * cx;
            }
            if j + 1 < ny {
                let d = q[k + nx] - q[k];
                fisher += 0.5 * (w[k] + w[k + nx]) * d * d * cy;
            }
        }
    }
    fisher *= area;

    Ok(Dissipation {
        total: e_vt + fisher,
        vt: e_vt,
        fisher,
    })
}

pub fn energy_report(u: &Field, v: &Field, params: &ModelParams) -> Result<EnergyReport> {
    Ok(EnergyReport {
        f: lyapunov(u, v, params.chi())?,
        e: dissipation(u, v, params)?,
    })
}

/// One sample of the energy time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub f: f64,
    pub e: f64,
}

/// |F(t₁) - F(t₀) + ∫E dt| / (|F(t₀)| + 1) over one interval, trapezoid in time.
pub fn interval_residual(a: &EnergySample, b: &EnergySample) -> f64 {
    let dissipated = 0.5 * (a.e + b.e) * (b.t - a.t);
    (b.f - a.f + dissipated).abs() / (a.f.abs() + 1.0)
}

/// Largest per-interval defect of the identity dF/dt + E = 0.
pub fn energy_identity_residual(series: &[EnergySample]) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: series.len(),
        });
    }
    Ok(series
        .windows(2)
        .map(|w| interval_residual(&w[0], &w[1]))
        .fold(0.0, f64::max))
}

/// F on the constant pair (c, c) with c = m / |Ω|.
pub fn constant_state_energy(mass: f64, area: f64, chi: f64) -> f64 {
    let c = mass / area;
    area * (entropy_density(c) + 0.5 * chi * c * c - chi * c * c)
}
