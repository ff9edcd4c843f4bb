//! Quadrature, norms and cellwise algebra on [`Field`]s.
//!
//! All integrals use the midpoint rule on cells, which is the quadrature
//! the finite-volume state already represents.

use crate::error::{Error, Result};
use crate::grid::{solve_helmholtz, Field};

/// Floor used by [`ln`] at exact zeros.
pub const LN_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// ∫|∇f|².
    pub grad_sq: f64,
    /// ∫|∇φ|² with -Δφ = f - f̄.
    pub hminus1: f64,
}

/// Midpoint quadrature: Σ f_i · cell_area.
pub fn integrate(f: &Field) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_area()
}

pub fn mean(f: &Field) -> f64 {
    integrate(f) / f.grid().area()
}

/// ∫|∇f|² from squared face differences; equals -∫ f Δf for the discrete Laplacian.
pub fn grad_sq_integral(f: &Field) -> f64 {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = f.values();
    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                let d = v[k + 1] - v[k];
                sx += d * d;
            }
            if j + 1 < ny {
                let d = v[k + nx] - v[k];
                sy += d * d;
            }
        }
    }
    let area = g.cell_area();
    (sx / (g.hx() * g.hx()) + sy / (g.hy() * g.hy())) * area
}

/// Squared H⁻¹ norm of `f - mean(f)`, via a Neumann Poisson solve.
pub fn hminus1_norm_sq(f: &Field, tol: f64) -> Result<f64> {
    // second pass removes the rounding left by the first
    let mut centered = f.clone();
    for _ in 0..2 {
        let m = centered.values().iter().sum::<f64>() / centered.len() as f64;
        centered = centered.map(|v| v - m);
    }
    if centered.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let phi = solve_helmholtz(0.0, &centered, tol)?;
    Ok(grad_sq_integral(&phi))
}

/// ln ∫ e^{a f}, evaluated with the maximum factored out.
pub fn log_exp_integral(f: &Field, a: f64) -> f64 {
    let shift = f
        .values()
        .iter()
        .map(|&v| a * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = f.values().iter().map(|&v| (a * v - shift).exp()).sum();
    shift + (s * f.grid().cell_area()).ln()
}

/// ∫ e^{a f}. Overflows to +inf only when the integral itself is not representable.
pub fn exp_integral(f: &Field, a: f64) -> f64 {
    log_exp_integral(f, a).exp()
}

pub fn l1_norm(f: &Field) -> f64 {
    f.values().iter().map(|v| v.abs()).sum::<f64>() * f.grid().cell_area()
}

pub fn l2_norm(f: &Field) -> f64 {
    (f.values().iter().map(|v| v * v).sum::<f64>() * f.grid().cell_area()).sqrt()
}

pub fn linf_norm(f: &Field) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm_report(f: &Field, tol: f64) -> Result<NormReport> {
    Ok(NormReport {
        l1: l1_norm(f),
        l2: l2_norm(f),
        linf: linf_norm(f),
        grad_sq: grad_sq_integral(f),
        hminus1: hminus1_norm_sq(f, tol)?,
    })
}

pub fn add(a: &Field, b: &Field) -> Result<Field> {
    a.zip_map(b, |x, y| x + y)
}

pub fn sub(a: &Field, b: &Field) -> Result<Field> {
    a.zip_map(b, |x, y| x - y)
}

pub fn mul(a: &Field, b: &Field) -> Result<Field> {
    a.zip_map(b, |x, y| x * y)
}

pub fn scale(a: &Field, s: f64) -> Field {
    a.map(|x| s * x)
}

pub fn exp(a: &Field) -> Field {
    a.map(f64::exp)
}

/// Cellwise natural log; zeros are floored at [`LN_FLOOR`], negatives are rejected.
pub fn ln(a: &Field) -> Result<Field> {
    if let Some(k) = a.values().iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "logarithm of negative value {} at cell {k}",
            a.values()[k]
        )));
    }
    Ok(a.map(|v| v.max(LN_FLOOR).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn integrate_constants() {
        let g = Grid::unit_square(10).unwrap();
        assert!((integrate(&Field::constant(g, 1.0)) - 1.0).abs() < 1e-15);
        let g = Grid::new(5, 7, 3.0, 2.0).unwrap();
        assert!((integrate(&Field::constant(g, 1.5)) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn grad_sq_examples() {
        let g = Grid::unit_square(8).unwrap();
        assert_eq!(grad_sq_integral(&Field::constant(g, 4.0)), 0.0);

        // ∫₀¹ π² sin²(πx) dx = π²/2
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::unit_square(n).unwrap();
            let f = Field::from_fn(g, |x, _| (PI * x).cos());
            errs.push((grad_sq_integral(&f) - PI * PI / 2.0).abs());
        }
        assert!(errs[2] < 2e-3);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);

        let f = Field::from_fn(g, |x, y| x * x + y);
        let s = grad_sq_integral(&scale(&f, 3.0));
        assert!((s - 9.0 * grad_sq_integral(&f)).abs() < 1e-12 * s);
    }

    #[test]
    fn grad_sq_matches_laplacian_pairing() {
        let g = Grid::new(9, 6, 1.5, 1.0).unwrap();
        let f = Field::from_fn(g, |x, y| (3.0 * x).sin() * y + x);
        let lf = crate::grid::laplacian_neumann(&f).unwrap();
        let pairing = -integrate(&mul(&f, &lf).unwrap());
        assert!((pairing - grad_sq_integral(&f)).abs() < 1e-10 * pairing);
    }

    #[test]
    fn hminus1_examples() {
        let g = Grid::unit_square(8).unwrap();
        assert_eq!(hminus1_norm_sq(&Field::constant(g, 2.0), 1e-12).unwrap(), 0.0);

        // φ = f/π², so ∫|∇φ|² = (π²/2)/π⁴ = 1/(2π²)
        let expect = 1.0 / (2.0 * PI * PI);
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::unit_square(n).unwrap();
            let f = Field::from_fn(g, |x, _| (PI * x).cos());
            errs.push((hminus1_norm_sq(&f, 1e-12).unwrap() - expect).abs());
        }
        assert!(errs[2] < 1e-4 * expect * 10.0);
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0);

        let g = Grid::unit_square(12).unwrap();
        let f = Field::from_fn(g, |x, y| x * y * y + (5.0 * x).cos());
        let a = hminus1_norm_sq(&f, 1e-12).unwrap();
        let b = hminus1_norm_sq(&f.map(|v| v + 5.0), 1e-12).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn exp_integral_examples() {
        let g = Grid::unit_square(4).unwrap();
        assert!((exp_integral(&Field::zeros(g), 1.0) - 1.0).abs() < 1e-15);
        assert!((exp_integral(&Field::constant(g, 1.0), 2f64.ln()) - 2.0).abs() < 1e-14);
        let f = Field::from_fn(g, |x, y| 100.0 * x - y);
        assert!((exp_integral(&f, 0.0) - 1.0).abs() < 1e-15);
        // no overflow in the intermediate sums
        let big = Field::constant(g, 700.0);
        assert!((log_exp_integral(&big, 2.0) - 1400.0).abs() < 1e-9);
    }

    #[test]
    fn ln_guards() {
        let g = Grid::unit_square(2).unwrap();
        let f = Field::new(g, vec![0.0, 1.0, std::f64::consts::E, 2.0]).unwrap();
        let l = ln(&f).unwrap();
        assert_eq!(l.values()[0], LN_FLOOR.ln());
        assert_eq!(l.values()[1], 0.0);
        assert!(ln(&Field::constant(g, -1.0)).is_err());
    }

    #[test]
    fn norms() {
        let g = Grid::unit_square(2).unwrap();
        let f = Field::new(g, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        assert_eq!(l1_norm(&f), 2.5);
        assert_eq!(linf_norm(&f), 4.0);
        assert!((l2_norm(&f) - (30.0f64 * 0.25).sqrt()).abs() < 1e-15);
        let r = norm_report(&f, 1e-12).unwrap();
        assert!(r.hminus1 > 0.0 && r.grad_sq > 0.0);
    }
}
