//! Jacobi-preconditioned conjugate gradients for the symmetric operators
//! produced by the grid module.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A`, given as a
/// matrix-free `apply`, starting from `x`. Stops when the true residual
/// satisfies `|b - A x|_2 <= tol |b|_2`.
///
/// The recursive residual drifts from the true one, so on apparent
/// convergence the true residual is recomputed and CG is restarted from the
/// current iterate if it is still too large.
pub(crate) fn pcg<A>(
    mut apply: A,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgStats>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    debug_assert_eq!(diag.len(), n);
    debug_assert_eq!(x.len(), n);

    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = tol * b_norm;

    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    let mut iterations = 0usize;
    let mut restarts = 0usize;
    loop {
        apply(x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let true_res = norm(&r);
        if !true_res.is_finite() {
            return Err(Error::NotConverged {
                iterations,
                residual: f64::NAN,
            });
        }
        if true_res <= target {
            return Ok(CgStats {
                iterations,
                residual: true_res / b_norm,
            });
        }
        if iterations >= max_iter || restarts > 8 {
            return Err(Error::NotConverged {
                iterations,
                residual: true_res / b_norm,
            });
        }
        restarts += 1;

        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);

        while iterations < max_iter {
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            if norm(&r) <= 0.5 * target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // tridiagonal [2 -1; -1 2 -1; -1 2]
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = 2.0 * x[0] - x[1];
            y[1] = -x[0] + 2.0 * x[1] - x[2];
            y[2] = -x[1] + 2.0 * x[2];
        };
        let b = [1.0, 0.0, 1.0];
        let mut x = [0.0; 3];
        let stats = pcg(apply, &[2.0; 3], &b, &mut x, 1e-14, 100).unwrap();
        assert!(stats.residual <= 1e-14);
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = [3.0, 4.0];
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        pcg(apply, &[1.0; 2], &[0.0; 2], &mut x, 1e-10, 10).unwrap();
        assert_eq!(x, [0.0, 0.0]);
    }

    #[test]
    fn budget_exhaustion_reports_residual() {
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = (i as f64 + 1.0) * x[i];
            }
        };
        let b = vec![1.0; 50];
        let mut x = vec![0.0; 50];
        // unpreconditioned, one iteration cannot resolve 50 distinct eigenvalues
        let err = pcg(apply, &[1.0; 50], &b, &mut x, 1e-12, 1).unwrap_err();
        match err {
            Error::NotConverged { residual, .. } => assert!(residual > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
