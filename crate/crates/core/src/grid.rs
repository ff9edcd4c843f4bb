//! Cell-centered rectangular grid with homogeneous-Neumann operators.
//!
//! Cells are stored row-major: cell `(i, j)` with `i` along x and `j` along
//! y lives at index `j * nx + i`. Every discrete operator is written in flux
//! form over cell faces; boundary faces carry zero flux, so each face
//! contribution appears twice with opposite signs and integrals of the
//! operators telescope to zero.

use crate::error::{Error, Result};
use crate::linsolve::pcg;

/// Default relative-residual tolerance for the linear solves.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per axis, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// |Ω| = lx * ly.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    /// Cell centers in storage order.
    pub fn centers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| self.center(i, j)))
    }

    /// Whether `(x, y)` lies on the closed boundary of the rectangle,
    /// up to a relative tolerance on the side lengths.
    pub fn on_boundary(&self, x: f64, y: f64) -> bool {
        let tx = 1e-12 * self.lx;
        let ty = 1e-12 * self.ly;
        let inside = x >= -tx && x <= self.lx + tx && y >= -ty && y <= self.ly + ty;
        let on_edge = x.abs() <= tx
            || (x - self.lx).abs() <= tx
            || y.abs() <= ty
            || (y - self.ly).abs() <= ty;
        inside && on_edge
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} on {}x{} vs {}x{} on {}x{}",
                self.nx, self.ny, self.lx, self.ly, other.nx, other.ny, other.lx, other.ly
            )))
        }
    }

    /// Applies the Neumann 5-point Laplacian to raw cell values.
    pub(crate) fn apply_laplacian(&self, f: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let cx = 1.0 / (self.hx * self.hx);
        let cy = 1.0 / (self.hy * self.hy);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let fk = f[k];
                let mut acc = 0.0;
                if i > 0 {
                    acc += cx * (f[k - 1] - fk);
                }
                if i + 1 < nx {
                    acc += cx * (f[k + 1] - fk);
                }
                if j > 0 {
                    acc += cy * (f[k - nx] - fk);
                }
                if j + 1 < ny {
                    acc += cy * (f[k + nx] - fk);
                }
                out[k] = acc;
            }
        }
    }

    /// Diagonal of `-L`: the number of interior faces weighted by 1/h².
    pub(crate) fn neg_laplacian_diag(&self) -> Vec<f64> {
        let cx = 1.0 / (self.hx * self.hx);
        let cy = 1.0 / (self.hy * self.hy);
        let mut d = vec![0.0; self.len()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let faces_x = (i > 0) as u8 + (i + 1 < self.nx) as u8;
                let faces_y = (j > 0) as u8 + (j + 1 < self.ny) as u8;
                d[self.index(i, j)] = faces_x as f64 * cx + faces_y as f64 * cy;
            }
        }
        d
    }

    /// Generous iteration budget for CG on this grid.
    pub(crate) fn cg_budget(&self) -> usize {
        4 * self.len() + 200
    }
}

/// Rejects nonpositive sizes and fewer than two cells per axis.
pub fn build_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
    Grid::new(nx, ny, lx, ly)
}

/// Scalar values over the cells of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    /// Wraps raw values; the length must match the grid and every value must be finite.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.nx,
                grid.ny,
                values.len()
            )));
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_vec_unchecked(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = grid.centers().map(|(x, y)| f(x, y)).collect();
        Self::from_vec_unchecked(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// NaN or infinite entries are reported as a fault with the offending cell.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(index) => Err(Error::NonFinite {
                index,
                value: self.values[index],
            }),
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Discrete Neumann Laplacian in flux form.
pub fn laplacian_neumann(f: &Field) -> Result<Field> {
    f.check_finite()?;
    let mut out = vec![0.0; f.len()];
    f.grid.apply_laplacian(&f.values, &mut out);
    Ok(Field::from_vec_unchecked(f.grid, out))
}

/// Laplacian of the cellwise product `gamma * u`, in flux form.
pub fn weighted_laplacian(gamma: &Field, u: &Field) -> Result<Field> {
    let w = gamma.zip_map(u, |g, v| g * v)?;
    laplacian_neumann(&w)
}

/// Solves `(a I - L) x = rhs`.
///
/// For `a = 0` the right-hand side must integrate to zero (within `tol`
/// relative to its L1 mass); the zero-mean solution is returned.
pub fn solve_helmholtz(a: f64, rhs: &Field, tol: f64) -> Result<Field> {
    solve_helmholtz_from(a, rhs, None, tol)
}

/// [`solve_helmholtz`] with an optional initial guess.
pub fn solve_helmholtz_from(
    a: f64,
    rhs: &Field,
    guess: Option<&Field>,
    tol: f64,
) -> Result<Field> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!(
            "Helmholtz shift must be finite and nonnegative, got {a}"
        )));
    }
    rhs.check_finite()?;
    let grid = rhs.grid;
    let n = grid.len();
    let mut b = rhs.values.clone();

    if a == 0.0 {
        let sum: f64 = b.iter().sum();
        let abs_sum: f64 = b.iter().map(|v| v.abs()).sum();
        // summation rounding alone can leave up to ~n eps max|b|
        let max_abs = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let allowed = tol * abs_sum + n as f64 * f64::EPSILON * max_abs;
        if sum.abs() > allowed {
            return Err(Error::IncompatibleRhs {
                integral: sum * grid.cell_area(),
            });
        }
        let mean = sum / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
    }

    let mut diag = grid.neg_laplacian_diag();
    diag.iter_mut().for_each(|d| *d += a);
    let mut x = match guess {
        Some(g) => {
            g.same_grid(rhs)?;
            g.values.clone()
        }
        None => vec![0.0; n],
    };
    let apply = |p: &[f64], out: &mut [f64]| {
        grid.apply_laplacian(p, out);
        for (o, &pi) in out.iter_mut().zip(p) {
            *o = a * pi - *o;
        }
    };
    let stats = pcg(apply, &diag, &b, &mut x, tol, grid.cg_budget())?;
    log::trace!(
        "helmholtz a={a}: {} iterations, residual {:e}",
        stats.iterations,
        stats.residual
    );

    if a == 0.0 {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
    }
    Field::new(grid, x)
}

/// Solves `a x - L(gamma * x) = rhs` for `a > 0`, `gamma > 0`.
///
/// With `y = gamma * x` the system becomes `(a / gamma) y - L y = rhs`,
/// which is symmetric positive definite and is solved by CG. The matrix of
/// the original system has nonpositive off-diagonals and column sums `a`, so
/// `a * integrate(x) = integrate(rhs)`; the small defect left by the
/// iterative solve is removed by a positive rescaling of `x`.
pub fn solve_weighted_implicit(a: f64, gamma: &Field, rhs: &Field, tol: f64) -> Result<Field> {
    solve_weighted_implicit_from(a, gamma, rhs, None, tol)
}

pub fn solve_weighted_implicit_from(
    a: f64,
    gamma: &Field,
    rhs: &Field,
    guess: Option<&Field>,
    tol: f64,
) -> Result<Field> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!(
            "implicit shift must be positive and finite, got {a}"
        )));
    }
    gamma.same_grid(rhs)?;
    gamma.check_finite()?;
    rhs.check_finite()?;
    if let Some(k) = gamma.values.iter().position(|&g| g.is_nan() || g <= 0.0) {
        return Err(Error::Domain(format!(
            "motility must be positive, got {} at cell {k}",
            gamma.values[k]
        )));
    }
    let grid = rhs.grid;
    let inv_gamma_a: Vec<f64> = gamma.values.iter().map(|&g| a / g).collect();
    let mut diag = grid.neg_laplacian_diag();
    for (d, s) in diag.iter_mut().zip(&inv_gamma_a) {
        *d += s;
    }
    let mut y: Vec<f64> = match guess {
        Some(g) => {
            g.same_grid(rhs)?;
            g.values
                .iter()
                .zip(&gamma.values)
                .map(|(x, g)| x * g)
                .collect()
        }
        None => rhs
            .values
            .iter()
            .zip(&inv_gamma_a)
            .map(|(r, s)| r / s)
            .collect(),
    };
    let apply = |p: &[f64], out: &mut [f64]| {
        grid.apply_laplacian(p, out);
        for ((o, &pi), &s) in out.iter_mut().zip(p).zip(&inv_gamma_a) {
            *o = s * pi - *o;
        }
    };
    let stats = pcg(apply, &diag, &rhs.values, &mut y, tol, grid.cg_budget())?;
    log::trace!(
        "weighted implicit a={a}: {} iterations, residual {:e}",
        stats.iterations,
        stats.residual
    );

    let mut x: Vec<f64> = y.iter().zip(&gamma.values).map(|(y, g)| y / g).collect();
    let target: f64 = rhs.values.iter().sum::<f64>() / a;
    let current: f64 = x.iter().sum();
    if target > 0.0 && current > 0.0 {
        let scale = target / current;
        x.iter_mut().for_each(|v| *v *= scale);
    }
    Field::new(grid, x)
}
