//! Python bindings for ksmotility.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ksmotility::energy;
use ksmotility::experiments::config::ExperimentConfig;
use ksmotility::experiments::{self, ExecOptions};
use ksmotility::fields;
use ksmotility::grid;
use ksmotility::initdata::{self, BubbleSpec};
use ksmotility::io as kio;
use ksmotility::model::Motility;
use ksmotility::solver::{self, SeriesRow};
use ksmotility::steady::{self, SteadyOptions};
use ksmotility::Error;

create_exception!(ksmotility, SolverError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_solver_failure() => SolverError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Grid", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct PyGrid(ksmotility::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (nx, ny, lx = 1.0, ly = 1.0))]
    fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> PyResult<Self> {
        ksmotility::Grid::new(nx, ny, lx, ly).map(Self).map_err(to_py)
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx()
    }
    #[getter]
    fn ny(&self) -> usize {
        self.0.ny()
    }
    #[getter]
    fn lx(&self) -> f64 {
        self.0.lx()
    }
    #[getter]
    fn ly(&self) -> f64 {
        self.0.ly()
    }
    #[getter]
    fn hx(&self) -> f64 {
        self.0.hx()
    }
    #[getter]
    fn hy(&self) -> f64 {
        self.0.hy()
    }
    #[getter]
    fn area(&self) -> f64 {
        self.0.area()
    }
    #[getter]
    fn cell_area(&self) -> f64 {
        self.0.cell_area()
    }

    /// Cell centers in row-major order.
    fn centers(&self) -> Vec<(f64, f64)> {
        self.0.centers().collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(nx={}, ny={}, lx={}, ly={})",
            self.0.nx(),
            self.0.ny(),
            self.0.lx(),
            self.0.ly()
        )
    }
}

#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyField(ksmotility::Field);

#[pymethods]
impl PyField {
    /// Values are row-major, index j * nx + i.
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        ksmotility::Field::new(grid.0, values).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, value: f64) -> Self {
        Self(ksmotility::Field::constant(grid.0, value))
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let g = self.0.grid();
        if i >= g.nx() || j >= g.ny() {
            return Err(PyValueError::new_err(format!("cell ({i}, {j}) is outside the grid")));
        }
        Ok(self.0.get(i, j))
    }

    fn integrate(&self) -> f64 {
        fields::integrate(&self.0)
    }

    fn min(&self) -> f64 {
        self.0.min()
    }

    fn max(&self) -> f64 {
        self.0.max()
    }

    fn linf(&self) -> f64 {
        fields::linf_norm(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let g = self.0.grid();
        format!("Field({}x{}, min={}, max={})", g.nx(), g.ny(), self.0.min(), self.0.max())
    }
}

#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyModelParams(ksmotility::ModelParams);

#[pymethods]
impl PyModelParams {
    /// `motility` is "exponential" (e^{-chi v}) or "algebraic" (chi / v^k).
    #[new]
    #[pyo3(signature = (chi = 1.0, motility = "exponential", k = 1.0, sigma = 0.0))]
    fn new(chi: f64, motility: &str, k: f64, sigma: f64) -> PyResult<Self> {
        let law = match motility {
            "exponential" => Motility::Exponential,
            "algebraic" => Motility::Algebraic { k },
            other => {
                return Err(PyValueError::new_err(format!("unknown motility law {other:?}")))
            }
        };
        ksmotility::ModelParams::new(chi, law, sigma)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn chi(&self) -> f64 {
        self.0.chi()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn motility(&self) -> &'static str {
        match self.0.motility() {
            Motility::Exponential => "exponential",
            Motility::Algebraic { .. } => "algebraic",
        }
    }

    fn gamma(&self, v: f64) -> Option<f64> {
        self.0.gamma(v)
    }
}

fn series_dict<'py>(py: Python<'py>, row: &SeriesRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", row.t)?;
    d.set_item("mass", row.mass)?;
    d.set_item("linf_u", row.linf_u)?;
    d.set_item("linf_v", row.linf_v)?;
    d.set_item("min_motility", row.min_motility)?;
    d.set_item("F", row.f)?;
    d.set_item("E", row.e)?;
    d.set_item("hminus1", row.hminus1)?;
    d.set_item("weighted_l2", row.weighted_l2)?;
    d.set_item("identity_residual", row.identity_residual)?;
    Ok(d)
}

#[pyclass(name = "RunResult", frozen)]
pub struct PyRunResult(solver::RunResult);

#[pymethods]
impl PyRunResult {
    /// "bounded", "blowup_suspected", "max_steps_reached" or "solver_failure".
    #[getter]
    fn outcome(&self) -> String {
        self.0.outcome.to_string()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.0.final_state.t
    }

    #[getter]
    fn u(&self) -> PyField {
        PyField(self.0.final_state.u.clone())
    }

    #[getter]
    fn v(&self) -> PyField {
        PyField(self.0.final_state.v.clone())
    }

    #[getter]
    fn series<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0.series.iter().map(|r| series_dict(py, r)).collect()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.meta.steps
    }

    #[getter]
    fn growth(&self) -> f64 {
        self.0.meta.growth()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(outcome={}, t={}, steps={}, samples={})",
            self.0.outcome,
            self.0.final_state.t,
            self.0.meta.steps,
            self.0.series.len()
        )
    }
}

#[pyfunction]
fn laplacian(f: &PyField) -> PyResult<PyField> {
    grid::laplacian_neumann(&f.0).map(PyField).map_err(to_py)
}

/// Solves (a - Laplacian) x = rhs with Neumann conditions.
#[pyfunction]
#[pyo3(signature = (a, rhs, tol = 1e-10))]
fn solve_helmholtz(a: f64, rhs: &PyField, tol: f64) -> PyResult<PyField> {
    grid::solve_helmholtz(a, &rhs.0, tol)
        .map(PyField)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (f, tol = 1e-10))]
fn hminus1_norm_sq(f: &PyField, tol: f64) -> PyResult<f64> {
    fields::hminus1_norm_sq(&f.0, tol).map_err(to_py)
}

/// Lyapunov functional split into its parts.
#[pyfunction]
fn lyapunov<'py>(py: Python<'py>, u: &PyField, v: &PyField, chi: f64) -> PyResult<Bound<'py, PyDict>> {
    let l = energy::lyapunov(&u.0, &v.0, chi).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("total", l.total)?;
    d.set_item("entropy", l.entropy)?;
    d.set_item("quadratic", l.quadratic)?;
    d.set_item("cross", l.cross)?;
    Ok(d)
}

#[pyfunction]
fn dissipation<'py>(
    py: Python<'py>,
    u: &PyField,
    v: &PyField,
    params: &PyModelParams,
) -> PyResult<Bound<'py, PyDict>> {
    let e = energy::dissipation(&u.0, &v.0, &params.0).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("total", e.total)?;
    d.set_item("vt", e.vt)?;
    d.set_item("fisher", e.fisher)?;
    Ok(d)
}

/// Bubble pair (U, V) centered at boundary point `x0`.
#[pyfunction]
#[pyo3(signature = (grid, mass, epsilon, chi = 1.0, x0 = (0.0, 0.5)))]
fn bubble_pair(
    grid: &PyGrid,
    mass: f64,
    epsilon: f64,
    chi: f64,
    x0: (f64, f64),
) -> PyResult<(PyField, PyField)> {
    let b = initdata::bubble_pair(
        &BubbleSpec {
            epsilon,
            x0,
            mass,
            chi,
        },
        &grid.0,
    )
    .map_err(to_py)?;
    Ok((PyField(b.u), PyField(b.v)))
}

#[pyfunction]
fn shift_nonnegative(v: &PyField) -> (PyField, f64) {
    let (f, s) = initdata::shift_nonnegative(&v.0);
    (PyField(f), s)
}

#[pyfunction]
#[pyo3(signature = (grid, mass, amplitude = 0.1, mode = (1, 1)))]
fn perturbed_constant(
    grid: &PyGrid,
    mass: f64,
    amplitude: f64,
    mode: (u32, u32),
) -> PyResult<(PyField, PyField)> {
    let (u, v) = initdata::perturbed_constant(mass, amplitude, mode, &grid.0).map_err(to_py)?;
    Ok((PyField(u), PyField(v)))
}

#[pyfunction]
#[pyo3(signature = (grid, mass, amplitude, seed))]
fn random_perturbation(
    grid: &PyGrid,
    mass: f64,
    amplitude: f64,
    seed: u64,
) -> PyResult<(PyField, PyField)> {
    let (u, v) = initdata::random_perturbation(mass, amplitude, seed, &grid.0).map_err(to_py)?;
    Ok((PyField(u), PyField(v)))
}

/// Integrates the system to `t_end`. A fixed `dt` disables adaptivity.
#[pyfunction]
#[pyo3(signature = (
    u0, v0, params, t_end,
    dt = None, blowup_threshold = 1e4, n_consec = 20, sample_every = 10,
    solver_tol = 1e-10, max_steps = 1_000_000
))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    u0: &PyField,
    v0: &PyField,
    params: &PyModelParams,
    t_end: f64,
    dt: Option<f64>,
    blowup_threshold: f64,
    n_consec: usize,
    sample_every: usize,
    solver_tol: f64,
    max_steps: usize,
) -> PyResult<PyRunResult> {
    let base = dt.map_or_else(solver::StepControl::default, solver::StepControl::fixed);
    let ctrl = solver::StepControl {
        solver_tol,
        max_steps,
        ..base
    };
    let settings = solver::RunSettings {
        t_end,
        blowup_threshold,
        n_consec,
        sample_every,
    };
    let (u0, v0, p) = (u0.0.clone(), v0.0.clone(), params.0);
    py.detach(|| solver::run(&u0, &v0, &p, &ctrl, &settings))
        .map(PyRunResult)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (grid, mass, chi = 1.0, v_init = None, damping = 0.5, tol = 1e-10, max_iter = 100_000))]
#[allow(clippy::too_many_arguments)]
fn steady_solve<'py>(
    py: Python<'py>,
    grid: &PyGrid,
    mass: f64,
    chi: f64,
    v_init: Option<&PyField>,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = SteadyOptions {
        damping,
        tol,
        max_iter,
    };
    let r = steady::steady_solve(mass, chi, &grid.0, &opts, v_init.map(|f| &f.0)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("u", PyField(r.u))?;
    d.set_item("v", PyField(r.v))?;
    d.set_item("residual", r.residual)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    d.set_item("F", r.energy.f.total)?;
    d.set_item("E", r.energy.e.total)?;
    Ok(d)
}

/// Least-squares slope of F(U_eps, V_eps) against ln(1/eps).
#[pyfunction]
#[pyo3(signature = (grid, mass, epsilons, chi = 1.0, x0 = (0.0, 0.5)))]
fn bubble_energy<'py>(
    py: Python<'py>,
    grid: &PyGrid,
    mass: f64,
    epsilons: Vec<f64>,
    chi: f64,
    x0: (f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let r = experiments::bubble_energy_experiment(chi, mass, &epsilons, x0, &grid.0).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("slope", r.slope)?;
    d.set_item("intercept", r.intercept)?;
    d.set_item("target", r.target)?;
    d.set_item("deviation", r.deviation)?;
    let rows: Vec<(f64, f64, bool)> = r.rows.iter().map(|x| (x.epsilon, x.f, x.resolved)).collect();
    d.set_item("rows", rows)?;
    Ok(d)
}

/// Runs an experiment configuration file; returns the manifest summary.
#[pyfunction]
#[pyo3(signature = (path, output_dir = None, check = false))]
fn run_config<'py>(
    py: Python<'py>,
    path: PathBuf,
    output_dir: Option<PathBuf>,
    check: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let config = ExperimentConfig::load(&path).map_err(to_py)?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), PathBuf::from);
    let opts = ExecOptions {
        output_dir,
        check,
        timing: false,
    };
    let out = py
        .detach(|| experiments::execute(&config, &base, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("experiment", &out.manifest.experiment)?;
    d.set_item("outcome", &out.manifest.outcome)?;
    d.set_item("output_dir", out.output_dir)?;
    d.set_item("summary", out.manifest.summary)?;
    d.set_item("check_passed", out.check.map(|c| c.passed))?;
    Ok(d)
}

/// Same as the `ksm` binary; `argv` excludes the program name.
#[pyfunction]
fn cli_main(argv: Vec<String>) -> i32 {
    experiments::cli_main(std::iter::once("ksm".to_string()).chain(argv))
}

#[pyfunction]
#[pyo3(signature = (field, path, t = 0.0))]
fn write_snapshot(field: &PyField, path: PathBuf, t: f64) -> PyResult<()> {
    kio::write_snapshot(&field.0, t, &path).map_err(to_py)
}

/// Returns (field, t).
#[pyfunction]
fn read_snapshot(path: PathBuf) -> PyResult<(PyField, f64)> {
    let (f, meta) = kio::read_snapshot(&path).map_err(to_py)?;
    Ok((PyField(f), meta.t))
}

#[pymodule]
#[pyo3(name = "ksmotility")]
fn ksmotility_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyRunResult>()?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(solve_helmholtz, m)?)?;
    m.add_function(wrap_pyfunction!(hminus1_norm_sq, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(dissipation, m)?)?;
    m.add_function(wrap_pyfunction!(bubble_pair, m)?)?;
    m.add_function(wrap_pyfunction!(shift_nonnegative, m)?)?;
    m.add_function(wrap_pyfunction!(perturbed_constant, m)?)?;
    m.add_function(wrap_pyfunction!(random_perturbation, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(steady_solve, m)?)?;
    m.add_function(wrap_pyfunction!(bubble_energy, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(cli_main, m)?)?;
    m.add_function(wrap_pyfunction!(write_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(read_snapshot, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
