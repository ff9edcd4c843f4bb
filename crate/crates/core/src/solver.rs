//! Semi-implicit time integration of
//!
//! ```text
//! u_t = Δ(γ(v) u),   v_t = Δv + u - v,   zero-flux boundaries
//! ```
//!
//! One step lags the motility, solves the u-equation implicitly in flux form
//! (an M-matrix with column sums `1/dt`, so positivity and mass are
//! preserved exactly up to the linear-solver tolerance) and then solves the
//! v-equation implicitly with the updated density.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::{dissipation, interval_residual, lyapunov, EnergySample};
use crate::error::{Error, Result};
use crate::fields::{hminus1_norm_sq, integrate, linf_norm};
use crate::grid::{solve_helmholtz_from, solve_weighted_implicit_from, Field, DEFAULT_SOLVER_TOL};
use crate::model::{motility_eval, ModelParams};

/// Motility below this value marks the run as degenerate.
pub const DEGENERACY_LEVEL: f64 = 1e-12;

/// Cells more negative than this count as a positivity violation.
pub const POSITIVITY_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl State {
    pub fn new(u: Field, v: Field, t: f64) -> Result<Self> {
        u.same_grid(&v)?;
        u.check_finite()?;
        v.check_finite()?;
        if u.min() < 0.0 || v.min() < 0.0 {
            return Err(Error::Domain(format!(
                "initial data must be nonnegative (min u = {}, min v = {})",
                u.min(),
                v.min()
            )));
        }
        Ok(Self { u, v, t })
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub growth_factor: f64,
    pub shrink_factor: f64,
    /// Largest accepted relative sup-norm change of u in one step.
    pub change_cap: f64,
    pub solver_tol: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-8,
            dt_max: 0.1,
            growth_factor: 1.2,
            shrink_factor: 0.5,
            change_cap: 0.1,
            solver_tol: DEFAULT_SOLVER_TOL,
            max_steps: 1_000_000,
        }
    }
}

impl StepControl {
    /// Fixed step size: no growth beyond `dt`, no shrinking below it.
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            change_cap: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max.is_finite()
            && self.growth_factor >= 1.0
            && self.shrink_factor > 0.0
            && self.shrink_factor < 1.0
            && self.change_cap > 0.0
            && self.solver_tol > 0.0
            && self.solver_tol < 1.0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid step control: need 0 < dt_min <= dt_init <= dt_max, growth >= 1, \
                 0 < shrink < 1, change_cap > 0, 0 < solver_tol < 1, max_steps > 0; got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Bounded,
    BlowupSuspected,
    MaxStepsReached,
    SolverFailure,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Bounded => "bounded",
            Outcome::BlowupSuspected => "blowup_suspected",
            Outcome::MaxStepsReached => "max_steps_reached",
            Outcome::SolverFailure => "solver_failure",
        })
    }
}

/// One diagnostic sample along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub min_motility: f64,
    pub f: f64,
    /// NaN when u has a vanishing cell (the Fisher term is undefined there).
    pub e: f64,
    /// ‖u - ū‖²_{H⁻¹}
    pub hminus1: f64,
    /// ∫ γ(v) (u - ū)²
    pub weighted_l2: f64,
    /// Largest energy-identity defect over the sample intervals so far.
    pub identity_residual: f64,
}

impl SeriesRow {
    fn energy_sample(&self) -> EnergySample {
        EnergySample {
            t: self.t,
            f: self.f,
            e: self.e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub t_end: f64,
    /// Blow-up is suspected once sup u reaches this multiple of sup u₀.
    pub blowup_threshold: f64,
    /// ... or once this many consecutive steps were forced at `dt_min`.
    pub n_consec: usize,
    /// Sample diagnostics every this many accepted steps.
    pub sample_every: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            blowup_threshold: 1e4,
            n_consec: 20,
            sample_every: 10,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.blowup_threshold.is_nan() || self.blowup_threshold <= 0.0 {
            return Err(Error::Config(format!(
                "blowup_threshold must be positive, got {}",
                self.blowup_threshold
            )));
        }
        if self.n_consec == 0 || self.sample_every == 0 {
            return Err(Error::Config(
                "n_consec and sample_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// What the classifier saw; always logged with the outcome.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMeta {
    pub blowup_threshold: f64,
    pub n_consec: usize,
    pub linf_u0: f64,
    pub max_linf_u: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub longest_dt_min_streak: usize,
    pub growth_threshold_hit: bool,
    pub dt_min_streak_hit: bool,
    /// First sample time at which the motility dropped below [`DEGENERACY_LEVEL`].
    pub degeneracy_time: Option<f64>,
    pub min_u: f64,
    pub min_v: f64,
    pub positivity_violated: bool,
    pub failure: Option<String>,
}

impl RunMeta {
    pub fn growth(&self) -> f64 {
        self.max_linf_u / self.linf_u0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub final_state: State,
    pub series: Vec<SeriesRow>,
    pub meta: RunMeta,
}

impl RunResult {
    pub fn energy_samples(&self) -> Vec<EnergySample> {
        self.series.iter().map(SeriesRow::energy_sample).collect()
    }
}

/// Implicit logistic substep u ← u + dt σ u (1 - u), solved exactly per cell.
fn logistic_substep(u: &Field, sigma: f64, dt: f64) -> Field {
    let s = dt * sigma;
    let b = 1.0 - s;
    // positive root of s x² + b x - u = 0, in cancellation-free form
    u.map(|u0| {
        if u0 <= 0.0 {
            0.0
        } else {
            2.0 * u0 / (b + (b * b + 4.0 * s * u0).sqrt())
        }
    })
}

pub fn step(state: &State, params: &ModelParams, dt: f64, ctrl: &StepControl) -> Result<State> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let tol = ctrl.solver_tol;
    let gamma = motility_eval(params, &state.v)?;
    let inv_dt = 1.0 / dt;

    let u_rhs = state.u.map(|x| x * inv_dt);
    let mut u = solve_weighted_implicit_from(inv_dt, &gamma, &u_rhs, Some(&state.u), tol)?;
    if params.sigma() > 0.0 {
        u = logistic_substep(&u, params.sigma(), dt);
    }

    let v_rhs = state.v.zip_map(&u, |v, u| v * inv_dt + u)?;
    let v = solve_helmholtz_from(inv_dt + 1.0, &v_rhs, Some(&state.v), tol)?;

    Ok(State {
        u,
        v,
        t: state.t + dt,
    })
}

/// ‖u' - u‖∞ / ‖u‖∞.
pub fn relative_change(prev: &State, next: &State) -> f64 {
    let scale = linf_norm(&prev.u);
    let diff = prev
        .u
        .values()
        .iter()
        .zip(next.u.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn adapt_dt(prev: &State, next: &State, dt: f64, ctrl: &StepControl) -> f64 {
    let change = relative_change(prev, next);
    let proposed = if change > ctrl.change_cap {
        dt * ctrl.shrink_factor
    } else {
        dt * ctrl.growth_factor
    };
    proposed.clamp(ctrl.dt_min, ctrl.dt_max)
}

fn sample(
    state: &State,
    params: &ModelParams,
    tol: f64,
    previous: Option<&SeriesRow>,
) -> Result<SeriesRow> {
    let (u, v) = (&state.u, &state.v);
    let grid = u.grid();
    let mass = integrate(u);
    let gamma = motility_eval(params, v)?;
    let ubar = mass / grid.area();
    let weighted_l2 = u
        .values()
        .iter()
        .zip(gamma.values())
        .map(|(&x, &g)| g * (x - ubar) * (x - ubar))
        .sum::<f64>()
        * grid.cell_area();
    let f = lyapunov(u, v, params.chi())?.total;
    let e = match dissipation(u, v, params) {
        Ok(d) => d.total,
        Err(Error::Domain(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    let mut row = SeriesRow {
        t: state.t,
        mass,
        linf_u: linf_norm(u),
        linf_v: linf_norm(v),
        min_motility: gamma.min(),
        f,
        e,
        hminus1: hminus1_norm_sq(u, tol)?,
        weighted_l2,
        identity_residual: 0.0,
    };
    if let Some(prev) = previous {
        let r = interval_residual(&prev.energy_sample(), &row.energy_sample());
        row.identity_residual = if r.is_nan() {
            prev.identity_residual
        } else {
            prev.identity_residual.max(r)
        };
    }
    Ok(row)
}

/// Integrates to `settings.t_end`, sampling diagnostics. Invalid input is an
/// error; a failing linear solve ends the run with [`Outcome::SolverFailure`]
/// and the partial series.
pub fn run(
    u0: &Field,
    v0: &Field,
    params: &ModelParams,
    ctrl: &StepControl,
    settings: &RunSettings,
) -> Result<RunResult> {
    run_observed(u0, v0, params, ctrl, settings, |_| Ok(()))
}

/// [`run`], handing each sample to `observer` as soon as it is taken.
pub fn run_observed<O>(
    u0: &Field,
    v0: &Field,
    params: &ModelParams,
    ctrl: &StepControl,
    settings: &RunSettings,
    mut observer: O,
) -> Result<RunResult>
where
    O: FnMut(&SeriesRow) -> Result<()>,
{
    ctrl.validate()?;
    settings.validate()?;
    let mut state = State::new(u0.clone(), v0.clone(), 0.0)?;
    let tol = ctrl.solver_tol;

    let linf_u0 = linf_norm(u0);
    let mut meta = RunMeta {
        blowup_threshold: settings.blowup_threshold,
        n_consec: settings.n_consec,
        linf_u0,
        max_linf_u: linf_u0,
        min_u: u0.min(),
        min_v: v0.min(),
        ..RunMeta::default()
    };

    let mut series: Vec<SeriesRow> = Vec::new();
    let mut record = |state: &State, series: &mut Vec<SeriesRow>, meta: &mut RunMeta| -> Result<()> {
        let row = sample(state, params, tol, series.last())?;
        if row.min_motility < DEGENERACY_LEVEL && meta.degeneracy_time.is_none() {
            meta.degeneracy_time = Some(row.t);
            log::warn!(
                "motility fell to {:e} at t = {}; the diffusion is nearly degenerate",
                row.min_motility,
                row.t
            );
        }
        observer(&row)?;
        series.push(row);
        Ok(())
    };

    let fail = |state: State, series: Vec<SeriesRow>, mut meta: RunMeta, err: Error| {
        log::warn!("run stopped at t = {}: {err}", state.t);
        meta.failure = Some(err.to_string());
        RunResult {
            outcome: Outcome::SolverFailure,
            final_state: state,
            series,
            meta,
        }
    };

    if let Err(e) = record(&state, &mut series, &mut meta) {
        if e.is_solver_failure() {
            return Ok(fail(state, series, meta, e));
        }
        return Err(e);
    }

    let t_end = settings.t_end;
    let end_slack = 1e-12 * t_end.max(1.0);
    let mut dt = ctrl.dt_init;
    let mut streak = 0usize;
    let mut sampled_at_current = true;
    let mut outcome = Outcome::Bounded;

    while t_end - state.t > end_slack {
        if meta.steps >= ctrl.max_steps {
            outcome = Outcome::MaxStepsReached;
            break;
        }
        let dt_try = dt.min(t_end - state.t);
        let next = match step(&state, params, dt_try, ctrl) {
            Ok(s) => s,
            Err(e) if e.is_solver_failure() => return Ok(fail(state, series, meta, e)),
            Err(e) => return Err(e),
        };
        let change = relative_change(&state, &next);
        if change > ctrl.change_cap && dt_try > ctrl.dt_min {
            meta.rejected_steps += 1;
            dt = (dt_try * ctrl.shrink_factor).max(ctrl.dt_min);
            continue;
        }

        meta.steps += 1;
        streak = if dt_try <= ctrl.dt_min * (1.0 + 1e-12) {
            streak + 1
        } else {
            0
        };
        meta.longest_dt_min_streak = meta.longest_dt_min_streak.max(streak);
        dt = adapt_dt(&state, &next, dt_try, ctrl);
        state = next;
        sampled_at_current = false;

        let (umin, vmin) = (state.u.min(), state.v.min());
        meta.min_u = meta.min_u.min(umin);
        meta.min_v = meta.min_v.min(vmin);
        if umin < -POSITIVITY_SLACK || vmin < -POSITIVITY_SLACK {
            meta.positivity_violated = true;
        }
        let linf_u = linf_norm(&state.u);
        meta.max_linf_u = meta.max_linf_u.max(linf_u);

        let grown = linf_u >= settings.blowup_threshold * linf_u0;
        let stalled = streak >= settings.n_consec;
        if grown || stalled || meta.steps.is_multiple_of(settings.sample_every) {
            if let Err(e) = record(&state, &mut series, &mut meta) {
                if e.is_solver_failure() {
                    return Ok(fail(state, series, meta, e));
                }
                return Err(e);
            }
            sampled_at_current = true;
        }
        if grown || stalled {
            meta.growth_threshold_hit = grown;
            meta.dt_min_streak_hit = stalled;
            outcome = Outcome::BlowupSuspected;
            break;
        }
    }

    if !sampled_at_current {
        if let Err(e) = record(&state, &mut series, &mut meta) {
            if e.is_solver_failure() {
                return Ok(fail(state, series, meta, e));
            }
            return Err(e);
        }
    }

    Ok(RunResult {
        outcome,
        final_state: state,
        series,
        meta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationInequalityReport {
    /// Largest (lhs - rhs) / rhs over all sample windows, floored at 0.
    pub max_violation: f64,
    /// Largest lhs / rhs over all windows.
    pub max_ratio: f64,
    pub windows: usize,
}

/// Checks H(t₂) - H(t₁) + 2 ∫ ∫γ(u-ū)² dt ≤ (2 M₀² / |Ω|)(t₂ - t₁) on every
/// pair of samples, with H the squared H⁻¹ norm of u - ū and the time
/// integral taken by the trapezoid rule.
pub fn dissipation_inequality_check(series: &[SeriesRow], area: f64) -> DissipationInequalityReport {
    let n = series.len();
    let mut report = DissipationInequalityReport {
        max_violation: 0.0,
        max_ratio: f64::NEG_INFINITY,
        windows: 0,
    };
    if n < 2 {
        report.max_ratio = 0.0;
        return report;
    }
    let m0 = series[0].mass;
    let rate = 2.0 * m0 * m0 / area;
    let mut cumulative = vec![0.0; n];
    for k in 1..n {
        let a = &series[k - 1];
        let b = &series[k];
        cumulative[k] = cumulative[k - 1] + 0.5 * (a.weighted_l2 + b.weighted_l2) * (b.t - a.t);
    }
    for i in 0..n {
        for j in i + 1..n {
            let rhs = rate * (series[j].t - series[i].t);
            if rhs <= 0.0 {
                continue;
            }
            let lhs = series[j].hminus1 - series[i].hminus1 + 2.0 * (cumulative[j] - cumulative[i]);
            report.windows += 1;
            report.max_ratio = report.max_ratio.max(lhs / rhs);
            report.max_violation = report.max_violation.max((lhs - rhs) / rhs);
        }
    }
    if report.windows == 0 {
        report.max_ratio = 0.0;
    }
    report
}
