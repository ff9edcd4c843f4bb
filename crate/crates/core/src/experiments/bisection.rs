//! Bisection on the initial mass between bounded and blow-up-suspected runs.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::ModelParams;
use crate::solver::{run, Outcome, RunResult, RunSettings, SeriesRow, StepControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialRole {
    Lower,
    Upper,
    Midpoint,
}

impl TrialRole {
    pub fn label(&self) -> &'static str {
        match self {
            TrialRole::Lower => "lower",
            TrialRole::Upper => "upper",
            TrialRole::Midpoint => "midpoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub role: TrialRole,
    pub mass: f64,
    pub outcome: Outcome,
    pub growth: f64,
    pub t_final: f64,
    pub steps: usize,
    /// Bracket after this trial.
    pub bracket: (f64, f64),
    pub series: Vec<SeriesRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionReport {
    /// Midpoint of the final bracket.
    pub estimate: f64,
    pub bracket: (f64, f64),
    pub trials: Vec<Trial>,
    pub warnings: Vec<String>,
}

impl BisectionReport {
    pub fn width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

/// Runs `family(M)` at both ends of `bracket`, then bisects `iterations`
/// times. `on_trial` sees every trial as soon as it finishes.
pub fn critical_mass_bisection<F, T>(
    params: &ModelParams,
    bracket: (f64, f64),
    mut family: F,
    ctrl: &StepControl,
    settings: &RunSettings,
    iterations: usize,
    on_trial: T,
) -> Result<BisectionReport>
where
    F: FnMut(f64) -> Result<(Field, Field)>,
    T: FnMut(&Trial) -> Result<()>,
{
    bisect_mass(
        bracket,
        iterations,
        |mass| {
            let (u0, v0) = family(mass)?;
            run(&u0, &v0, params, ctrl, settings)
        },
        on_trial,
    )
}

/// Bisection over any mass-to-run map. A midpoint that neither stays bounded
/// nor is flagged (solver failure, step budget exhausted) leaves the bracket
/// as it was and is reported in `warnings`.
pub fn bisect_mass<R, T>(
    bracket: (f64, f64),
    iterations: usize,
    mut trial: R,
    mut on_trial: T,
) -> Result<BisectionReport>
where
    R: FnMut(f64) -> Result<RunResult>,
    T: FnMut(&Trial) -> Result<()>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Bracket(format!(
            "mass bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut trials: Vec<Trial> = Vec::new();
    let mut warnings = Vec::new();

    let mut attempt = |mass: f64, role: TrialRole, trials: &mut Vec<Trial>, lo: &mut f64, hi: &mut f64| -> Result<Outcome> {
        let r = trial(mass)?;
        log::info!(
            "trial {} ({}) M = {mass}: {} after {} steps, growth {:.6}",
            trials.len(),
            role.label(),
            r.outcome,
            r.meta.steps,
            r.meta.growth()
        );
        if role == TrialRole::Midpoint {
            match r.outcome {
                Outcome::Bounded => *lo = mass,
                Outcome::BlowupSuspected => *hi = mass,
                other => {
                    let w = format!("M = {mass} was not classified ({other}); bracket kept");
                    log::warn!("{w}");
                    warnings.push(w);
                }
            }
        }
        let t = Trial {
            index: trials.len(),
            role,
            mass,
            outcome: r.outcome,
            growth: r.meta.growth(),
            t_final: r.final_state.t,
            steps: r.meta.steps,
            bracket: (*lo, *hi),
            series: r.series,
        };
        on_trial(&t)?;
        trials.push(t);
        Ok(r.outcome)
    };

    let low = attempt(lo, TrialRole::Lower, &mut trials, &mut lo, &mut hi)?;
    if low != Outcome::Bounded {
        return Err(Error::Bracket(format!(
            "lower end M = {lo} was classified {low}, expected bounded"
        )));
    }
    let high = attempt(hi, TrialRole::Upper, &mut trials, &mut lo, &mut hi)?;
    if high != Outcome::BlowupSuspected {
        return Err(Error::Bracket(format!(
            "upper end M = {hi} was classified {high}, expected blowup_suspected"
        )));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        attempt(mid, TrialRole::Midpoint, &mut trials, &mut lo, &mut hi)?;
    }

    Ok(BisectionReport {
        estimate: 0.5 * (lo + hi),
        bracket: (lo, hi),
        trials,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::initdata::perturbed_constant;
    use crate::solver::{RunMeta, State};

    fn quick() -> (StepControl, RunSettings) {
        let ctrl = StepControl {
            dt_init: 0.05,
            dt_max: 0.05,
            ..StepControl::default()
        };
        let settings = RunSettings {
            t_end: 0.2,
            ..RunSettings::default()
        };
        (ctrl, settings)
    }

    #[test]
    fn both_ends_bounded_is_a_bracket_error() {
        let g = Grid::unit_square(8).unwrap();
        let p = ModelParams::default();
        let (ctrl, settings) = quick();
        let mut seen = 0;
        let err = critical_mass_bisection(
            &p,
            (1.0, 2.0),
            |m| perturbed_constant(m, 0.0, (0, 0), &g),
            &ctrl,
            &settings,
            3,
            |_| {
                seen += 1;
                Ok(())
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Bracket(_)));
        // the upper trial is still reported for auditing
        assert_eq!(seen, 2);
    }

    #[test]
    fn unordered_bracket_is_rejected() {
        let g = Grid::unit_square(4).unwrap();
        let (ctrl, settings) = quick();
        let err = critical_mass_bisection(
            &ModelParams::default(),
            (3.0, 1.0),
            |m| perturbed_constant(m, 0.0, (0, 0), &g),
            &ctrl,
            &settings,
            1,
            |_| Ok(()),
        );
        assert!(matches!(err, Err(Error::Bracket(_))));
    }

    fn labelled(mass: f64, outcome: Outcome) -> Result<RunResult> {
        let g = Grid::unit_square(2).unwrap();
        let c = Field::constant(g, mass);
        Ok(RunResult {
            outcome,
            final_state: State::new(c.clone(), c, 1.0).unwrap(),
            series: Vec::new(),
            meta: RunMeta {
                linf_u0: mass,
                max_linf_u: mass,
                ..RunMeta::default()
            },
        })
    }

    #[test]
    fn synthetic_threshold_is_bracketed() {
        let r = bisect_mass(
            (1.0, 9.0),
            4,
            |m| labelled(m, if m < 4.2 { Outcome::Bounded } else { Outcome::BlowupSuspected }),
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(r.trials.len(), 6);
        assert!((r.width() - 8.0 / 16.0).abs() < 1e-12);
        assert!(r.bracket.0 < 4.2 && 4.2 < r.bracket.1);
        assert!(r.warnings.is_empty());
        assert_eq!(r.trials[2].bracket, (1.0, 5.0));
    }

    #[test]
    fn unclassified_midpoint_keeps_bracket() {
        let r = bisect_mass(
            (2.0, 10.0),
            2,
            |m| {
                let o = if m == 6.0 {
                    Outcome::SolverFailure
                } else if m < 7.0 {
                    Outcome::Bounded
                } else {
                    Outcome::BlowupSuspected
                };
                labelled(m, o)
            },
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(r.warnings.len(), 2);
        assert_eq!(r.bracket, (2.0, 10.0));
        assert_eq!(r.trials.len(), 4);
    }
}
