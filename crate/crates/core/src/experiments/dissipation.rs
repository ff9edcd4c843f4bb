//! Energy identity and H⁻¹ dissipation inequality over a time-step ladder.

use crate::energy::energy_identity_residual;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::ModelParams;
use crate::solver::{
    dissipation_inequality_check, run, DissipationInequalityReport, Outcome, RunSettings,
    SeriesRow, StepControl,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub dt: f64,
    pub outcome: Outcome,
    pub identity_residual: f64,
    /// Largest increase of F between consecutive samples (0 when F never rises).
    pub max_f_increase: f64,
    pub inequality: DissipationInequalityReport,
    pub series: Vec<SeriesRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub rungs: Vec<LadderRung>,
}

impl DissipationReport {
    /// True when the identity residual shrinks strictly with every refinement.
    pub fn residual_decreasing(&self) -> bool {
        self.rungs
            .windows(2)
            .all(|w| w[1].identity_residual < w[0].identity_residual)
    }

    pub fn max_violation(&self) -> f64 {
        self.rungs
            .iter()
            .map(|r| r.inequality.max_violation)
            .fold(0.0, f64::max)
    }
}

/// Largest rise of F between consecutive samples.
pub fn max_energy_increase(series: &[SeriesRow]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1].f - w[0].f)
        .fold(0.0, f64::max)
}

/// Runs the same data at each fixed `dt`, sampling every step. `dts` should
/// be ordered from coarse to fine.
pub fn dissipation_check_experiment(
    u0: &Field,
    v0: &Field,
    params: &ModelParams,
    dts: &[f64],
    settings: &RunSettings,
    solver_tol: f64,
) -> Result<DissipationReport> {
    if dts.is_empty() {
        return Err(Error::Config("the time-step ladder is empty".into()));
    }
    let settings = RunSettings {
        sample_every: 1,
        ..*settings
    };
    let mut rungs = Vec::with_capacity(dts.len());
    for &dt in dts {
        let ctrl = StepControl {
            solver_tol,
            ..StepControl::fixed(dt)
        };
        let r = run(u0, v0, params, &ctrl, &settings)?;
        let identity_residual = energy_identity_residual(&r.energy_samples())?;
        log::info!("dt = {dt}: identity residual {identity_residual:e}");
        rungs.push(LadderRung {
            dt,
            outcome: r.outcome,
            identity_residual,
            max_f_increase: max_energy_increase(&r.series),
            inequality: dissipation_inequality_check(&r.series, u0.grid().area()),
            series: r.series,
        });
    }
    Ok(DissipationReport { rungs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::initdata::perturbed_constant;

    #[test]
    fn constant_data_has_zero_residual() {
        let g = Grid::unit_square(8).unwrap();
        let (u, v) = perturbed_constant(2.0, 0.0, (0, 0), &g).unwrap();
        let settings = RunSettings {
            t_end: 0.1,
            ..RunSettings::default()
        };
        let r = dissipation_check_experiment(
            &u,
            &v,
            &ModelParams::default(),
            &[0.02, 0.01],
            &settings,
            1e-10,
        )
        .unwrap();
        for rung in &r.rungs {
            assert!(rung.identity_residual <= 1e-10);
            assert_eq!(rung.inequality.max_violation, 0.0);
        }
    }

    #[test]
    fn residual_shrinks_with_dt() {
        let g = Grid::unit_square(16).unwrap();
        let (u, v) = perturbed_constant(3.0, 0.3, (1, 1), &g).unwrap();
        let settings = RunSettings {
            t_end: 0.2,
            ..RunSettings::default()
        };
        let r = dissipation_check_experiment(
            &u,
            &v,
            &ModelParams::default(),
            &[1e-2, 5e-3, 2.5e-3],
            &settings,
            1e-10,
        )
        .unwrap();
        assert!(r.residual_decreasing(), "{:?}", r.rungs.iter().map(|r| r.identity_residual).collect::<Vec<_>>());
        assert!(r.rungs.iter().all(|r| r.max_f_increase <= 1e-8));
    }
}
