//! Runs a configured experiment and writes its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::experiments::bisection::critical_mass_bisection;
use crate::experiments::bubble::bubble_energy_experiment;
use crate::experiments::config::{critical_mass, ExperimentConfig, ExperimentKind};
use crate::experiments::dissipation::{dissipation_check_experiment, max_energy_increase};
use crate::io::{fmt_f64, write_checkpoint, write_series, write_table, Manifest, SeriesWriter};
use crate::solver::{run_observed, Outcome};
use crate::steady::steady_energy_scan;
use crate::VERSION;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecOptions {
    /// Replaces `experiment.output_dir`.
    pub output_dir: Option<PathBuf>,
    /// Compare results with the `[check]` expectations.
    pub check: bool,
    /// Record wall-clock time in the manifest (breaks byte-identical reruns).
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub manifest: Manifest,
    pub output_dir: PathBuf,
    pub check: Option<CheckResult>,
    pub solver_failure: bool,
}

struct Record {
    outcome: String,
    summary: BTreeMap<String, String>,
    thresholds: BTreeMap<String, f64>,
    outputs: Vec<String>,
    check: Option<CheckResult>,
    solver_failure: bool,
}

impl Record {
    fn new(outcome: impl Into<String>) -> Self {
        Self {
            outcome: outcome.into(),
            summary: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            outputs: Vec::new(),
            check: None,
            solver_failure: false,
        }
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.summary.insert(key.to_string(), value.to_string());
    }

    fn num(&mut self, key: &str, value: f64) {
        self.put(key, fmt_f64(value));
    }
}

/// Runs `config`; relative paths inside it are resolved against `base`.
pub fn execute(config: &ExperimentConfig, base: &Path, opts: &ExecOptions) -> Result<ExperimentOutcome> {
    config.validate()?;
    let out = match &opts.output_dir {
        Some(d) => d.clone(),
        None => base.join(&config.experiment.output_dir),
    };
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let started = Instant::now();

    let mut rec = match config.kind() {
        ExperimentKind::Run => exec_run(config, base, &out)?,
        ExperimentKind::Steady => exec_steady(config, &out)?,
        ExperimentKind::BubbleEnergy => exec_bubble(config, &out)?,
        ExperimentKind::CriticalMass => exec_critical(config, &out)?,
        ExperimentKind::DissipationCheck => exec_dissipation(config, base, &out)?,
    };
    if opts.check {
        let c = check(config, &rec)?;
        rec.put("check", if c.passed { "pass" } else { "fail" });
        rec.put("check_detail", &c.detail);
        rec.check = Some(c);
    }
    rec.thresholds
        .insert("solver_tol".into(), config.control.solver_tol);
    rec.outputs.push("manifest.toml".into());

    let manifest = Manifest {
        version: VERSION.to_string(),
        experiment: config.kind().to_string(),
        outcome: rec.outcome,
        wall_clock_seconds: opts.timing.then(|| started.elapsed().as_secs_f64()),
        thresholds: rec.thresholds,
        summary: rec.summary,
        outputs: rec.outputs,
        config: config.to_toml()?,
    };
    manifest.write(&out.join("manifest.toml"))?;
    Ok(ExperimentOutcome {
        manifest,
        output_dir: out,
        check: rec.check,
        solver_failure: rec.solver_failure,
    })
}

fn exec_run(config: &ExperimentConfig, base: &Path, out: &Path) -> Result<Record> {
    let grid = config.grid.build()?;
    let params = config.model.params()?;
    let init = config
        .initial
        .as_ref()
        .expect("validated")
        .build(&grid, params.chi(), config.experiment.seed, base)?;

    let series_path = out.join("series.csv");
    let mut writer = SeriesWriter::create(&series_path)?;
    let r = run_observed(
        &init.u,
        &init.v,
        &params,
        &config.control,
        &config.run,
        |row| {
            writer
                .append_series_row(row)
                .map_err(|e| Error::io(&series_path, e))
        },
    )?;
    write_checkpoint(&r.final_state, &out.join("final"))?;

    let m0 = r.series.first().map_or(f64::NAN, |s| s.mass);
    let drift = r
        .series
        .iter()
        .map(|s| (s.mass - m0).abs() / m0)
        .fold(0.0, f64::max);
    let mut rec = Record::new(r.outcome.to_string());
    rec.solver_failure = r.outcome == Outcome::SolverFailure;
    rec.num("t_final", r.final_state.t);
    rec.put("steps", r.meta.steps);
    rec.put("rejected_steps", r.meta.rejected_steps);
    rec.put("samples", r.series.len());
    rec.num("linf_u0", r.meta.linf_u0);
    rec.num("max_linf_u", r.meta.max_linf_u);
    rec.num("growth", r.meta.growth());
    rec.num("linf_u_final", r.series.last().map_or(f64::NAN, |s| s.linf_u));
    rec.num("mean_u", m0 / grid.area());
    rec.num("max_mass_drift", drift);
    rec.num("max_f_increase", max_energy_increase(&r.series));
    rec.num(
        "identity_residual",
        r.series.last().map_or(f64::NAN, |s| s.identity_residual),
    );
    rec.num("min_u", r.meta.min_u);
    rec.num("min_v", r.meta.min_v);
    rec.num("v_shift", init.v_shift);
    rec.put("growth_threshold_hit", r.meta.growth_threshold_hit);
    rec.put("dt_min_streak_hit", r.meta.dt_min_streak_hit);
    if let Some(t) = r.meta.degeneracy_time {
        rec.num("degeneracy_time", t);
    }
    if let Some(f) = &r.meta.failure {
        rec.put("failure", f);
    }
    rec.thresholds
        .insert("blowup_threshold".into(), config.run.blowup_threshold);
    rec.thresholds
        .insert("n_consec".into(), config.run.n_consec as f64);
    rec.thresholds
        .insert("change_cap".into(), config.control.change_cap);
    rec.outputs = vec![
        "series.csv".into(),
        "final/u.snap".into(),
        "final/v.snap".into(),
    ];
    Ok(rec)
}

fn exec_steady(config: &ExperimentConfig, out: &Path) -> Result<Record> {
    let grid = config.grid.build()?;
    let spec = config.steady.as_ref().expect("validated");
    let rows = steady_energy_scan(
        &spec.masses,
        config.model.chi,
        &grid,
        &spec.seeds,
        &spec.options,
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.mass),
                r.seed.clone(),
                fmt_f64(r.residual),
                fmt_f64(r.f),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_table(
        &out.join("steady_scan.csv"),
        &["mass", "seed", "residual", "F", "iterations", "converged"],
        &table,
    )?;
    let all = rows.iter().all(|r| r.converged);
    let mut rec = Record::new(if all { "converged" } else { "not_converged" });
    rec.put("rows", rows.len());
    rec.put("converged", rows.iter().filter(|r| r.converged).count());
    rec.num(
        "max_residual",
        rows.iter().map(|r| r.residual).fold(0.0, f64::max),
    );
    rec.thresholds.insert("steady_tol".into(), spec.options.tol);
    rec.thresholds
        .insert("damping".into(), spec.options.damping);
    rec.outputs = vec!["steady_scan.csv".into()];
    Ok(rec)
}

fn exec_bubble(config: &ExperimentConfig, out: &Path) -> Result<Record> {
    let grid = config.grid.build()?;
    let spec = config.bubble_energy.as_ref().expect("validated");
    let r = bubble_energy_experiment(
        config.model.chi,
        spec.mass,
        &spec.epsilons,
        (spec.x0[0], spec.x0[1]),
        &grid,
    )?;
    let table: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            vec![
                fmt_f64(row.epsilon),
                fmt_f64(row.log_inv_eps),
                fmt_f64(row.f),
                row.resolved.to_string(),
            ]
        })
        .collect();
    write_table(
        &out.join("bubble_energy.csv"),
        &["epsilon", "log_inv_eps", "F", "resolved"],
        &table,
    )?;
    let mut rec = Record::new("fitted");
    rec.num("slope", r.slope);
    rec.num("intercept", r.intercept);
    rec.num("target_slope", r.target);
    rec.num("deviation", r.deviation);
    rec.put("resolved", r.rows.iter().filter(|x| x.resolved).count());
    rec.outputs = vec!["bubble_energy.csv".into()];
    Ok(rec)
}

fn exec_critical(config: &ExperimentConfig, out: &Path) -> Result<Record> {
    let grid = config.grid.build()?;
    let params = config.model.params()?;
    let spec = config.critical_mass.as_ref().expect("validated");
    let family = config.family();
    let trials_dir = out.join("trials");
    fs::create_dir_all(&trials_dir).map_err(|e| Error::io(&trials_dir, e))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut outputs = vec!["trials.csv".to_string()];
    let table_path = out.join("trials.csv");
    let header = [
        "trial", "role", "mass", "outcome", "growth", "t_final", "steps", "lo", "hi", "series",
    ];
    let result = critical_mass_bisection(
        &params,
        (spec.bracket[0], spec.bracket[1]),
        |m| {
            let d = family
                .with_mass(m)?
                .build(&grid, params.chi(), config.experiment.seed, Path::new("."))?;
            Ok((d.u, d.v))
        },
        &config.control,
        &config.run,
        spec.iterations,
        |t| {
            let name = format!("trials/trial_{:02}.csv", t.index);
            write_series(&out.join(&name), &t.series)?;
            rows.push(vec![
                t.index.to_string(),
                t.role.label().to_string(),
                fmt_f64(t.mass),
                t.outcome.to_string(),
                fmt_f64(t.growth),
                fmt_f64(t.t_final),
                t.steps.to_string(),
                fmt_f64(t.bracket.0),
                fmt_f64(t.bracket.1),
                name.clone(),
            ]);
            outputs.push(name);
            // rewritten after each trial so an aborted bisection still leaves the log
            write_table(&table_path, &header, &rows)
        },
    )?;

    let mut rec = Record::new("bracketed");
    rec.num("estimate", result.estimate);
    rec.num("lo", result.bracket.0);
    rec.num("hi", result.bracket.1);
    rec.num("width", result.width());
    rec.num("reference", critical_mass(params.chi()));
    rec.put("trials", result.trials.len());
    rec.put("warnings", result.warnings.len());
    for (k, w) in result.warnings.iter().enumerate() {
        rec.put(&format!("warning_{k}"), w);
    }
    rec.thresholds
        .insert("blowup_threshold".into(), config.run.blowup_threshold);
    rec.thresholds
        .insert("n_consec".into(), config.run.n_consec as f64);
    rec.thresholds
        .insert("t_end".into(), config.run.t_end);
    rec.outputs = outputs;
    Ok(rec)
}

fn exec_dissipation(config: &ExperimentConfig, base: &Path, out: &Path) -> Result<Record> {
    let grid = config.grid.build()?;
    let params = config.model.params()?;
    let init = config
        .initial
        .as_ref()
        .expect("validated")
        .build(&grid, params.chi(), config.experiment.seed, base)?;
    let dts = config.dissipation.clone().unwrap_or_default().dts;
    let report = dissipation_check_experiment(
        &init.u,
        &init.v,
        &params,
        &dts,
        &config.run,
        config.control.solver_tol,
    )?;

    let mut outputs = vec!["ladder.csv".to_string()];
    let mut table = Vec::new();
    for (k, rung) in report.rungs.iter().enumerate() {
        let name = format!("ladder/rung_{k:02}.csv");
        write_series(&out.join(&name), &rung.series)?;
        table.push(vec![
            fmt_f64(rung.dt),
            rung.outcome.to_string(),
            fmt_f64(rung.identity_residual),
            fmt_f64(rung.max_f_increase),
            fmt_f64(rung.inequality.max_violation),
            fmt_f64(rung.inequality.max_ratio),
            rung.inequality.windows.to_string(),
            name.clone(),
        ]);
        outputs.push(name);
    }
    write_table(
        &out.join("ladder.csv"),
        &[
            "dt",
            "outcome",
            "identity_residual",
            "max_F_increase",
            "max_violation",
            "max_ratio",
            "windows",
            "series",
        ],
        &table,
    )?;
    let mut rec = Record::new("completed");
    rec.solver_failure = report
        .rungs
        .iter()
        .any(|r| r.outcome == Outcome::SolverFailure);
    rec.put("residual_decreasing", report.residual_decreasing());
    rec.num("max_violation", report.max_violation());
    rec.num(
        "max_identity_residual",
        report
            .rungs
            .iter()
            .map(|r| r.identity_residual)
            .fold(0.0, f64::max),
    );
    rec.outputs = outputs;
    Ok(rec)
}

fn summary_f64(rec: &Record, key: &str) -> f64 {
    rec.summary
        .get(key)
        .and_then(|s| s.parse().ok())
        .unwrap_or(f64::NAN)
}

fn check(config: &ExperimentConfig, rec: &Record) -> Result<CheckResult> {
    let spec = config.check.clone().unwrap_or_default();
    let chi = config.model.chi;
    let (passed, detail) = match config.kind() {
        ExperimentKind::Run => {
            let want = spec.outcome.ok_or_else(|| {
                Error::Config("--check on a run needs check.outcome".into())
            })?;
            (
                rec.outcome == want.to_string(),
                format!("outcome {} (expected {want})", rec.outcome),
            )
        }
        ExperimentKind::Steady => {
            let tol = spec
                .max_residual
                .unwrap_or(config.steady.as_ref().map_or(1e-10, |s| s.options.tol));
            let r = summary_f64(rec, "max_residual");
            (
                rec.outcome == "converged" && r <= tol,
                format!("max residual {r:e} (allowed {tol:e}), {}", rec.outcome),
            )
        }
        ExperimentKind::BubbleEnergy => {
            let slope = summary_f64(rec, "slope");
            let expected = spec.slope.unwrap_or(summary_f64(rec, "target_slope"));
            let (ok, allowed) = if expected == 0.0 {
                let tol = spec
                    .abs_tol
                    .unwrap_or(0.15 * 8.0 * std::f64::consts::PI / chi);
                ((slope - expected).abs() <= tol, tol)
            } else {
                let tol = spec.rel_tol.unwrap_or(0.1) * expected.abs();
                ((slope - expected).abs() <= tol, tol)
            };
            (
                ok,
                format!("slope {slope:.6} vs expected {expected:.6} (allowed +-{allowed:.6})"),
            )
        }
        ExperimentKind::CriticalMass => {
            let est = summary_f64(rec, "estimate");
            let expected = spec.estimate.unwrap_or(critical_mass(chi));
            let tol = spec.rel_tol.unwrap_or(0.4) * expected.abs();
            (
                (est - expected).abs() <= tol,
                format!("estimate {est:.6} vs expected {expected:.6} (allowed +-{tol:.6})"),
            )
        }
        ExperimentKind::DissipationCheck => {
            let v = summary_f64(rec, "max_violation");
            let allowed = spec.max_violation.unwrap_or(0.05);
            let decreasing = rec.summary.get("residual_decreasing").map(String::as_str) == Some("true");
            (
                decreasing && v <= allowed,
                format!("residual decreasing: {decreasing}, max violation {v:e} (allowed {allowed:e})"),
            )
        }
    };
    Ok(CheckResult { passed, detail })
}
