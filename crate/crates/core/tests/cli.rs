use std::fs;
use std::path::Path;

use ksmotility::experiments::cli_main;
use ksmotility::io::{read_checkpoint, read_series, write_snapshot, Manifest, SERIES_HEADER};
use ksmotility::{Field, Grid};

fn ksm(args: &[&str]) -> i32 {
    let mut argv = vec!["ksm"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_RUN: &str = r#"
[experiment]
kind = "run"
output_dir = "out"

[grid]
nx = 12
ny = 12

[run]
t_end = 0.5
sample_every = 2

[initial]
kind = "perturbed"
mass = 3.0
amplitude = 0.2

[check]
outcome = "bounded"
"#;

#[test]
fn validate_config_accepts_good_file() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "good.toml", SMALL_RUN);
    assert_eq!(ksm(&["validate-config", &p]), 0);
}

#[test]
fn missing_config_exits_1() {
    assert_eq!(ksm(&["run", "/nonexistent/missing.cfg"]), 1);
    assert_eq!(ksm(&["validate-config", "/nonexistent/missing.cfg"]), 1);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(ksm(&["explode", "x.toml"]), 1);
    assert_eq!(ksm(&["run"]), 1);
    assert_eq!(ksm(&["run", "x.toml", "--bogus"]), 1);
    assert_eq!(ksm(&[]), 1);
    assert_eq!(ksm(&["--help"]), 0);
}

#[test]
fn bad_configs_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let typo = write(d.path(), "typo.toml", &SMALL_RUN.replace("sample_every", "sample_evry"));
    assert_eq!(ksm(&["validate-config", &typo]), 1);
    let p = write(d.path(), "run.toml", SMALL_RUN);
    // the file describes a run, not a steady scan
    assert_eq!(ksm(&["steady", &p]), 1);
}

#[test]
fn run_writes_series_checkpoint_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "run.toml", SMALL_RUN);
    assert_eq!(ksm(&["run", &p, "--check"]), 0);
    let out = d.path().join("out");
    let text = fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), SERIES_HEADER);
    assert_eq!(text.matches(SERIES_HEADER).count(), 1);
    let rows = read_series(&out.join("series.csv")).unwrap();
    assert!(rows.len() >= 3);
    let state = read_checkpoint(&out.join("final")).unwrap();
    assert!((state.t - 0.5).abs() < 1e-12);
    assert!((state.mass() - 3.0).abs() < 1e-10);
    let m = Manifest::read(&out.join("manifest.toml")).unwrap();
    assert_eq!(m.experiment, "run");
    assert_eq!(m.outcome, "bounded");
    assert_eq!(m.summary["check"], "pass");
    assert!(m.wall_clock_seconds.is_none());
    assert!(m.config.contains("mass = 3.0"));
}

#[test]
fn failed_check_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let p = write(
        d.path(),
        "run.toml",
        &SMALL_RUN.replace("outcome = \"bounded\"", "outcome = \"blowup_suspected\""),
    );
    assert_eq!(ksm(&["run", &p, "--check"]), 3);
    // without --check the same run is a success
    assert_eq!(ksm(&["run", &p]), 0);
}

#[test]
fn solver_failure_exits_2() {
    let d = tempfile::tempdir().unwrap();
    // one CG iteration cannot reach 1e-15
    let text = SMALL_RUN.replace("[run]", "[control]\nsolver_tol = 1e-300\n\n[run]");
    let p = write(d.path(), "run.toml", &text);
    assert_eq!(ksm(&["run", &p]), 2);
    assert!(d.path().join("out/manifest.toml").exists());
}

#[test]
fn file_initial_data_is_read_relative_to_config() {
    let d = tempfile::tempdir().unwrap();
    let g = Grid::unit_square(12).unwrap();
    let u = Field::from_fn(g, |x, y| 2.0 + (3.0 * x).cos() * y);
    let v = Field::constant(g, 1.0);
    write_snapshot(&u, 0.0, &d.path().join("u0.snap")).unwrap();
    write_snapshot(&v, 0.0, &d.path().join("v0.snap")).unwrap();
    let text = r#"
[experiment]
kind = "run"
output_dir = "from_file"
[grid]
nx = 12
ny = 12
[run]
t_end = 0.2
[initial]
kind = "file"
u = "u0.snap"
v = "v0.snap"
"#;
    let p = write(d.path(), "file.toml", text);
    assert_eq!(ksm(&["run", &p]), 0);
    let mismatched = write(d.path(), "bad.toml", &text.replace("nx = 12", "nx = 10"));
    assert_eq!(ksm(&["run", &mismatched]), 1);
}

#[test]
fn bubble_energy_check_at_fine_grid() {
    let d = tempfile::tempdir().unwrap();
    let text = r#"
[experiment]
kind = "bubble-energy"
output_dir = "be"
[grid]
nx = 256
ny = 256
[bubble_energy]
mass = 25.132741228718345
epsilons = [0.2, 0.1, 0.05, 0.025]
"#;
    let p = write(d.path(), "be.toml", text);
    assert_eq!(ksm(&["bubble-energy", &p, "--check"]), 0);
    let table = fs::read_to_string(d.path().join("be/bubble_energy.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);

    // a deliberately wrong expectation must fail the check
    let wrong = write(d.path(), "wrong.toml", &format!("{text}[check]\nslope = -40.0\n"));
    assert_eq!(ksm(&["bubble-energy", &wrong, "--check"]), 3);
}

#[test]
fn steady_and_dissipation_subcommands() {
    let d = tempfile::tempdir().unwrap();
    let steady = write(
        d.path(),
        "steady.toml",
        "[experiment]\nkind = \"steady\"\noutput_dir = \"st\"\n[grid]\nnx = 16\nny = 16\n[steady]\nmasses = [0.5, 1.0]\n",
    );
    assert_eq!(ksm(&["steady", &steady, "--check"]), 0);
    let table = fs::read_to_string(d.path().join("st/steady_scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    let diss = write(
        d.path(),
        "diss.toml",
        "[experiment]\nkind = \"dissipation-check\"\noutput_dir = \"dc\"\n[grid]\nnx = 16\nny = 16\n[run]\nt_end = 0.2\n[initial]\nkind = \"perturbed\"\nmass = 4.0\namplitude = 0.3\n",
    );
    assert_eq!(ksm(&["dissipation-check", &diss, "--check"]), 0);
    assert!(d.path().join("dc/ladder/rung_02.csv").exists());
}

#[test]
fn critical_mass_bracket_error_exits_1() {
    let d = tempfile::tempdir().unwrap();
    // default threshold never flags these runs, so the upper end stays bounded
    let p = write(
        d.path(),
        "cm.toml",
        "[experiment]\nkind = \"critical-mass\"\noutput_dir = \"cm\"\n[grid]\nnx = 16\nny = 16\n[run]\nt_end = 0.5\n[critical_mass]\nbracket = [1.0, 2.0]\niterations = 2\n",
    );
    assert_eq!(ksm(&["critical-mass", &p]), 1);
    // the endpoint trials were still persisted
    assert!(d.path().join("cm/trials/trial_01.csv").exists());
}

#[test]
fn timing_flag_records_wall_clock() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "run.toml", SMALL_RUN);
    let out = d.path().join("timed");
    assert_eq!(ksm(&["run", &p, "--timing", "-o", out.to_str().unwrap()]), 0);
    let m = Manifest::read(&out.join("manifest.toml")).unwrap();
    assert!(m.wall_clock_seconds.unwrap() >= 0.0);
}
