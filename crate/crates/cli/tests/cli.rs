use std::path::Path;
use std::process::{Command, Output};

fn hjqm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjqm")).args(args).env_remove("HJQM_OUT_DIR").output().unwrap()
}

fn run_into(scenario: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = hjqm(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn column(csv_path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(csv_path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn list_is_sorted() {
    let o = hjqm(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert!(names.windows(2).all(|w| w[0] < w[1]));
    assert!(names.contains(&"focusing_caustic") && names.contains(&"born_two_state"));
}

#[test]
fn free_gaussian_spreads_at_the_textbook_rate() {
    let dir = tempfile::tempdir().unwrap();
    run_into("free_gaussian", dir.path(), &[]);
    let ts = dir.path().join("timeseries.csv");
    let (t, var_x) = (column(&ts, "time"), column(&ts, "var_x"));
    let t_last = *t.last().unwrap();
    assert!((t_last - 3.0).abs() < 1e-12);
    let expected = (1.0 + (t_last / 2.0).powi(2)).sqrt();
    assert!((var_x.last().unwrap().sqrt() - expected).abs() < 1e-4);
    assert!(dir.path().join("manifest.toml").is_file());
}

#[test]
fn plane_wave_continuity_residual_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    run_into("plane_wave", dir.path(), &[]);
    let res = column(&dir.path().join("timeseries.csv"), "continuity_l2");
    assert!(!res.is_empty());
    assert!(res.iter().all(|r| *r < 1e-10), "{res:?}");
}

#[test]
fn negative_dt_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = hjqm(&["run", "free_gaussian", "--out-dir", dir.path().to_str().unwrap(), "--override", "run.dt=-0.01"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("run.dt"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = hjqm_scenario("plane_wave").replace("[run]", "[run]\nsubsteps = 4");
    std::fs::write(&cfg, text).unwrap();
    let o = hjqm(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn hjqm_scenario(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run_into("plane_wave", d.path(), &["--override", "run.t_final=0.3"]);
    }
    for f in ["timeseries.csv", "trajectories.csv", "manifest.toml"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hjqm"))
        .args(["run", "delta_limit"])
        .env("HJQM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("delta_limit.csv").is_file());
}
