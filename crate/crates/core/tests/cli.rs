use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binarykin")).args(args).current_dir(dir).env("BINARYKIN_THREADS", "1").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn kinematics_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["kinematics-check", "--samples", "20000", "--jacobian-samples", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["max_momentum_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(bin(&["coercivity", "--grid", "many"], dir.path()).status.code(), Some(2));
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["simulate", "--config", "missing.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing.cfg"), "{err}");
}

#[test]
fn bad_config_reports_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "gamma = -4\n").unwrap();
    let o = bin(&["simulate", "--config", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn coercivity_reports_positive_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["coercivity", "--gamma", "-1", "--grid", "7", "--no-split", "--spectrum", "spec.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let delta = v["delta_hat"].as_f64().unwrap();
    assert!(delta > 0.0);
    assert!(v["orthogonality"].as_f64().unwrap() < 1e-8);
    let spec = std::fs::read_to_string(dir.path().join("spec.csv")).unwrap();
    let first: f64 = spec.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - delta).abs() <= 1e-6 * delta, "dense {first} vs iterative {delta}");
}

#[test]
fn simulate_then_moments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "velocity_points = 5\nspatial_points = 4\ndt = 0.05\nt_end = 0.1\n";
    std::fs::write(dir.path().join("run.cfg"), cfg).unwrap();
    let o = bin(&["simulate", "--config", "run.cfg", "--monitors", "m.csv", "--final-state", "f.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "completed");
    assert_eq!(v["steps"], 2);
    let monitors = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(monitors.starts_with("t,conservation_1"));
    assert_eq!(monitors.lines().count(), 4);

    let o = bin(&["moments", "--state", "f.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m["masses"][0], 7.0);
    assert!(m["basis_orthonormality_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(m["a"].as_array().unwrap().len(), 4);
}

#[test]
fn table_commands_print_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["qtest", "--grids", "5,7", "--states", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("points_per_axis,spacing,residual"));
    assert_eq!(text.lines().count(), 3);

    let o = bin(&["kernel-decay", "--speeds", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);
}
