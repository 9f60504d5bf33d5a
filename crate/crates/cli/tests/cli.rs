use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fusionspec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusionspec"))
        .args(args)
        .current_dir(dir)
        .env_remove("FUSIONSPEC_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fusionspec(&["--help"], dir.path())), 0);
    assert_eq!(code(&fusionspec(&["--version"], dir.path())), 0);
    assert_eq!(code(&fusionspec(&["verify", "--help"], dir.path())), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&fusionspec(&["simulate"], d)), 1);
    assert_eq!(code(&fusionspec(&["nonsense"], d)), 1);
    assert_eq!(code(&fusionspec(&["simulate", "--n", "ten", "--p1", "3", "--p2", "3"], d)), 1);
    let o = fusionspec(&["freeconv", "--a", "mp:c=1,q=2", "--b", "atoms:δ1"], d);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("q=2"));
    assert_eq!(code(&fusionspec(&["freeconv", "--a", "mp:c=1", "--b", "atoms:δ1", "--grid", "3:1:4"], d)), 1);
    assert_eq!(code(&fusionspec(&["power", "--n", "50", "--p1", "5", "--p2", "5", "--threads", "0"], d)), 1);
}

#[test]
fn contract_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // B below the minimum
    assert_eq!(code(&fusionspec(&["calibrate", "--n", "40", "--p1", "5", "--p2", "5", "--b", "10", "--l0", "5"], d)), 2);
    assert_eq!(code(&fusionspec(&["simulate", "--n", "30", "--p1", "5", "--p2", "5", "--sigma=0"], d)), 2);
    // a calibration for another shape
    let o = fusionspec(&["simulate", "--n", "30", "--p1", "6", "--p2", "6", "--emit-data", "--out", "sim"], d);
    assert_eq!(code(&o), 0);
    let o = fusionspec(
        &["calibrate", "--n", "40", "--p1", "6", "--p2", "6", "--b", "100", "--l0", "5", "--out", "cal.json"],
        d,
    );
    assert_eq!(code(&o), 0);
    let o = fusionspec(&["test", "--x", "sim/x.csv", "--y", "sim/y.csv", "--calibration", "cal.json"], d);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("calibration"));
}

#[test]
fn io_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&fusionspec(&["spectrum", "--matrix", "missing.csv"], d)), 3);
    assert_eq!(code(&fusionspec(&["freeconv", "--a", "grid:@missing.csv", "--b", "atoms:δ1"], d)), 3);
    let o = fusionspec(&["verify", "inequalities", "--n", "5", "--draws", "2", "--out", "no/such/dir/r.json"], d);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = fusionspec(
        &["simulate", "--n", "40", "--p1", "20", "--p2", "10", "--emit-chain", "--emit-data", "--out", "run"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = d.join("run");
    let spec = csv_rows(&fs::read_to_string(run.join("spectrum.csv")).unwrap());
    assert_eq!(spec[0], ["rank", "re", "im"]);
    assert_eq!(spec.len(), 41);
    // n²S has its trivial eigenvalue near n²
    let top: f64 = spec[1][1].parse().unwrap();
    assert!((top / 1600.0 - 1.0).abs() < 0.1, "{top}");
    for label in ["ncca", "s1", "s2", "s3", "qxy"] {
        let rows = csv_rows(&fs::read_to_string(run.join(format!("chain_{label}.csv"))).unwrap());
        assert_eq!(rows[0], ["index", "re", "im"], "{label}");
        assert_eq!(rows.len(), 41, "{label}");
    }
    let ratios = csv_rows(&fs::read_to_string(run.join("imag_ratio.csv")).unwrap());
    assert_eq!(ratios[0], ["rank", "ratio"]);
    let x = fs::read_to_string(run.join("x.csv")).unwrap();
    let y = fs::read_to_string(run.join("y.csv")).unwrap();
    // one header line, then p rows of n values
    assert_eq!(x.lines().next().unwrap(), "# p=20 n=40");
    assert_eq!(x.lines().count(), 21);
    assert_eq!(y.lines().count(), 11);
    assert!(x.lines().skip(1).all(|l| l.split(',').count() == 40));
}

#[test]
fn seeds_control_the_draw() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["simulate", "--n", "30", "--p1", "10", "--p2", "10"];
    let a = fusionspec(&args, d).stdout;
    let b = fusionspec(&args, d).stdout;
    let c = fusionspec(&[&args[..], &["--seed", "2"]].concat(), d).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
    let via_env = Command::new(env!("CARGO_BIN_EXE_fusionspec"))
        .args(args)
        .env("FUSIONSPEC_SEED", "2")
        .output()
        .unwrap()
        .stdout;
    assert_eq!(via_env, c);
}

#[test]
fn calibrate_then_test_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["--n", "40", "--p1", "8", "--p2", "8"];
    assert_eq!(code(&fusionspec(&[&["simulate"], &args[..], &["--emit-data", "--out", "s"]].concat(), d)), 0);
    let o = fusionspec(&[&["calibrate"], &args[..], &["--b", "100", "--l0", "10", "--out", "c.json"]].concat(), d);
    assert_eq!(code(&o), 0);
    let cal: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
    assert_eq!(cal["B"], 100);
    assert_eq!(cal["L0"], 10);
    assert_eq!(cal["theta_of_L"].as_array().unwrap().len(), 8);
    assert_eq!(cal["kernel"]["name"], "gaussian");
    let o = fusionspec(&["test", "--x", "s/x.csv", "--y", "s/y.csv", "--calibration", "c.json"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(out["reject"].is_boolean());
    assert_eq!(out["L_star"], cal["L_star"]);
    assert_eq!(out["theta_star"], cal["theta_star"]);
    // a kernel other than the calibrated one is refused
    let o = fusionspec(&["test", "--x", "s/x.csv", "--y", "s/y.csv", "--calibration", "c.json", "--sigma", "2"], d);
    assert_eq!(code(&o), 2);
}

#[test]
fn power_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = fusionspec(
        &["power", "--n", "30,40", "--p1", "30", "--p2", "30", "--b-calib", "100", "--b-power", "10", "--l0", "8"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows[0], ["n", "p1", "p2", "theta_star", "L_star", "rejections", "trials", "power"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "30");
    assert_eq!(rows[2][0], "40");
    for r in &rows[1..] {
        let rejections: f64 = r[5].parse().unwrap();
        let power: f64 = r[7].parse().unwrap();
        assert_eq!(r[6], "10");
        assert_eq!(power, rejections / 10.0);
    }
}

#[test]
fn spectrum_of_a_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // a rotation by 90° scaled by 2, plus a 3 on the diagonal
    fs::write(d.join("m.csv"), "0,-2,0\n2,0,0\n0,0,3\n").unwrap();
    let o = fusionspec(&["spectrum", "--matrix", "m.csv"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    let vals: Vec<(f64, f64)> = rows[1..].iter().map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap())).collect();
    assert_eq!(vals.len(), 3);
    assert!((vals[0].0 - 3.0).abs() < 1e-12 && vals[0].1 == 0.0);
    assert!(vals[1].0.abs() < 1e-12 && (vals[1].1 - 2.0).abs() < 1e-12);
    assert!(vals[2].0.abs() < 1e-12 && (vals[2].1 + 2.0).abs() < 1e-12);
}

#[test]
fn freeconv_identity_reproduces_the_law() {
    let dir = tempfile::tempdir().unwrap();
    let o = fusionspec(&["freeconv", "--a", "mp:c=0.5", "--b", "atoms:δ1", "--grid", "0.2:2.8:14"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows[0], ["x", "density"]);
    assert_eq!(rows.len(), 15);
    // MP(c = 1/2): density √((b−x)(x−a)) / (2π c x) on [(1−√c)², (1+√c)²]
    let (a, b) = ((1.0 - 0.5f64.sqrt()).powi(2), (1.0 + 0.5f64.sqrt()).powi(2));
    for r in &rows[1..] {
        let x: f64 = r[0].parse().unwrap();
        let got: f64 = r[1].parse().unwrap();
        let want = if x > a && x < b { ((b - x) * (x - a)).sqrt() / (std::f64::consts::PI * x) } else { 0.0 };
        assert!((got - want).abs() < 2e-3, "x={x}: {got} vs {want}");
    }
}

#[test]
fn freeconv_default_grid_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = fusionspec(&["freeconv", "--a", "mp:c=0.5", "--b", "mp:c=0.25", "--op", "add"], dir.path());
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    let pts: Vec<(f64, f64)> = rows[1..].iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    assert!((mass - 1.0).abs() < 5e-3, "{mass}");
}

#[test]
fn verify_reports_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let json = |args: &[&str]| -> serde_json::Value {
        let o = fusionspec(args, d);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let r = json(&["verify", "rigidity", "--n", "60", "--p", "60"]);
    assert_eq!(r["n"], 60);
    assert!(r["bulk_median"].as_f64().unwrap() >= 0.0);
    let e = json(&["verify", "edge", "--n", "60", "--p1", "60", "--p2", "30", "--l", "6"]);
    assert_eq!(e["gaps"].as_array().unwrap().len(), 4);
    let q = json(&["verify", "inequalities", "--n", "8", "--draws", "5"]);
    assert_eq!(q["hoffman_wielandt_violations"], 0);
    assert_eq!(q["weyl_violations"], 0);
    let m = json(&["verify", "oracle", "--n", "40", "--trials", "2"]);
    assert!(m["kolmogorov"].as_f64().unwrap() < 1.0);
}
