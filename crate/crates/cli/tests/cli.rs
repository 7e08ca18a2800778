use std::fs;
use std::path::Path;
use std::process::Command;

use genpoisson_cli::run_with;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["genpoisson"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn materialize(dir: &Path, name: &str) -> String {
    let (code, _, err) = run(&["example", name, "--output", dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    dir.join(format!("{name}.toml")).to_str().unwrap().to_string()
}

#[test]
fn every_preset_passes_its_own_checks() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["kmk", "separable-lv", "constant"] {
        let spec = materialize(dir.path(), name);
        for cmd in ["verify", "casimirs", "darboux"] {
            let (code, out, err) = run(&[cmd, "--spec", &spec, "--points", "40", "--seed", "7"]);
            assert_eq!(code, 0, "{name} {cmd}\n{out}\n{err}");
            assert!(out.contains("result:                      PASS"), "{out}");
        }
    }
}

#[test]
fn kmk_verify_reports_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let spec = materialize(dir.path(), "kmk");
    let outdir = dir.path().join("out");
    let (code, _, _) = run(&["verify", "--spec", &spec, "--points", "100", "--seed", "7", "--output", outdir.to_str().unwrap()]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(outdir.join("verify.json")).unwrap()).unwrap();
    assert!(json["report"]["max_jacobi_normalized"].as_f64().unwrap() < 1e-9);
    assert_eq!(json["report"]["points"], 100);
    assert_eq!(json["pass"], true);
}

#[test]
fn example_with_rate_parameter() {
    let (code, out, _) = run(&["example", "kmk", "--r", "2.5"]);
    assert_eq!(code, 0);
    assert!(out.contains("a = 1.5811388300841898"), "{out}");
    let (code, _, err) = run(&["example", "lorenz"]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown example"));
}

#[test]
fn non_skew_spec_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "n = 2\nS = [[\"0\", \"1\"], [\"1\", \"0\"]]\n[[psi]]\nkind = \"constant\"\nc = 1\n[[psi]]\nkind = \"constant\"\nc = 1\n",
    )
    .unwrap();
    let (code, _, err) = run(&["verify", "--spec", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("S[1][2]"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["verify"]).0, 2);
    assert_eq!(run(&["verify", "--spec", "/nonexistent/spec.toml"]).0, 2);
    assert_eq!(run(&["integrate", "--spec", "x", "--method", "euler"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = materialize(dir.path(), "separable-lv");
    for cmd in ["verify", "casimirs", "darboux", "integrate"] {
        let mut files = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{cmd}{k}"));
            let (code, _, err) = run(&[
                cmd, "--spec", &spec, "--points", "30", "--seed", "11", "--t-end", "1", "--dt", "0.01", "--output",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "{err}");
            let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
            names.sort();
            files.push(names.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
        }
        assert!(!files[0].is_empty());
        assert_eq!(files[0], files[1], "{cmd}");
    }
}

#[test]
fn integrate_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = materialize(dir.path(), "kmk");
    let out = dir.path().join("traj");
    let (code, _, err) = run(&["integrate", "--spec", &spec, "--t-end", "1", "--dt", "0.01", "--method", "rk45", "--tol", "1e-10", "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3,H,D1");
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!((last[5] - 6.0).abs() < 1e-12);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("integrate.json")).unwrap()).unwrap();
    assert_eq!(json["options"]["method"], "rk45");
}

#[test]
fn domain_exit_fails_with_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exit.toml");
    fs::write(
        &path,
        "n = 2\nS = [[\"0\", \"1\"], [\"-1\", \"0\"]]\nhamiltonian = \"-x2\"\n\
         [[psi]]\nkind = \"constant\"\nc = 1\ndomain = [0, \"inf\"]\nanchor = 1\n\
         [[psi]]\nkind = \"constant\"\nc = 1\n\
         [integrator]\nx0 = [1, 0]\nt_end = 3\ndt = 0.3\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = run(&["integrate", "--spec", path.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("coordinate 1"), "{err}");
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_genpoisson");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["example", "constant", "--output"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let spec = dir.path().join("constant.toml");
    let out = Command::new(bin).arg("casimirs").arg("--spec").arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("number of Casimirs:          2"));
    let out = Command::new(bin).arg("bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
