//! End-to-end tests of the binary: exit codes, emitted files, and the
//! config round trip.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracsup"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fracsup")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const MINIMAL: &str = r#"
name = "minimal"

[domain]
shape = "interval"
a = -1.0
b = 1.0
h = 0.05

[measure]
ambient_n = 3
atoms = [ { s = 0.5, p = 2.0, weight = 1.0 } ]

[problem]
kind = "linear"

[solver]
tol_residual = 1e-6
"#;

fn cor1(alpha: f64) -> String {
    format!(
        r#"
name = "cor1 scenario"

[domain]
shape = "interval"
a = -1.0
b = 1.0
h = 0.05

[measure]
ambient_n = 3
preset = "cor1"
p = 2.0
s1 = 0.9
s2 = 0.2
alpha = {alpha}

[problem]
kind = "linear"

[solver]
tol_residual = 1e-6
"#
    )
}

#[test]
fn solve_minimal_writes_outputs_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "min.toml", MINIMAL);
    let out = tmp.path().join("out");
    let res = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    for f in ["solution.csv", "trace.csv", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let sol = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    let mut lines = sol.lines();
    assert_eq!(lines.next(), Some("x,value"));
    // all values parse back as finite decimals
    for line in lines {
        for field in line.split(',') {
            assert!(field.parse::<f64>().unwrap().is_finite());
        }
    }
}

#[test]
fn invalid_s_exits_one_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &MINIMAL.replace("s = 0.5", "s = 1.5"));
    let res = run(&["solve", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("1.5"), "stderr: {err}");
}

#[test]
fn unknown_config_key_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        &MINIMAL.replace("[solver]", "mystery_knob = 3\n[solver]"),
    );
    let res = run(&["solve", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn cor1_small_alpha_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cor1.toml", &cor1(0.05));
    let out = tmp.path().join("out");
    let res = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out.join("solution.csv").exists());
}

#[test]
fn cor1_large_alpha_cites_gamma_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cor1.toml", &cor1(50.0));
    let res = run(&["solve", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    let code = res.status.code();
    assert!(code == Some(2) || code == Some(3), "exit code {code:?}");
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("gamma"), "stderr does not cite the gamma bound: {err}");
}

#[test]
fn verify_appendix1_emits_series_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&[
        "verify",
        "appendix1",
        "--N",
        "2",
        "--eps",
        "0.5",
        "--K",
        "1024",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(tmp.path().join("appendix1_series.csv")).unwrap();
    assert!(csv.starts_with("x,norm_value,energy_value\n"));
    assert!(csv.lines().count() > 5);
}

#[test]
fn mountainpass_reports_positive_critical_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "mp.toml",
        r#"
name = "mp"

[domain]
shape = "interval"
a = 0.0
b = 1.0
h = 0.05

[measure]
ambient_n = 3
atoms = [ { s = 1.0, p = 2.0, weight = 1.0 } ]

[problem]
kind = "nonlinear"
nonlinearity = "powerlaw"
q = 4.0

[solver]
tol_residual = 1e-6
max_iter = 20000
"#,
    );
    let out = tmp.path().join("out");
    let res = run(&["mountainpass", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["critical_value"].as_f64().unwrap() > 0.0);
    assert_eq!(report["termination"], "Converged");
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "min.toml", MINIMAL);
    let (o1, o2) = (tmp.path().join("o1"), tmp.path().join("o2"));
    for o in [&o1, &o2] {
        let res = run(&[
            "solve", "--config", &cfg, "--seed", "7", "--out", o.to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    let a = std::fs::read_to_string(o1.join("solution.csv")).unwrap();
    let b = std::fs::read_to_string(o2.join("solution.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn verify_hypotheses_passes_on_clean_measure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "min.toml", MINIMAL);
    let res = run(&[
        "verify", "hypotheses", "--config", &cfg, "--out", tmp.path().to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
}
