use std::path::Path;
use std::process::{Command, Output};

const EXPONENTS: &str = r#""exponents": { "a": 2.0, "delta": 0.1, "beta": 2.5, "gamma": 3.0, "b": 1.5 }"#;

fn obss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obss")).args(args).output().expect("spawn obss")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn reference_exponents_are_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{{ {EXPONENTS} }}"));
    let o = obss(&["check-exponents", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "feasible");
}

#[test]
fn infeasible_exponents_exit_with_two_and_list_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "exponents": { "a": 2.0, "delta": 0.1, "beta": 4.5, "gamma": 3.0, "b": 1.5 } }"#);
    let o = obss(&["check-exponents", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("2a > beta"), "{}", stdout(&o));
    let out = dir.path().join("demo");
    let o = obss(&["demo", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("infeasible"), "{}", stderr(&o));
}

#[test]
fn malformed_config_reports_line_and_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"exponents\": { \"a\": 2.0,\n    \"beta\": \"x\" }\n}");
    let o = obss(&["construct", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), &format!("{{ {EXPONENTS}, \"grid\": {{ \"n\": 32, \"sides\": 3 }} }}"));
    let o = obss(&["check-exponents", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sides"), "{}", stderr(&o));
}

#[test]
fn missing_config_flag_is_a_configuration_error() {
    let o = obss(&["check-exponents"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synthetic_spectrum_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{{ {EXPONENTS} }}"));
    let mut files = Vec::new();
    for run in ["one", "two"] {
        let out = dir.path().join(run);
        let o = obss(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        files.push(std::fs::read(out.join("spectrum.json")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let v: serde_json::Value = serde_json::from_slice(&files[0]).unwrap();
    assert!((v["re_lambda"].as_f64().unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn synthetic_demo_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    // coarse settings: the full-resolution run is exercised by the acceptance target
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{ {EXPONENTS},
                "stepper": {{ "dt": 0.004 }},
                "construct": {{ "coefficients": [1.0, 3.0], "tol": 1e-6, "residual_stride": 5 }},
                "mode": "synthetic" }}"#
        ),
    );
    let out = dir.path().join("demo");
    let o = obss(&["demo", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    for f in ["forcing.obss", "bundle_1.obss", "bundle_3.obss", "separation.csv", "residuals.csv", "summary.json", "picard_1.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let text = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["mode"], "synthetic");
    for key in ["a", "beta", "gamma", "b", "tau0", "residual_max", "separation_min", "generated_at"] {
        assert!(v.get(key).is_some(), "summary lacks {key}");
    }
    assert!(v["residual_max"].as_f64().unwrap() <= 1e-3);
    assert!(v["separation_min"].as_f64().unwrap() > 0.0);

    let snap = obss::grid::read_snapshot(&out.join("bundle_1.obss")).unwrap();
    assert_eq!(snap.components.len(), 4);
    assert_eq!(snap.n, 32);
}
