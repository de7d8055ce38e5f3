use std::path::Path;
use std::process::{Command, Output};

fn dp_pmse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dp-pmse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

fn write_input(path: &Path) {
    let mut text = String::from("x,y\n");
    for i in 0..60 {
        let x = (i as f64 * 0.37).sin() * 10.0 + 2.0;
        text.push_str(&format!(
            "{x},{}\n",
            -2.5 + 0.5 * x + (i as f64 * 1.3).cos()
        ));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"sims": 50, "n": 40, "depths": [1], "cps": [0.01], "seed": 3}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = dp_pmse(&[
        "failure-rate",
        "--config",
        cfg.to_str().unwrap(),
        "--sims",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("failure-rate.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["sims"], 3);
    assert_eq!(report["config"]["n"], 40);
    assert_eq!(report["config"]["seed"], 3);
    assert_eq!(report["cells"].as_array().unwrap().len(), 1);
}

#[test]
fn runtime_errors_are_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dp_pmse(&[
        "failure-rate",
        "--sims",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");

    let out = dp_pmse(&["synthesize", "--input", "/nonexistent.csv", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "io");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3,x\n").unwrap();
    let out = dp_pmse(&["synthesize", "--input", bad.to_str().unwrap(), "--out", "x"]);
    assert_eq!(error_line(&out)["error"], "parse");

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "regress-eval"}"#).unwrap();
    let out = dp_pmse(&["pmse-eval", "--config", cfg.to_str().unwrap(), "--out", "x"]);
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn usage_errors_exit_two() {
    let out = dp_pmse(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");
    let out = dp_pmse(&["pmse-eval", "--depths", "zero"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dp_pmse(&["--help"]).status.success());
}

#[test]
fn synthesize_writes_release() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    write_input(&input);
    let out_dir = dir.path().join("release");
    let out = dp_pmse(&[
        "synthesize",
        "--input",
        input.to_str().unwrap(),
        "--epsilon",
        "2",
        "--l",
        "3",
        "--m",
        "1",
        "--depth",
        "3",
        "--iterations",
        "5",
        "--burn-in",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let release: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("release.json")).unwrap())
            .unwrap();
    assert_eq!(release["epsilon_spent"], 2.0);
    assert_eq!(release["thetas"].as_array().unwrap().len(), 3);
    for i in 1..=3 {
        let text = std::fs::read_to_string(out_dir.join(format!("synthetic_{i}.csv"))).unwrap();
        assert!(text.starts_with("x,y\n"));
        assert_eq!(text.lines().count(), 61);
    }
}
