use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linkscope"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PAIR: &str = r#"{"p_i":0.01,"p_j":0.01,"p_di":0.8,"p_dj":0.8,"p_ri":0.0,"p_rj":0.9,"p_dri":0.5,"p_drj":0.5}"#;

#[test]
fn simulate_infer_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("net.trace");
    let sim: Value = serde_json::from_str(&ok(&[
        "simulate",
        "net",
        "--duration",
        "0.5",
        "--seed",
        "3",
        "--out",
        path(&trace),
    ]))
    .unwrap();
    assert_eq!(sim["schema"], "linkscope.simulation/v1");
    assert_eq!(sim["radios"], 8);
    assert!(dir.path().join("net.links").exists());

    let est = dir.path().join("est.csv");
    ok(&["infer", "--trace", path(&trace), "--out", path(&est)]);
    let text = std::fs::read_to_string(&est).unwrap();
    assert!(text.starts_with(
        "# schema: linkscope.decisions/v1\ni,j,tau_hat,statistic,threshold,decision,method\n"
    ));
    assert_eq!(text.lines().count(), 2 + 8 * 7);

    let links = dir.path().join("net.links");
    let score: Value = serde_json::from_str(&ok(&[
        "score",
        "--est",
        path(&est),
        "--truth",
        path(&links),
    ]))
    .unwrap();
    assert_eq!(score["schema"], "linkscope.score/v1");
    assert_eq!(score["true_links"], 6);
    assert_eq!(score["detected_fraction"], 1.0);
}

#[test]
fn every_method_writes_the_same_schema() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    ok(&[
        "simulate",
        "net",
        "--scenario",
        "pair",
        "--duration",
        "0.3",
        "--out",
        path(&trace),
    ]);
    for method in ["atelnet", "linear", "hard", "soft"] {
        let csv = ok(&["infer", "--method", method, "--trace", path(&trace)]);
        assert!(csv.lines().skip(2).all(|l| l.ends_with(method)), "{method}");
        let json: Value = serde_json::from_str(&ok(&[
            "infer",
            "--method",
            method,
            "--trace",
            path(&trace),
            "--format",
            "json",
        ]))
        .unwrap();
        assert_eq!(json["schema"], "linkscope.report/v1");
        assert_eq!(json["decisions"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn markov_commands() {
    let dir = tempfile::tempdir().unwrap();
    let analysis: Value = serde_json::from_str(&ok(&["analyze", "mc", "--params", PAIR])).unwrap();
    assert_eq!(analysis["schema"], "linkscope.mc-analysis/v1");
    assert!((analysis["steady_state_sum"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let a3 = analysis["ate_closed"]["3"].as_f64().unwrap();
    assert!(a3 > 100.0 * analysis["ate_closed"]["2"].as_f64().unwrap());

    let file = dir.path().join("timing.json");
    std::fs::write(
        &file,
        r#"{"ts":5e-6,"frame_i":1e-3,"idle_i":1e-2,"frame_j":1e-3,"idle_j":1e-2,"resp_i":5e-5,"resp_j":5e-5,"p_ri":0,"p_rj":0}"#,
    )
    .unwrap();
    let physical: Value =
        serde_json::from_str(&ok(&["analyze", "mc", "--params", path(&file)])).unwrap();
    let a1 = physical["ate_closed"]["1"].as_f64().unwrap();
    assert!((1e-8..1e-6).contains(&a1));

    let trace = dir.path().join("mc.trace");
    ok(&[
        "simulate",
        "mc",
        "--params",
        PAIR,
        "--samples",
        "200000",
        "--seed",
        "4",
        "--out",
        path(&trace),
    ]);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("mc.links"))
            .unwrap()
            .trim(),
        "1,2"
    );
    let profile = ok(&["profile", "--trace", path(&trace), "--i", "1", "--j", "2"]);
    assert!(profile.starts_with("# schema: linkscope.profile/v1\ntau,ate,selected\n"));
    assert!(profile
        .lines()
        .any(|l| l.starts_with("3,") && l.ends_with(",1")));
}

#[test]
fn experiment_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "scenario = \"pair\"\nmethods = [\"atelnet\"]\ntrials = 2\n[grid]\ndurations_s = [0.2]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let res: Value = serde_json::from_str(&ok(&[
        "experiment",
        "--config",
        path(&cfg),
        "--out",
        path(&out),
    ]))
    .unwrap();
    assert_eq!(res["files"].as_array().unwrap().len(), 2);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("# schema: linkscope.summary/v1\n"));
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.trace");
    std::fs::write(&bad, "#ts 5e-6\n#n 10\n#m 1\n1,4,2\n").unwrap();
    let out = run(&["infer", "--trace", path(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!run(&["analyze", "mc", "--params", r#"{"p_i": 2}"#])
        .status
        .success());
    assert!(
        !run(&["profile", "--trace", path(&bad), "--i", "0", "--j", "1"])
            .status
            .success()
    );
}
