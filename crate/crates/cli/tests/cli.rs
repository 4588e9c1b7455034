use std::process::Command;

use clap::Parser;
use erms_cli::{run, Cli};
use serde_json::Value;

fn erms(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_erms")).args(args).output().unwrap();
    (
        out.status.success(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn run_capture(args: &[&str]) -> anyhow::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("erms").chain(args.iter().copied()))?;
    let mut buf = Vec::new();
    run(cli, &mut buf)?;
    Ok(String::from_utf8(buf).unwrap())
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    serde_json::from_str(&run_capture(&all).unwrap()).unwrap()
}

fn scenario_path() -> String {
    format!("{}/../core/scenarios/gas_compressor.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn validate_bundled_scenario() {
    let (ok, stdout, _) = erms(&["validate", "--scenario", &scenario_path()]);
    assert!(ok);
    assert!(stdout.starts_with("ok: scenario `gas-compressor`"));
    let v = json(&["validate"]);
    assert_eq!(v["valid"], true);
    assert_eq!(v["levels"].as_array().unwrap().len(), 4);
}

#[test]
fn invalid_scenario_fails() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(scenario_path())
        .unwrap()
        .replacen("\"p\": 0.03", "\"p\": 0.001", 1);
    std::fs::write(&bad, text).unwrap();
    let (ok, _, stderr) = erms(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert!(!ok);
    assert!(stderr.contains("error"), "{stderr}");
    let (ok, _, _) = erms(&["validate", "--scenario", "/no/such/file.json"]);
    assert!(!ok);
    let (ok, _, _) = erms(&["diagnose", "--evidence", "{\"ghost\":\"x\"}"]);
    assert!(!ok);
}

#[test]
fn diagnose_prior_and_evidence_file() {
    let v = json(&["diagnose"]);
    let probs: Vec<f64> = v["aggregate"]["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect();
    for (a, e) in probs.iter().zip([0.90, 0.08, 0.02]) {
        assert!((a - e).abs() < 1e-12);
    }
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev.json");
    std::fs::write(&ev, r#"{"ld_a": "alarm"}"#).unwrap();
    let from_file = json(&["diagnose", "--evidence", ev.to_str().unwrap()]);
    let inline = json(&["diagnose", "--evidence", r#"{"ld_a": "alarm"}"#]);
    assert_eq!(from_file, inline);
    assert_ne!(from_file, v);
}

#[test]
fn zero_ignition_loss_chooses_level_zero() {
    let v = json(&["recommend", "--ignition-loss", "0", "--evidence", r#"{"ld_a":"alarm","pd_a":"low"}"#]);
    assert_eq!(v["chosen"], 0);
    assert_eq!(v["chosen_name"], "continue");
}

#[test]
fn recommend_single_horizon_and_level_name() {
    let v = json(&["recommend", "--horizon", "20", "--level", "partial", "--delay", "5"]);
    assert_eq!(v["horizon_used"], 20.0);
    assert!(v["ranked"][0]["ignition_prob_at_decision"].as_f64().unwrap() > 0.0);
    assert!(run_capture(&["recommend", "--level", "warp"]).is_err());
    assert!(run_capture(&["recommend", "--level", "9"]).is_err());
}

#[test]
fn plan_output_and_seed() {
    let v = json(&["plan", "--constraints", r#"{"max_tests":1,"max_total_time":45,"max_total_cost":10000,"expansion_budget":1}"#]);
    assert_eq!(v["plan"]["expansions_used"], 1);
    assert_eq!(v["act_now"]["chosen_name"], "partial");
    assert_eq!(v["plan"]["act_now_eu"], v["act_now"]["ranked"][0]["expected_utility"]);
    let a = json(&["plan", "--heuristic", "probability-weighted", "--seed", "5"]);
    let b = json(&["plan", "--heuristic", "probability-weighted", "--seed", "5"]);
    assert_eq!(a, b);
    assert_eq!(a["plan"]["constraints"]["seed"], 5);
    let table = run_capture(&["plan"]).unwrap();
    assert!(table.contains("first action"));
}

#[test]
fn simulate_is_byte_identical_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let (ok, _, err) = erms(&["simulate", "--trajectories", "20000", "--seed", "9", "--out", path.to_str().unwrap()]);
        assert!(ok, "{err}");
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,level,ignition_prob,mean_cost");
    // 480 time units at 5 per step, plus the starting row, for 4 levels.
    assert_eq!(text.lines().count(), 1 + 97 * 4);
    let (ok, _, _) = erms(&["simulate", "--trajectories", "0"]);
    assert!(!ok);
}

#[test]
fn identical_inputs_give_identical_output() {
    for args in [
        vec!["diagnose", "--evidence", r#"{"pd_b":"low"}"#],
        vec!["recommend", "--evidence", r#"{"pd_b":"low"}"#, "--format", "json"],
        vec!["plan", "--format", "json"],
    ] {
        let (ok1, a, _) = erms(&args);
        let (ok2, b, _) = erms(&args);
        assert!(ok1 && ok2);
        assert_eq!(a, b);
    }
}
