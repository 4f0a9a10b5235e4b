//! Exit codes, artifacts and reproducibility of the command-line harness.

use std::path::Path;
use std::process::{Command, Output};

use hosmc_core::gains::synthesize_gains;
use hosmc_core::{presets, GainSet};
use serde_json::Value;

fn hosmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hosmc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const EQUILIBRIUM: &str = r#"{
  "x0": [0.0, 0.0, 0.0],
  "horizon": 1.0,
  "signals": {
    "matched": {"type": "zero"},
    "delta_bound": 1.0,
    "mismatched": [{"type": "zero"}, {"type": "zero"}, {"type": "zero"}],
    "noise": [0.0, 0.0, 0.0]
  }
}"#;

#[test]
fn equilibrium_run_writes_all_zero_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "zero.json", EQUILIBRIUM);
    let out = tmp.path().join("out");
    let o = hosmc(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory_delayed.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3,y1,y2,y3,u,V,Psi,d,delta_norm,w_norm");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 201);
    for row in rows {
        assert!(row.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{row}");
    }
    let m = manifest(&out);
    let listed: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["file"].as_str().unwrap()).collect();
    for entry in std::fs::read_dir(&out).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(name == "manifest.json" || listed.contains(&name.as_str()), "{name} not in manifest");
    }
    assert_eq!(m["prng"], hosmc_core::PRNG_ID);
}

#[test]
fn malformed_and_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let bad = write(tmp.path(), "bad.json", "{ not json");
    assert_eq!(code(&hosmc(&["run", "--config", &bad, "--out", out])), 2);
    let unknown = write(tmp.path(), "unknown.json", r#"{"horizon": 1.0, "colour": "red"}"#);
    assert_eq!(code(&hosmc(&["run", "--config", &unknown, "--out", out])), 2);
    let invalid = write(tmp.path(), "invalid.json", r#"{"eta": 0.0123}"#);
    assert_eq!(code(&hosmc(&["run", "--config", &invalid, "--out", out])), 2);
    assert_eq!(code(&hosmc(&["run", "--out", out])), 2);
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&hosmc(&["run", "--config", missing.to_str().unwrap(), "--out", out])), 5);
    let cfg = write(tmp.path(), "zero.json", EQUILIBRIUM);
    let blocker = write(tmp.path(), "blocker", "");
    assert_eq!(code(&hosmc(&["run", "--config", &cfg, "--out", &blocker])), 5);
}

#[test]
fn divergence_reports_step() {
    let tmp = tempfile::tempdir().unwrap();
    let unstable = GainSet::from_feedback(
        nalgebra::DVector::from_vec(vec![1e3, 1e3, 1e3]),
        presets::reference_p(),
        1.0,
        0.95,
        1.0,
    )
    .unwrap();
    let doc = format!(r#"{{"gains": {}, "controller": {{"kind": "linear"}}}}"#, unstable.to_json());
    let cfg = write(tmp.path(), "unstable.json", &doc);
    let o = hosmc(&["run", "--config", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("step"));
}

#[test]
fn verify_gains_prints_three_block_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let published = write(tmp.path(), "published.json", &presets::reference_gains().to_json());
    let o = hosmc(&["verify-gains", "--gains", &published]);
    assert_eq!(code(&o), 3);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().next().unwrap().starts_with("PASS"));
    assert!(text.contains("FAIL"));

    let synthesized = synthesize_gains(3, 1.0, 0.95, 1.0).unwrap();
    let good = write(tmp.path(), "synth.json", &synthesized.to_json());
    let o = hosmc(&["verify-gains", "--gains", &good]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

#[test]
fn iss_constants_for_certified_and_published_gains() {
    let tmp = tempfile::tempdir().unwrap();
    let synthesized = synthesize_gains(3, 1.0, 0.95, 1.0).unwrap();
    let good = write(tmp.path(), "synth.json", &synthesized.to_json());
    let o = hosmc(&["iss-constants", "--gains", &good, "--chi", "1.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["iss"]["contraction"], true);
    assert!(doc["gammas"]["lambda_max"].as_f64().unwrap() <= 1e-6);

    let published = write(tmp.path(), "published.json", &presets::reference_gains().to_json());
    assert_eq!(code(&hosmc(&["iss-constants", "--gains", &published, "--chi", "1.1"])), 3);
    assert_eq!(code(&hosmc(&["iss-constants", "--gains", &good, "--chi", "0.9"])), 2);
}

#[test]
fn compare_shares_one_signal_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "short.json", r#"{"horizon": 2.0}"#);
    let out = tmp.path().join("cmp");
    let o = hosmc(&["compare", "--config", &cfg, "--controllers", "delayed,finite_time", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "metric,controller_a,controller_b");
    assert_eq!(lines.next().unwrap(), "controller,delayed,finite_time");
    assert!(table.contains("\ntotal_variation,"));
    let m = manifest(&out);
    assert_eq!(m["shared_signal_path"], true);
    let runs = m["runs"].as_array().unwrap();
    assert_eq!(runs[0]["signal_sha256"], runs[1]["signal_sha256"]);
    assert!(std::fs::read_to_string(out.join("comparison_long.csv")).unwrap().starts_with("controller,t,channel,value\n"));

    assert_eq!(code(&hosmc(&["compare", "--config", &cfg, "--controllers", "delayed", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&hosmc(&["compare", "--config", &cfg, "--controllers", "delayed,pid", "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn require_certified_refuses_published_gains() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "short.json", r#"{"horizon": 0.5}"#);
    let o = hosmc(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap(), "--require-certified"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn demo_scenario_reruns_bit_identically_and_seed_matters() {
    let tmp = tempfile::tempdir().unwrap();
    let demo = tmp.path().join("demo");
    assert_eq!(code(&hosmc(&["paper-demo", "--seed", "42", "--out", demo.to_str().unwrap()])), 0);
    let m = manifest(&demo);
    assert!(m["lmi"]["passed"] == false);
    assert!(m["iss"]["error"].is_string());

    let rerun = tmp.path().join("rerun");
    let scenario = demo.join("scenario_delayed.json");
    let o = hosmc(&["run", "--config", scenario.to_str().unwrap(), "--out", rerun.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let a = std::fs::read(demo.join("trajectory_delayed.csv")).unwrap();
    assert_eq!(a, std::fs::read(rerun.join("trajectory_delayed.csv")).unwrap());

    let other = tmp.path().join("other");
    assert_eq!(code(&hosmc(&["paper-demo", "--seed", "7", "--out", other.to_str().unwrap()])), 0);
    assert_ne!(a, std::fs::read(other.join("trajectory_delayed.csv")).unwrap());
}
