//! End-to-end runs of the command-line binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_globalctl"))
}

fn json(out: &std::process::Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn dla_check_reports_both_backends() {
    let out = bin().args(["dla-check", "--n", "3", "--break-sites", "1", "--backend", "both"]).output().unwrap();
    let v = json(&out);
    assert_eq!(v["backends_agree"], true);
    assert_eq!(v["results"][0]["dimension"], 63);
    assert_eq!(v["results"][1]["verdict"], "universal");
}

#[test]
fn dla_check_sector_with_ablation() {
    let full = json(&bin().args(["dla-check", "--sector", "boson", "--sites", "3", "--particles", "2"]).output().unwrap());
    assert_eq!(full["dimension"], 36);
    let cut = json(
        &bin().args(["dla-check", "--sector", "boson", "--sites", "3", "--particles", "2", "--drop", "U"]).output().unwrap(),
    );
    assert!(cut["dimension"].as_u64().unwrap() < 36);
}

#[test]
fn nnn_verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nnn.json");
    let st = bin().args(["nnn-verify", "--rows", "3", "--cols", "3", "--out"]).arg(&path).status().unwrap();
    assert!(st.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["identities"].as_array().unwrap().len(), 8);
}

#[test]
fn scenario_list_and_run() {
    let out = bin().args(["scenario", "list"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("blockade-nogo") && text.contains("noise-forward"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"pxp_schedules": 2}"#).unwrap();
    let res = dir.path().join("res");
    let st = bin().args(["scenario", "run", "blockade-nogo", "--out"]).arg(&res).arg("--config").arg(&cfg).status().unwrap();
    assert!(st.success());
    let inputs: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(res.join("inputs.json")).unwrap()).unwrap();
    assert_eq!(inputs["schedules"], 2);
}

#[test]
fn unknown_scenario_fails() {
    let st = bin().args(["scenario", "run", "nope"]).status().unwrap();
    assert!(!st.success());
}

#[test]
fn short_grape_synthesis_writes_pulse_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (pulse, report) = (dir.path().join("p.csv"), dir.path().join("r.json"));
    let st = bin()
        .args(["synthesize", "--method", "grape", "--T", "0.3", "--seeds", "1", "--out"])
        .arg(&pulse)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert!(st.success());
    let p = globalctl::propagation::ControlPulse::load(&pulse).unwrap();
    assert_eq!(p.len(), 7);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["provenance"]["software"], "globalctl");
    assert_eq!(r["settings"]["knots"], 7);
}
