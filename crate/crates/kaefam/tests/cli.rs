use std::path::Path;
use std::process::Command;

use kaefam::config::sha256_hex;
use kaefam::parse_config;
use serde_json::Value;

fn kaefam(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_kaefam")).args(args).output().unwrap();
    out.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn verify_pass_writes_a_complete_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"grid": {"resolution": 16}, "family": {"potential": "0"}, "output": {"timings": true}}"#);
    let out = dir.path().join("bundle");
    assert_eq!(kaefam(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    for f in ["verify.csv", "summary.json", "manifest.json", "plot.py", "timings.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest = json(&out.join("manifest.json"));
    for (name, hash) in manifest["files"].as_object().unwrap() {
        assert_eq!(hash.as_str().unwrap(), sha256_hex(&std::fs::read(out.join(name)).unwrap()));
    }
    assert!(manifest["files"].get("timings.json").is_none());
    assert_eq!(manifest["config_sha256"].as_str().unwrap(), sha256_hex(&std::fs::read(&cfg).unwrap()));
    // the echoed configuration parses back to the one that ran
    let echoed = serde_json::to_vec(&manifest["config"]).unwrap();
    let original = parse_config(&std::fs::read(&cfg).unwrap(), &[]).unwrap();
    assert_eq!(parse_config(&echoed, &[]).unwrap().config, original.config);
    let csv = std::fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",1.0000000000000000e0,0.0000000000000000e0"), "{csv}");
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"grid": {"resolution": 48}, "family": {"potential": "0"}}"#);
    assert_eq!(kaefam(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]), 3);
    let cfg = write_config(dir.path(), r#"{"family": {"potential": "0"}}"#);
    let out = dir.path().join("o");
    assert_eq!(kaefam(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--override", "grid.tau_im=-1"]), 3);
    assert!(!out.exists());
}

#[test]
fn non_semipositive_twist_is_refused_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"grid": {"resolution": 16}, "family": {"potential": "2*re(t)*cosm(1,0)", "base_points": [[0.5, 0]]}}"#,
    );
    let out = dir.path().join("refused");
    assert_eq!(kaefam(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["status"], "verification_failure");
    assert!(summary["warnings"][0].as_str().unwrap().contains("allow_non_psd"));
    assert!(!out.join("verify.csv").exists());

    let out = dir.path().join("allowed");
    let code = kaefam(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--override", "family.allow_non_psd=true"]);
    assert_ne!(code, 2);
    assert!(out.join("solve.csv").exists());
}

#[test]
fn overrides_are_recorded_and_output_directory_is_not() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"family": {"potential": "0"}}"#);
    let out = dir.path().join("b");
    let code = kaefam(&[
        "bergman",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--override",
        "bergman.m_list=[5,10]",
        "--override",
        "bergman.degree=20",
    ]);
    assert_eq!(code, 0);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["overrides"], serde_json::json!(["bergman.m_list=[5,10]", "bergman.degree=20"]));
    assert_eq!(manifest["config"]["bergman"]["m_list"], serde_json::json!([5, 10]));
    assert_eq!(manifest["config"]["output"]["directory"], "kaefam-out");
    let rows = std::fs::read_to_string(out.join("bergman.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
}
