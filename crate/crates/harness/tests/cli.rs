//! End-to-end checks of the `kgs` binary.

use std::process::Command;

fn kgs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kgs"))
}

#[test]
fn run_evolves_and_saves_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let output = kgs()
        .args([
            "run",
            "--scheme",
            "ua1",
            "--c",
            "2",
            "--tau",
            "0.125",
            "--T",
            "0.25",
            "--n",
            "16",
            "--seed",
            "7",
            "--out",
            &out,
            "--save-state",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("ua1 c=2 tau=0.125 steps=2"), "{stdout}");
    assert!(dir.path().join("run.json").exists());
    let state_path = dir.path().join("state_ua1_c2_tau0.125.json");
    assert!(state_path.exists());

    // restart from the dump: the loaded grid (n = 16) takes precedence
    let output2 = kgs()
        .args([
            "run",
            "--scheme",
            "ua1",
            "--c",
            "2",
            "--tau",
            "0.125",
            "--T",
            "0.125",
            "--out",
            &out,
            "--load-state",
            state_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output2.status.success(), "{}", String::from_utf8_lossy(&output2.stderr));
}

#[test]
fn converge_subcommand_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let output = kgs()
        .args([
            "converge",
            "--scheme",
            "ua2",
            "--c",
            "1",
            "--tau-dyadic",
            "3:5",
            "--n",
            "32",
            "--out",
            &out,
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    for ext in ["csv", "svg", "json"] {
        assert!(dir.path().join(format!("convergence_ua2.{ext}")).exists(), "missing {ext}");
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("slope"), "{stdout}");
}

#[test]
fn config_file_layers_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.json");
    std::fs::write(
        &cfg_path,
        format!(
            r#"{{"scheme": "ua1", "c": [1.0], "tau_dyadic": "3:4", "n": 64, "out": "{}"}}"#,
            dir.path().display()
        ),
    )
    .unwrap();
    // flag overrides the file's n
    let output = kgs()
        .args(["converge", "--config", cfg_path.to_str().unwrap(), "--n", "32"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("convergence_ua1.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(json["meta"]["config"]["n"], 32);
}

#[test]
fn shipped_configs_stay_valid() {
    // every example config must parse under strict key checking; run the
    // smallest protocol of one of them end to end
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let raw = std::fs::read_to_string(&path).unwrap();
            let parsed: Result<kgs_harness::FileConfig, _> = serde_json::from_str(&raw);
            assert!(parsed.is_ok(), "{}: {:?}", path.display(), parsed.err());
            count += 1;
        }
    }
    assert!(count >= 3, "expected the example configs to exist");

    let dir = tempfile::tempdir().unwrap();
    let output = kgs()
        .args([
            "run",
            "--config",
            root.join("oracle-gates.json").to_str().unwrap(),
            "--tau",
            "0.25",
            "--n",
            "16",
            "--out",
            &dir.path().display().to_string(),
            "--trace",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(dir.path().join("trace_ua2_c1_tau0.25.csv").exists());
}

#[test]
fn invalid_inputs_produce_clear_errors() {
    // T/tau not an integer
    let output = kgs()
        .args(["run", "--c", "1", "--tau", "0.3", "--T", "1.0", "--n", "16"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("integer"));

    // unknown key in the config file
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.json");
    std::fs::write(&cfg_path, r#"{"frobnicate": true}"#).unwrap();
    let output = kgs()
        .args(["converge", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("unknown field") || err.contains("frobnicate"), "{err}");

    // unknown scheme
    let output = kgs().args(["run", "--scheme", "rk4"]).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown scheme"));
}
