use std::path::Path;
use std::process::{Command, Output, Stdio};

fn ventasm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ventasm"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .env_remove("VENTASM_STATE_BUDGET")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_safety_on_level_one_succeeds() {
    let o = ventasm(&["check", "--model", "1", "--props", "properties/safety.prop"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).matches("verified").count(), 2);
}

#[test]
fn violated_property_exits_one_and_exports_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = ventasm(&["check", "--model", "2", "--props", "safety", "--export-cex", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let cex = dir.path().join("cex_1.avalla");
    // The exported run reproduces the violation: its last invariant check fails.
    let o = ventasm(&["scenario", "--model", "2", "--config", "default", cex.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("after step 4: expected true, found false"));
}

#[test]
fn refine_with_default_glue_succeeds() {
    let o = ventasm(&["refine", "--from", "1", "--to", "2", "--glue", "default"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Verified"));
}

#[test]
fn bundled_scenario_passes() {
    let o = ventasm(&["scenario", "--model", "1", "scenarios/pcv_start.avalla"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("20 checks passed"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(ventasm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ventasm(&["stats", "--model", "7"]).status.code(), Some(2));
    assert_eq!(ventasm(&["check", "--model", "1", "--props", "missing.prop"]).status.code(), Some(2));
}

#[test]
fn budget_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_ventasm"))
        .args(["check", "--model", "3", "--props", "safety"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .env("VENTASM_STATE_BUDGET", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn animate_prints_fixed_columns() {
    let o = ventasm(&["animate", "--model", "1", "--scenario", "scenarios/pcv_start.avalla"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["step", "state", "phase", "iValve", "oValve", "stopVentilation"]);
    let row3: Vec<&str> = out.lines().nth(4).unwrap().split_whitespace().collect();
    assert_eq!(row3, ["3", "PCV_STATE", "INSPIRATION", "OPEN", "CLOSED", "false"]);
    let widths: Vec<usize> = out.lines().take(3).map(|l| l.find("EXP").or(l.find("phase")).unwrap()).collect();
    assert!(widths.iter().all(|w| *w == 32));
}

#[test]
fn stats_json_and_deterministic_sim() {
    let o = ventasm(&["stats", "--model", "0", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["nMonitored"].as_u64(), v["nControlled"].as_u64()), (Some(5), Some(1)));
    let a = ventasm(&["sim", "--model", "3", "--random", "--steps", "30", "--seed", "9"]);
    let b = ventasm(&["sim", "--model", "3", "--random", "--steps", "30", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("-- step 30"));
}

#[test]
fn interactive_sim_reads_stdin() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_ventasm"))
        .args(["sim", "--model", "1"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"startupEnded=true\nselfTestPassed=true bogus=1\nselfTestPassed=true\nquit\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("state = SELFTEST"));
    assert!(out.contains("state = VENTILATIONOFF"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ignored 'bogus=1'"));
}

#[test]
fn codegen_and_testgen_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for kind in ["source", "pinconfig"] {
        assert_eq!(ventasm(&["codegen", "--model", "3", kind, "--out", d]).status.code(), Some(0));
    }
    assert_eq!(ventasm(&["codegen", "--model", "3", "runtime", "--out", d]).status.code(), Some(2));
    let pins = dir.path().join("pins.a2c");
    std::fs::write(
        &pins,
        r#"{"arduinoVersion": "UNO", "stepTime": 0, "bindings": [
            {"mode": "DIGITALOUT", "function": "iValve", "pin": "D8"},
            {"mode": "DIGITALOUT", "function": "oValve", "pin": "D7"},
            {"mode": "DIGITALIN", "function": "startupEnded", "pin": "A5"}]}"#,
    )
    .unwrap();
    let o = ventasm(&["codegen", "--model", "3", "runtime", "--out", d, "--pins", pins.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["MVMController03.h", "MVMController03.cpp", "MVMController03.a2c", "hw.cpp", "MVMController03.ino"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let out = dir.path().join("tests.cpp");
    let o = ventasm(&["testgen", "--model", "3", "--tests", "3", "--steps", "5", "--out", out.to_str().unwrap(), "--coverage"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap().matches("TEST_CASE(\"my_test_").count(), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rule coverage"));
}

#[test]
fn lung_run_writes_csv_and_replayable_log() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("w.csv");
    let log = dir.path().join("w.jsonl");
    let profile = dir.path().join("p.txt");
    std::fs::write(&profile, "resistance = 5\ncompliance = 0.04\n").unwrap();
    let o = ventasm(&[
        "lung",
        "--profile",
        profile.to_str().unwrap(),
        "--seconds",
        "6",
        "--csv",
        csv.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,Paw,Palv,flow,events\n"));
    assert_eq!(text.lines().count(), 62);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 61);
    assert!(Path::new(&log).exists());
}
