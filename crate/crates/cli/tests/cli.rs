use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn stochcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochcert"))
        .args(args)
        .output()
        .expect("run stochcert")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const SMALL: &[&str] = &[
    "--delta-exp",
    "20",
    "--eps-exp",
    "100",
    "--orbit-bits",
    "2048",
];

#[test]
fn reference_check_is_proved() {
    let o = stochcert(&["check"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "proved");
    assert_eq!(v["starting_constants"]["N"], "8287");
}

#[test]
fn iota_out_of_range_is_invalid_input() {
    let o = stochcert(&[
        "check",
        "--delta-exp",
        "1000",
        "--iota",
        "1.5",
        "--eps-exp",
        "4990",
    ]);
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("iota"));
}

#[test]
fn garbage_values_are_invalid_input() {
    assert_eq!(code(&stochcert(&["check", "--mode", "loose"])), 2);
    assert_eq!(code(&stochcert(&["check", "--eps-exp", "0"])), 2);
    assert_eq!(code(&stochcert(&["check", "--s-alpha1", "1.2"])), 2);
    assert_eq!(code(&stochcert(&["derive", "--prec-bits", "8"])), 2);
}

#[test]
fn near_maximal_gamma1_is_refuted_with_named_condition() {
    let o = stochcert(&["check", "--s-gamma1", "0.999"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["first_failure"], "etatilde_below_one");
    assert!(String::from_utf8_lossy(&o.stderr).contains("etatilde_below_one"));
}

#[test]
fn derive_lists_pending_orbit_checks() {
    let o = stochcert(&["derive", "--format", "text"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("N1"));
    assert!(s.contains("pending orbit verification: A2, A4"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let cfg = scratch("small.ini");
    fs::write(
        &cfg,
        "# desk-scale window\ndelta-exp = 20\neps_exp = 100\ns_gamma1 = 0.999\n",
    )
    .unwrap();
    let from_file = stochcert(&["derive", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&from_file)).unwrap();
    assert_eq!(v["starting_constants"]["N"], "165");

    let overridden = stochcert(&[
        "check",
        "--config",
        cfg.to_str().unwrap(),
        "--s-gamma1",
        "0.85",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&overridden)).unwrap();
    assert_eq!(v["inputs"]["s_gamma1"], "0.85");
    assert_eq!(v["inputs"]["delta_exp"], "20");
}

#[test]
fn certify_is_deterministic_and_report_round_trips() {
    let mut args = vec!["certify"];
    args.extend_from_slice(SMALL);
    let a = stochcert(&args);
    let b = stochcert(&args);
    // The small window clears the orbit checks but not the chain.
    assert_eq!(code(&a), 1);
    assert_eq!(a.stdout, b.stdout);
    let json = stdout(&a);
    assert!(json.contains("\"verdict\": \"failed\""));
    assert!(!json.contains("measure_bound\": {"));

    let path = scratch("small-cert.json");
    fs::write(&path, &json).unwrap();
    let rendered = stochcert(&["report", path.to_str().unwrap()]);
    assert_eq!(code(&rendered), 0);
    args.extend_from_slice(&["--format", "text"]);
    assert_eq!(stdout(&rendered), stdout(&stochcert(&args)));
}

#[test]
fn orbit_verify_dumps_trace() {
    let trace = scratch("trace.tsv");
    let mut args = vec!["orbit-verify", "--dump-trace", trace.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = stochcert(&args);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["orbit"]["a3"], "proved");
    let lines = fs::read_to_string(&trace).unwrap();
    assert!(lines.lines().count() >= 165);
}

#[test]
fn tune_reports_failures_when_nothing_passes() {
    let o = stochcert(&[
        "tune",
        "--s-gamma1",
        "0.999,0.995",
        "--budget",
        "2",
        "--no-orbit",
    ]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["best"].is_null());
    assert_eq!(v["evaluated"], "2");
}

#[test]
fn report_rejects_unknown_json() {
    let path = scratch("junk.json");
    fs::write(&path, "{\"hello\": 1}").unwrap();
    assert_eq!(code(&stochcert(&["report", path.to_str().unwrap()])), 2);
}
