use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsn_ids::notice_log::read_log;
use tsn_ids::scenario::load_truth;

fn tsn_ids(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tsn-ids"));
    cmd.env_remove("TSNZEEK_LOG_LEVEL");
    for a in args {
        cmd.arg(a);
    }
    cmd.output().expect("binary runs")
}

fn generate(dir: &Path, preset: &str) -> (PathBuf, PathBuf, PathBuf) {
    let out = tsn_ids(&[
        &"generate",
        &"--preset",
        &preset,
        &"--out",
        &dir,
        &"--name",
        &preset,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    (
        dir.join(format!("{preset}.pcap")),
        dir.join(format!("{preset}.truth.json")),
        dir.join(format!("{preset}.routes.json")),
    )
}

#[test]
fn monitor_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (benign, _, _) = generate(dir.path(), "benign");
    let (attack, _, _) = generate(dir.path(), "a1");
    assert_eq!(
        tsn_ids(&[&"monitor", &"--pcap", &benign]).status.code(),
        Some(0)
    );

    let log = dir.path().join("a1.log");
    let out = tsn_ids(&[&"monitor", &"--pcap", &attack, &"--log", &log]);
    assert_eq!(out.status.code(), Some(2));
    let records = read_log(&log).unwrap();
    assert!(records
        .iter()
        .all(|r| r.is_schema_valid() && r.logged_at.is_some()));
    assert!(String::from_utf8_lossy(&out.stdout).contains("frames_in="));

    // without --log, notices go to stdout as JSON lines
    let out = tsn_ids(&[&"monitor", &"--pcap", &attack, &"--fixed-clock"]);
    assert_eq!(out.status.code(), Some(2));
    let records = tsn_ids::notice_log::parse_log(&out.stdout[..]).unwrap();
    assert!(!records.is_empty());

    assert_eq!(
        tsn_ids(&[&"monitor", &"--pcap", &dir.path().join("missing.pcap")])
            .status
            .code(),
        Some(1)
    );
    let junk = dir.path().join("junk.pcap");
    std::fs::write(&junk, b"not a capture").unwrap();
    assert_eq!(
        tsn_ids(&[&"monitor", &"--pcap", &junk]).status.code(),
        Some(1)
    );
    assert_eq!(
        tsn_ids(&[&"monitor", &"--pcap", &benign, &"--speed", &"-1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn monitor_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let (pcap, _, _) = generate(dir.path(), "benign");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"sweep_period_s": -1}"#).unwrap();
    let out = tsn_ids(&[&"monitor", &"--pcap", &pcap, &"--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn monitor_writes_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let (pcap, _, _) = generate(dir.path(), "benign");
    let snap = dir.path().join("state.json");
    assert_eq!(
        tsn_ids(&[&"monitor", &"--pcap", &pcap, &"--snapshot", &snap])
            .status
            .code(),
        Some(0)
    );
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(snap).unwrap()).unwrap();
    assert!(v.is_object());
}

#[test]
fn verify_passes_and_detects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (pcap, truth_path, _) = generate(dir.path(), "a3");
    let out = tsn_ids(&[&"verify", &"--pcap", &pcap]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify: PASS"));

    // drop one expectation: its notices become unexpected
    let mut truth = load_truth(&truth_path).unwrap();
    truth.expectations.remove(0);
    let altered = dir.path().join("altered.json");
    std::fs::write(&altered, serde_json::to_string(&truth).unwrap()).unwrap();
    let out = tsn_ids(&[&"verify", &"--pcap", &pcap, &"--truth", &altered]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("UNEXPECTED"));

    // an expectation nothing satisfies is missing
    let (benign, _, _) = generate(dir.path(), "benign");
    let out = tsn_ids(&[&"verify", &"--pcap", &benign, &"--truth", &truth_path]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("MISSING"));

    assert_eq!(
        tsn_ids(&[
            &"verify",
            &"--pcap",
            &pcap,
            &"--truth",
            &dir.path().join("none.json")
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn check_routes_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, clean) = generate(dir.path(), "benign");
    let (_, _, shared) = generate(dir.path(), "a6");
    assert_eq!(
        tsn_ids(&[&"check-routes", &"--routes", &clean])
            .status
            .code(),
        Some(0)
    );
    let out = tsn_ids(&[&"check-routes", &"--routes", &shared]);
    assert_eq!(out.status.code(), Some(2));
    let records = tsn_ids::notice_log::parse_log(&out.stdout[..]).unwrap();
    assert!(records
        .iter()
        .all(|r| r.note == "N7.FRER.ExcessiveMemberStreams" && r.evidence["kind"] == "route"));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{").unwrap();
    assert_eq!(
        tsn_ids(&[&"check-routes", &"--routes", &bad]).status.code(),
        Some(1)
    );
}

#[test]
fn generate_from_script_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.json");
    std::fs::write(&script, r#"{"name": "tiny", "seed": 3, "duration_s": 2.0, "attack": {"kind": "A4", "start_s": 0.5}}"#)
        .unwrap();
    // A4 needs the dangling timeout to elapse, so this script is rejected
    assert_eq!(
        tsn_ids(&[&"generate", &"--script", &script, &"--out", &dir.path()])
            .status
            .code(),
        Some(1)
    );

    std::fs::write(&script, r#"{"name": "tiny", "seed": 3, "duration_s": 2.0}"#).unwrap();
    let out = tsn_ids(&[
        &"generate",
        &"--script",
        &script,
        &"--out",
        &dir.path(),
        &"--seed",
        &"9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        load_truth(dir.path().join("tiny.truth.json")).unwrap().seed,
        9
    );

    assert_eq!(
        tsn_ids(&[&"generate", &"--out", &dir.path()]).status.code(),
        Some(1)
    );
    assert_eq!(
        tsn_ids(&[&"generate", &"--preset", &"a9", &"--out", &dir.path()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(tsn_ids(&[]).status.code(), Some(1));
    assert_eq!(tsn_ids(&[&"bogus"]).status.code(), Some(1));
    assert_eq!(tsn_ids(&[&"--help"]).status.code(), Some(0));
    assert_eq!(tsn_ids(&[&"--version"]).status.code(), Some(0));
}

#[test]
fn log_level_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (pcap, _, _) = generate(dir.path(), "benign");
    // a truncated tail is a warning, which the default level shows
    let mut bytes = std::fs::read(&pcap).unwrap();
    bytes.truncate(bytes.len() - 3);
    let cut = dir.path().join("cut.pcap");
    std::fs::write(&cut, bytes).unwrap();

    let quiet = Command::new(env!("CARGO_BIN_EXE_tsn-ids"))
        .env("TSNZEEK_LOG_LEVEL", "error")
        .args(["monitor", "--pcap"])
        .arg(&cut)
        .output()
        .unwrap();
    let loud = Command::new(env!("CARGO_BIN_EXE_tsn-ids"))
        .env("TSNZEEK_LOG_LEVEL", "debug")
        .args(["monitor", "--pcap"])
        .arg(&cut)
        .output()
        .unwrap();
    assert_eq!(quiet.status.code(), Some(0));
    assert_eq!(loud.status.code(), Some(0));
    let (q, l) = (
        String::from_utf8_lossy(&quiet.stderr),
        String::from_utf8_lossy(&loud.stderr),
    );
    assert!(!q.contains("WARN"), "{q}");
    assert!(l.contains("WARN"), "{l}");
}
