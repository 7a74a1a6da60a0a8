use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::time::Duration;

use ringflight::runner::{parse_trajectory, Outcome};
use ringflight::service::{Body, Client, Role};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringflight"))
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn run_writes_every_log_and_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(bin().args(["run", "--seed", "7", "--out"]).arg(dir.path()));
    assert!(stdout.contains("outcome   success"), "{stdout}");
    assert!(stdout.contains("Successfully passed through the center of the ring."));
    for f in ["trajectory.csv", "control.csv", "detections.csv", "planner_audit.jsonl", "events.bin", "summary.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(parse_trajectory(&traj).unwrap().len() > 500);
}

#[test]
fn config_file_is_loaded_and_bad_ones_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "[ring]\ndrive_speed = 0.1\n").unwrap();
    ok(bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")));
    let summary = std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap();
    assert!(summary.contains("\"outcome\""));

    std::fs::write(&cfg, "[ring]\ndrive_speed = -3.0\n").unwrap();
    let out = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("drive_speed"));
}

#[test]
fn batch_prints_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(bin().args(["batch", "--n", "2", "--seed", "1", "--out"]).arg(dir.path()));
    assert!(stdout.contains("runs 2:"), "{stdout}");
    assert!(dir.path().join("run_000/trajectory.csv").is_file());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn gen_dataset_writes_both_splits() {
    let dir = tempfile::tempdir().unwrap();
    ok(bin().args(["gen-dataset", "--train-n", "50", "--test-n", "10", "--seed", "4", "--out"]).arg(dir.path()));
    let lines = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap().lines().count();
    assert_eq!((lines("train.jsonl"), lines("test.jsonl")), (50, 10));
}

#[test]
fn serve_streams_a_scripted_run_then_exits() {
    let mut child = bin()
        .args(["serve", "--bind", "127.0.0.1:0", "--pace", "0", "--episodes", "1", "--scripted"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut banner).unwrap();
    let addr = banner.trim().rsplit(' ').next().unwrap().to_string();
    let mut c = Client::connect(addr.as_str(), Role::Observer).unwrap();
    c.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
    let msgs = c.recv_until(|b| matches!(b, Body::RunComplete { .. })).unwrap();
    assert!(matches!(
        msgs.last().unwrap().body,
        Body::RunComplete {
            outcome: Outcome::Success,
            ..
        }
    ));
    assert!(child.wait().unwrap().success());
}
