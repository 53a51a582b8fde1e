//! Exit codes and artifacts of the installed binary.

use std::path::PathBuf;
use std::process::Command;

fn perc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perc"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("perc-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_exits_zero() {
    let out = perc().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("percolation"));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(perc().arg("--nonsense").output().unwrap().status.code(), Some(1));
    assert_eq!(perc().args(["sn", "--n", "8,4"]).output().unwrap().status.code(), Some(1));
    let out = perc().args(["fit", "--input", "x.csv", "--target", "banana"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn io_and_format_problems_exit_two() {
    let dir = temp_dir("io");
    let out = perc()
        .args(["fit", "--input"])
        .arg(dir.join("missing.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr carries a JSON error record");
    assert_eq!(err["error"]["exit_code"], 2);

    let garbled = dir.join("garbled.csv");
    std::fs::write(&garbled, "not,a,series\n1,2,3\n").unwrap();
    let out = perc().args(["fit", "--input"]).arg(&garbled).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn merge_of_mismatched_seeds_exits_two() {
    let dir = temp_dir("merge");
    for (name, seed, offset) in [("a", "1", "0"), ("b", "2", "4096")] {
        let sub = dir.join(name);
        let status = perc()
            .args(["sn", "--n", "2", "--replicas", "512", "--seed", seed, "--offset", offset])
            .arg("--out")
            .arg(&sub)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let out = perc()
        .args(["merge", "--inputs"])
        .arg(dir.join("a/sn.csv"))
        .arg(dir.join("b/sn.csv"))
        .arg("--output")
        .arg(dir.join("merged.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config mismatch"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn end_to_end_run_merge_fit() {
    let dir = temp_dir("e2e");
    for (name, offset) in [("lo", "0"), ("hi", "1024")] {
        let status = perc()
            .args(["sn", "--n", "2,4,8", "--replicas", "1024", "--offset", offset])
            .arg("--out")
            .arg(dir.join(name))
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let status = perc()
        .args(["merge", "--inputs"])
        .arg(dir.join("lo/sn.csv"))
        .arg(dir.join("hi/sn.csv"))
        .arg("--output")
        .arg(dir.join("sn.csv"))
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let out = perc()
        .args(["fit", "--value-col", "estimate", "--target", "91/48", "--input"])
        .arg(dir.join("sn.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let slope = report["slope"].as_f64().unwrap();
    assert!(slope > 0.5 && slope < 3.5, "implausible slope {slope} at tiny scales");

    // seed override through the environment changes the config hash
    let out = perc()
        .args(["sn", "--n", "2", "--replicas", "8", "--format", "json"])
        .arg("--out")
        .arg(dir.join("env"))
        .env("PERC_MASTER_SEED", "0xdead")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["config"]["seed"], 0xdead);
    std::fs::remove_dir_all(&dir).ok();
}
