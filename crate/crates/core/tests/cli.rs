use std::path::Path;
use std::process::{Command, Output};

fn nailforce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nailforce")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn help_for_every_command() {
    for cmd in ["calibrate", "train", "estimate", "simulate-session", "servo", "analyze", "report"] {
        let out = nailforce(&[cmd, "--help"]);
        assert_eq!(code(&out), 0, "{cmd} --help");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    assert_eq!(code(&nailforce(&["--help"])), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&nailforce(&[])), 2);
    assert_eq!(code(&nailforce(&["frobnicate"])), 2);
    assert_eq!(code(&nailforce(&["calibrate", "--grid", "huge"])), 2);
    assert_eq!(code(&nailforce(&["analyze"])), 2);
    assert_eq!(code(&nailforce(&["analyze", "--condition", "nopath"])), 2);
}

#[test]
fn missing_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let missing = dir.path().join("nothing");
    let out = nailforce(&["--out", out_dir, "train", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = nailforce(&["--out", out_dir, "servo", "--preset", "sideways"]);
    assert_eq!(code(&out), 3);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&nailforce(&["--config", bad.to_str().unwrap(), "servo"])), 3);
}

#[test]
fn servo_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = nailforce(&["--out", dir.path().to_str().unwrap(), "servo", "--preset", "static"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let final_px = summary["cameras"][0]["final_error_px"].as_f64().unwrap();
    assert!(final_px < 1.0, "{final_px}");
    for f in ["scenario.json", "trace.csv", "summary.json"] {
        assert!(Path::new(&dir.path().join("servo").join(f)).exists(), "{f}");
    }
}

#[test]
fn analyze_session_directories() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let mut paths = Vec::new();
    for (scenario, seed) in [("constrained", "1"), ("constrained", "2"), ("unconstrained", "1"), ("unconstrained", "2")] {
        let out = nailforce(&["--out", root, "--seed", seed, "simulate-session", "--scenario", scenario, "--no-frames"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        paths.push(String::from_utf8(out.stdout).unwrap().trim().to_string());
    }
    let c = format!("constrained={},{}", paths[0], paths[1]);
    let u = format!("unconstrained={},{}", paths[2], paths[3]);
    let out = nailforce(&["--out", root, "analyze", "--condition", &c, "--condition", &u]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let comparisons: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(comparisons[0]["a"], "constrained");
    for f in ["report.json", "report.csv", "report.svg"] {
        assert!(dir.path().join("report").join(f).exists(), "{f}");
    }
}

#[test]
fn analyze_rejects_a_flat_trace() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flat.csv");
    let mut text = String::from("time_s,finger,fx_n,fy_n,fz_n,phase,source\n");
    for i in 0..200 {
        for f in ["thumb", "index", "middle", "ring"] {
            text.push_str(&format!("{},{f},0,0,0,unknown,oracle\n", i as f64 * 0.01));
        }
    }
    std::fs::write(&csv, text).unwrap();
    let cond = format!("a={}", csv.display());
    let out = nailforce(&["--out", dir.path().to_str().unwrap(), "analyze", "--condition", &cond, "--condition", &cond.replacen('a', "b", 1)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
