use std::io::Write;
use std::process::{Command, Stdio};

fn distidx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_distidx"))
}

#[test]
fn prepare_train_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let prep = dir.path().join("prep");
    let st = distidx().args(["prepare", "--grid", "6x7", "--seed", "2", "--out"]).arg(&prep).status().unwrap();
    assert!(st.success());
    for f in ["graph.edges", "graph.coords", "ground_truth.txt", "summary.json"] {
        assert!(prep.join(f).exists(), "{f}");
    }

    let ck = dir.path().join("lm.ckpt");
    let edges = prep.join("graph.edges");
    let coords = prep.join("graph.coords");
    let out = distidx()
        .args(["train", "--model", "landmark_rn", "--landmarks", "6", "--budget-secs", "5", "--graph"])
        .arg(&edges)
        .arg("--coords")
        .arg(&coords)
        .arg("--out")
        .arg(&ck)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(line["model"], "landmark_rn");
    assert!(line["mre"].as_f64().unwrap() >= 0.0);

    // ids as written in the prepared files are 1-based
    let mut child = distidx()
        .arg("query")
        .arg("--checkpoint")
        .arg(&ck)
        .arg("--graph")
        .arg(&edges)
        .arg("--coords")
        .arg(&coords)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1 1\n1 2\n# comment\n3 40\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let vals: Vec<f64> = String::from_utf8(out.stdout).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    assert!(vals.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(vals[2] > vals[1]);
}

#[test]
fn bench_exit_code_reflects_failures() {
    let dir = tempfile::tempdir().unwrap();
    let run = |models: &str| {
        distidx()
            .args(["bench", "--grid", "5x6", "--budget-secs", "1", "--latency-queries", "500", "--models", models])
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
    };
    let ok = run("manhattan,landmark_km");
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("report.csv").exists());

    let bad = run("manhattan,bogus");
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus"));
}

#[test]
fn query_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("m.ckpt");
    let st = distidx()
        .args(["train", "--grid", "4x4", "--model", "manhattan", "--out"])
        .arg(&ck)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(st.success());
    let mut child = distidx()
        .arg("query")
        .arg("--checkpoint")
        .arg(&ck)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"0 99\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}
