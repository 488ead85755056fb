use std::process::Command;

fn smust(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_smust")).args(args).output().unwrap()
}

fn error_kind(out: &std::process::Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn constellation_dump() {
    let out = smust(&["constellation", "--category", "smust_cat3", "--q", "2,3", "--p", "3,2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,q,user1,user2"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    let mut i: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    i.sort_by(f64::total_cmp);
    i.dedup();
    assert_eq!(i, [-5.0, -1.0, 1.0, 5.0]);
}

#[test]
fn sweep_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "experiment = \"fairness\"\nschemes = [\"oma\", \"smust_cat1\"]\n[sweep]\nsnr_db_start = 0.0\nsnr_db_stop = 5.0\n",
    )
    .unwrap();
    let csv = dir.path().join("nested/out.csv");
    let out = smust(&["sweep", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["records"], 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().contains(",3,"));
}

#[test]
fn failures_report_json() {
    let out = smust(&["sweep", "--config", "/nonexistent/c.toml"]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "io");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "experiment = \"fairness\"\ntrials = 0\n").unwrap();
    let out = smust(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "invalid_config");

    std::fs::write(&cfg, "experiment = \"mimo\"\n").unwrap();
    let out = smust(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(error_kind(&out), "invalid_config");

    let out = smust(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");

    let out = smust(&["constellation", "--category", "noma"]);
    assert_eq!(error_kind(&out), "unsupported_scheme");
}

#[test]
fn sched_writes_decision_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "experiment = \"sched\"\nschemes = [\"dynamic_ma\", \"smust_cat1\"]\n[sched]\nues = 4\nsubbands = 2\nrounds = 3\n\
         [lut]\nsnr_db_start = 0.0\nsnr_db_stop = 20.0\nsnr_db_step = 10.0\n",
    )
    .unwrap();
    let csv = dir.path().join("s.csv");
    let out = smust(&["sched", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let log = std::fs::read_to_string(summary["decisions"].as_str().unwrap()).unwrap();
    let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6);
    for l in &lines {
        assert_eq!(l["config_hash"], summary["config_hash"]);
        assert_eq!(l["subbands"].as_array().unwrap().len(), 2);
    }
    assert!(summary["ops"]["dynamic_ma"]["pf_evals"].as_u64().unwrap() > 0);
}

#[test]
fn mimo_snr_override_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "experiment = \"mimo\"\ntrials = 20\nschemes = [\"smust_cat3\"]\n[mimo]\ncat3_decoder = \"sic\"\n\
         [lut]\nsnr_db_start = 0.0\nsnr_db_stop = 20.0\nsnr_db_step = 10.0\n",
    )
    .unwrap();
    let run = |snr: &str| {
        let csv = dir.path().join(format!("m{snr}.csv"));
        let out =
            smust(&["mimo", "--config", cfg.to_str().unwrap(), "--snr-db", snr, "--out", csv.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(run("0"), run("-5"));
}
