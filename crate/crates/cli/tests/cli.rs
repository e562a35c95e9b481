use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn cwc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwc"))
        .args(args)
        .env_remove("CWC_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_bundled_models() {
    for entry in fs::read_dir(model("")).unwrap() {
        let path = entry.unwrap().path();
        let out = cwc(&["validate", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
    }
}

#[test]
fn validate_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cwc");
    fs::write(&bad, "init a\ninit b\nrule: a => @ 1\n").unwrap();
    let out = cwc(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.cwc:2:1: duplicate-init"), "{err}");
    let lines: Vec<&str> = err.lines().collect();
    assert!(lines.len() >= 2, "{err}");
}

#[test]
fn missing_file_is_io_error() {
    let out = cwc(&["validate", "/nonexistent/model.cwc"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cwc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cwc(&["run"]).status.code(), Some(1));
    assert_eq!(cwc(&["--help"]).status.code(), Some(0));
    assert!(stdout(&cwc(&["run", "--help"])).contains("--override"));
}

#[test]
fn transitions_text_and_json() {
    let out = cwc(&["transitions", &model("membrane_join.cwc")]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "join\t/\t(a b | c) (b b | c)\t1\t1\njoin\t/\t(a b b | c) (b | c)\t2\t2\n"
    );
    let out = cwc(&["transitions", &model("counting.cwc"), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = &v[0];
    assert_eq!(t["rule"], "pair");
    assert_eq!(t["path"], "/");
    assert_eq!(t["n"], 3);
    assert_eq!(t["multiplicity"], 1);
    assert_eq!(t["rate"], 3.0);
    assert_eq!(t["successor"], "a a b c");
}

#[test]
fn count_with_oracle() {
    let out = cwc(&["count", &model("counting.cwc"), "pair", "--oracle"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "/\ta a b c\tn=3, oracle=3, OK\n");

    let out = cwc(&["count", &model("counting.cwc"), "pair", "--oracle", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("MISMATCH"));

    let out = cwc(&["count", &model("counting.cwc"), "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown-rule"));
}

#[test]
fn count_oracle_refuses_large_states() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.cwc");
    fs::write(&big, "init a*40\nrule r: a $X -> $X @ 1\n").unwrap();
    let out = cwc(&["count", big.to_str().unwrap(), "r"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "/\ta*39\tn=40\n".replace("a*39", &vec!["a"; 39].join(" ")));
    let out = cwc(&["count", big.to_str().unwrap(), "r", "--oracle"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = cwc(&[
        "run",
        &model("pure_death.cwc"),
        "--replicates",
        "3",
        "--tmax",
        "2",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--event-log",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rep = fs::read_to_string(out_dir.join("replicate_000.csv")).unwrap();
    let lines: Vec<&str> = rep.lines().collect();
    assert_eq!(lines[0], "time,a");
    assert_eq!(lines[1], "0,100");
    assert_eq!(lines.len(), 1 + 5);
    let agg = fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("time,a_mean,a_sd\n0,100,0\n"));
    assert!(out_dir.join("events_002.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("run_report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 0);
    assert_eq!(report["replicates"].as_array().unwrap().len(), 3);
    assert_eq!(report["replicates"][1]["status"], "horizon-reached");
}

#[test]
fn single_replicate_sd_is_nan() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwc(&["run", &model("counting.cwc"), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().nth(1).unwrap(), "0,0,NaN");
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let seeded = |args: &[&str], env: Option<&str>| -> u64 {
        let out_dir = dir.path().join("s");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cwc"));
        cmd.args(["run", &model("pho.cwc"), "--tmax", "1", "--out-dir", out_dir.to_str().unwrap()])
            .args(args)
            .env_remove("CWC_SEED");
        if let Some(e) = env {
            cmd.env("CWC_SEED", e);
        }
        assert!(cmd.output().unwrap().status.success());
        let r: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("run_report.json")).unwrap()).unwrap();
        r["seed"].as_u64().unwrap()
    };
    // pho.cwc carries `seed 1`.
    assert_eq!(seeded(&[], None), 1);
    assert_eq!(seeded(&[], Some("9")), 1);
    assert_eq!(seeded(&["--seed", "5"], Some("9")), 5);

    let no_seed = dir.path().join("m.cwc");
    fs::write(&no_seed, "init a\nrule: a => * @ 1\ntmax 1\n").unwrap();
    let run = |env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cwc"));
        cmd.args(["run", no_seed.to_str().unwrap(), "--out-dir", dir.path().join("n").to_str().unwrap()])
            .env_remove("CWC_SEED");
        if let Some(e) = env {
            cmd.env("CWC_SEED", e);
        }
        let out = cmd.output().unwrap();
        let r: Option<serde_json::Value> = fs::read_to_string(dir.path().join("n/run_report.json"))
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok());
        (out.status.code(), r.map(|r| r["seed"].as_u64().unwrap()))
    };
    assert_eq!(run(Some("9")), (Some(0), Some(9)));
    assert_eq!(run(Some("x")).0, Some(1));
}

#[test]
fn override_initial_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwc(&[
        "run",
        &model("pure_death.cwc"),
        "--override",
        "init-a=7",
        "--replicates",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rep = fs::read_to_string(dir.path().join("replicate_000.csv")).unwrap();
    assert_eq!(rep.lines().nth(1).unwrap(), "0,7");
    let out = cwc(&["run", &model("pure_death.cwc"), "--override", "a=7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_horizon_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.cwc");
    fs::write(&m, "init a\nrule: a => * @ 1\n").unwrap();
    let out = cwc(&["run", m.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = cwc(&["run", m.to_str().unwrap(), "--max-events", "5", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn runtime_rate_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.cwc");
    fs::write(&m, "init a\nrule s: a => c @ fn(1 / (n - 1))\ntmax 1\n").unwrap();
    let out = cwc(&["run", m.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("rule s"), "{}", stderr(&out));
}

#[test]
fn jobs_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "3"] {
        let d = dir.path().join(jobs);
        let out = cwc(&[
            "run",
            &model("macrophage.cwc"),
            "--replicates",
            "4",
            "--jobs",
            jobs,
            "--out-dir",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push(fs::read(d.join("aggregate.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
