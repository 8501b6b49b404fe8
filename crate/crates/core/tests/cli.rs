//! The `agentreuse` binary: outputs, files and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn agentreuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agentreuse")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn corpus_path() -> String {
    format!("{}/corpus.jsonl", common::DATA)
}

#[test]
fn gain_prints_totals_and_reductions() {
    let o = agentreuse(&[
        "gain", "--n", "2644", "--non-tp", "180", "--t-mech", "0.023489", "--vs-non-tp", "461", "--vs-t-mech", "0.011528",
    ]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("mechanism overhead: 62.10 s"), "{s}");
    assert!(s.contains("plan generation: 5724.00 s"), "{s}");
    assert!(s.contains("total latency: 5786.10 s"), "{s}");
    assert!(s.contains("no reuse: 84079.20 s"), "{s}");
    assert!(s.contains("reduction vs no reuse: 93.12%"), "{s}");
    assert!(s.contains("compared configuration: 14690.28 s"), "{s}");
    assert!(s.contains("reduction vs compared: 60.61%"), "{s}");
}

#[test]
fn gain_rejects_negative_times() {
    let o = agentreuse(&["gain", "--n", "10", "--non-tp", "1", "--t-mech=-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_corpus_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let templates = format!("{}/templates.json", common::DATA);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = agentreuse(&["gen-corpus", "--templates", &templates, "--size", "150", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("3", "a.jsonl");
    assert_eq!(a, run("3", "b.jsonl"));
    assert_ne!(a, run("4", "c.jsonl"));
    let corpus = agentreuse::harness::corpus::read_corpus(&a[..]).unwrap();
    assert_eq!(corpus.len(), 150);
    agentreuse::harness::corpus::check_corpus(&corpus).unwrap();
    assert!(!dir.path().join("a.jsonl.partial").exists());
}

#[test]
fn bundled_corpus_regenerates_identically() {
    let o = agentreuse(&["gen-corpus", "--templates", &format!("{}/templates.json", common::DATA), "--size", "600", "--seed", "7"]);
    assert!(o.status.success());
    assert_eq!(o.stdout, std::fs::read(corpus_path()).unwrap());
}

#[test]
fn evaluate_sweep_writes_summary_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = agentreuse(&[
        "evaluate", "--corpus", &corpus_path(), "--strategy", "with_args", "--sweep", "0.75,0.9", "--out", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "{summary}");
    for g in ["0.75", "0.90"] {
        let log = std::fs::read_to_string(dir.path().join(format!("requests_with_args_{g}.csv"))).unwrap();
        assert!(log.starts_with("request_id,strategy,gamma,decision,similarity,label,tp_fp_tn_fn,"), "{log}");
        assert_eq!(log.lines().count(), 601);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus_path();

    // 3: corpus problems
    let o = agentreuse(&["evaluate", "--corpus", "/nonexistent.jsonl", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let unlabelled = dir.path().join("u.jsonl");
    std::fs::write(&unlabelled, "{\"id\":\"a\",\"text\":\"Play Qilixiang\"}\n").unwrap();
    let o = agentreuse(&["evaluate", "--corpus", unlabelled.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // 2: configuration problems
    let o = agentreuse(&["evaluate", "--corpus", &corpus, "--strategy", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = agentreuse(&["evaluate", "--corpus", &corpus, "--gamma", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[cache]\nstrategy = \"AGENT_REUSE\"\nbogus = 1\n").unwrap();
    let o = agentreuse(&["--config", bad.to_str().unwrap(), "gain", "--n", "1", "--non-tp", "1", "--t-mech", "0"]);
    assert_eq!(o.status.code(), Some(2));

    // 4: an unreachable planner
    let dead = common::closed_port();
    let remote = dir.path().join("remote.toml");
    std::fs::write(&remote, format!("[planner]\nbackend = \"remote\"\nurl = \"http://{dead}/plan\"\ntimeout_ms = 500\n")).unwrap();
    let o = agentreuse(&["--config", remote.to_str().unwrap(), "reuse-check", "--corpus", &corpus, "--pairs", "2", "--repeats", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sample_config_is_valid() {
    let config = format!("{}/config.toml", common::DATA);
    let o = agentreuse(&["--config", &config, "reuse-check", "--corpus", &corpus_path(), "--pairs", "20", "--repeats", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("100/100 identical, effective reuse rate 1.0000"), "{}", stdout(&o));
}

#[test]
fn snapshot_save_then_load_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("cache.json");
    let log = dir.path().join("replay.csv");
    let o = agentreuse(&["snapshot", "save", snap.to_str().unwrap(), "--corpus", &corpus_path()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("saved "));

    let o = agentreuse(&["snapshot", "load", snap.to_str().unwrap(), "--corpus", &corpus_path(), "--out", log.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("replayed 600:"), "{s}");
    let rows = std::fs::read_to_string(&log).unwrap();
    assert_eq!(rows.lines().count(), 601);
    // every non-chit-chat request now finds its own family's plan
    assert!(!rows.lines().skip(1).any(|l| l.contains(",miss,")), "{rows}");

    // a snapshot is refused under a different embedder configuration
    let other = dir.path().join("other.toml");
    std::fs::write(&other, "[embedding]\ndim = 256\n").unwrap();
    let o = agentreuse(&["--config", other.to_str().unwrap(), "snapshot", "load", snap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("incompatible snapshot"));
}

#[test]
fn bench_latency_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = agentreuse(&["bench-latency", "--corpus", &corpus_path(), "--repeats", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("repeat,strategy,requests,intent_us,search_us,other_us,total_us,median_total_us"));
    assert_eq!(csv.lines().count(), 4);
    assert!(Path::new(&out).exists());
}
