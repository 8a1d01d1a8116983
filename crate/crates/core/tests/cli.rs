use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_connected-ef1")).args(args).output().unwrap()
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("connected-ef1-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_is_reproducible() {
    let a = bin(&["gen", "--seed", "0", "-n", "3", "-m", "6"]);
    let b = bin(&["gen", "--seed", "0", "-n", "3", "-m", "6"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let zeros = json(&bin(&["gen", "--seed", "5", "-n", "2", "-m", "3", "--max-value", "0"]));
    assert_eq!(zeros["valuations"]["values"], serde_json::json!([[0, 0, 0], [0, 0, 0]]));
    let single = json(&bin(&["gen", "--seed", "5", "-n", "1", "-m", "3"]));
    assert_eq!(single["n"], 1);
}

#[test]
fn solve_reports_and_exit_codes() {
    let inst = scratch("two.json", r#"{"n":2,"m":3,"valuations":{"type":"additive","values":[[1,1,1],[3,0,0]]}}"#);
    let out = bin(&["solve", "--instance", inst.to_str().unwrap()]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["mode"], "plain");
    assert!(report["stats"]["simplices_scanned"].as_u64().unwrap() >= 1);

    let trivial =
        scratch("trivial.json", r#"{"n":3,"m":2,"valuations":{"type":"additive","values":[[1,2],[1,2],[1,2]]}}"#);
    let out = bin(&["solve", "--instance", trivial.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["division"], serde_json::json!([{"lo":1,"hi":1},{"lo":2,"hi":2},null]));

    let bad = scratch(
        "bad.json",
        r#"{"n":1,"m":2,"valuations":{"type":"table","entries":[
            {"agent":1,"lo":1,"hi":1,"value":3},{"agent":1,"lo":2,"hi":2,"value":1},{"agent":1,"lo":1,"hi":2,"value":2}]}}"#,
    );
    assert_eq!(bin(&["solve", "--instance", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(bin(&["solve", "--instance", "/nonexistent.json"]).status.code(), Some(2));
    let out = bin(&["solve", "--instance", inst.to_str().unwrap(), "--mode", "secretive", "--secretive-agent", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn traces_go_to_stderr_as_json_lines() {
    let inst = scratch("trace.json", r#"{"n":2,"m":2,"valuations":{"type":"additive","values":[[1,1],[1,1]]}}"#);
    let out = bin(&["solve", "--instance", inst.to_str().unwrap(), "--trace-simplices", "--trace-colors"]);
    assert!(out.status.success());
    let events: Vec<serde_json::Value> =
        String::from_utf8(out.stderr).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(events.iter().any(|e| e["event"] == "simplex" && e["accepted"] == true));
    assert!(events.iter().any(|e| e["event"] == "color"));
}

#[test]
fn verify_accepts_solve_output_and_rejects_bad_divisions() {
    let inst = scratch("v.json", r#"{"n":2,"m":3,"valuations":{"type":"additive","values":[[0,1,1],[1,1,1]]}}"#);
    let p = inst.to_str().unwrap();
    let solved = scratch("v_out.json", &String::from_utf8(bin(&["solve", "--instance", p]).stdout).unwrap());
    let out = bin(&["verify", "--instance", p, "--division", solved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["valid"], true);

    // plain EF1_outer, but agent 1 cannot accept {2,3} being taken
    let div = scratch("v_div.json", r#"[{"lo":1,"hi":1},{"lo":2,"hi":3}]"#);
    let d = div.to_str().unwrap();
    assert_eq!(bin(&["verify", "--instance", p, "--division", d]).status.code(), Some(0));
    let out = bin(&["verify", "--instance", p, "--division", d, "--mode", "secretive", "--secretive-agent", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["valid"], false);

    let short = scratch("v_short.json", r#"[{"lo":1,"hi":3}]"#);
    assert_eq!(bin(&["verify", "--instance", p, "--division", short.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn oracle_counts_divisions() {
    let inst = scratch("o.json", r#"{"n":2,"m":2,"valuations":{"type":"additive","values":[[1,1],[1,1]]}}"#);
    let out = bin(&["oracle", "--instance", inst.to_str().unwrap()]);
    assert!(out.status.success());
    let summary = json(&out);
    assert_eq!(summary["divisions"], 3);
    assert_eq!(summary["feasible"], 1);
}

#[test]
fn bench_header_and_smallest_row() {
    let out = bin(&["bench", "--max-parts", "2", "--max-items", "2", "--modes", "plain"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,m,mode,simplices,accepted_index,millis"));
    assert!(lines.next().unwrap().starts_with("2,1,plain,2,,"));
}

#[test]
fn forced_golden_simplex() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/twelve_items.json");
    let chain = "[[6,9,16,21],[6,10,16,21],[6,10,17,21],[6,10,17,22],[7,10,17,22]]";
    let out = bin(&["solve", "--instance", fixture, "--force-simplex", chain]);
    assert!(out.status.success());
    let expect = serde_json::json!([
        {"lo":1,"hi":3},{"lo":4,"hi":5},{"lo":6,"hi":8},{"lo":9,"hi":10},{"lo":11,"hi":12}
    ]);
    assert_eq!(json(&out)["division"], expect);
    let broken = bin(&["solve", "--instance", fixture, "--force-simplex", "[[6,9,16,21],[8,9,16,21]]"]);
    assert_eq!(broken.status.code(), Some(2));
}
