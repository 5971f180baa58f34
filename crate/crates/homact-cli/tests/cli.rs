use std::path::PathBuf;
use std::process::{Command, Output};

fn homact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homact")).args(args).env_remove("HOMACT_BUDGET").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn tmp(name: &str, body: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("homact-cli-{}-{name}", std::process::id()));
    std::fs::write(&p, body).unwrap();
    p
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).lines().next().unwrap()).unwrap()
}

#[test]
fn rado_commands() {
    assert_eq!(stdout(&homact(&["rado", "adjacent", "1", "3"])).trim(), "true");
    let o = homact(&["--json", "rado", "witness", "-U", "1,2", "-V", "3"]);
    assert_eq!(json(&o)["witness"], "6");
    let seed = tmp("seed.json", r#"{"vertices": 3, "edges": [[0, 1]]}"#);
    let spec = format!("limit:{}:1", seed.display());
    let o = homact(&["--json", "rado", "witness", "--backend", &spec, "-U", "b0,{b1}", "-V", "b2"]);
    assert_eq!(json(&o)["witness"], "{b0,{b1}}");
    assert_eq!(stdout(&homact(&["rado", "enum", "--backend", &spec, "-n", "4"])), "b0\nb1\nb2\n{b0}\n");
}

#[test]
fn loops_are_errors() {
    let o = homact(&["rado", "adjacent", "4", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("loop"));
}

#[test]
fn group_commands() {
    let o = homact(&["--json", "group", "nf", "--group", "zz", "1:1.2:1.2:-1"]);
    assert_eq!(json(&o)["normal_form"], "1:1");
    let o = homact(&["--json", "group", "act", "--group", "modular", "1:1", "b(1)"]);
    assert_eq!(json(&o)["gx"], "b(1:1)");
    let o = homact(&["--json", "group", "witness", "--group", "modular", "--kind", "hcf", "--elems", "1:1", "--F", "b(1)"]);
    assert!(json(&o)["witness"]["element"].is_string());
}

#[test]
fn budget_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_homact"))
        .args(["group", "witness", "--group", "modular", "--kind", "disconnect", "--F", "b(1),b(2:1)"])
        .env("HOMACT_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn extend_prints_committed_pairs() {
    let o = homact(&["extend", "--map", "0:2,5:7", "--query", "1,3"]);
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.iter().any(|v| v["x"] == "5" && v["y"] == "7"));
    assert!(lines.iter().any(|v| v["x"] == "3"));
}

#[test]
fn equivariant_extend_needs_sigma_closed_maps() {
    let o = homact(&["extend", "--sigma", "modular=1:1", "--map", "b(1):b(2:1)"]);
    assert_eq!(o.status.code(), Some(1));
    let o = homact(&["extend", "--sigma", "modular=1:1", "--map", "b(1):b(2:1),b(1:1):b(1:1.2:1)", "--query", "b(2:1)"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generic_run_writes_certificates() {
    let out = std::env::temp_dir().join(format!("homact-cli-{}-certs.jsonl", std::process::id()));
    let o = homact(&["--json", "generic", "run", "--steps", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(json(&o)["reverified"], 4);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    for l in text.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v["requirement"]["kind"].is_string() && v["support"].is_u64());
    }
}

#[test]
fn free_step_and_gog() {
    let o = homact(&["--json", "free", "step", "--phi", "b(1):b(a1)", "--F", "b(1)"]);
    assert!(json(&o)["w_len"].as_u64().unwrap() > 0);
    assert_eq!(json(&homact(&["--json", "gog", "decompose", "--edge", "e0"]))["kind"], "Amalgam");
    assert_eq!(json(&homact(&["--json", "gog", "decompose", "--edge", "t"]))["kind"], "Hnn");
    assert_eq!(homact(&["gog", "decompose", "--edge", "nope"]).status.code(), Some(1));
}

#[test]
fn limit_commands() {
    let seed = tmp("lseed.json", r#"{"vertices": 3, "edges": []}"#);
    let s = seed.to_str().unwrap();
    let o = homact(&["limit", "stage", "--seed", s, "--upto", "1", "--export", "dot"]);
    assert!(stdout(&o).contains("// vertices: b0 b1 b2 {b0}"));
    let o = homact(&["--json", "limit", "fix", "--seed", s, "--perm", "1,0,2", "--window", "10"]);
    assert_eq!(json(&o)["fixed"], serde_json::json!(["b2", "{b0,b1}", "{b2}", "{b0,b1,b2}"]));
}

#[test]
fn export_counts() {
    let out = std::env::temp_dir().join(format!("homact-cli-{}-w.jsonl", std::process::id()));
    let o = homact(&["--json", "export", "--window", "0..7", "--format", "jsonl", "--out", out.to_str().unwrap()]);
    assert_eq!(json(&o)["edges"], 12);
    let o = homact(&["export", "--window", "3", "--format", "svg", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_exit_codes() {
    let o = homact(&["verify", "--suite", "backends"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_report(&o)["status"], "pass");

    let faulty = tmp("faulty.toml", "[faults]\nflip = [[\"2\", \"5\"]]\n[budgets]\nwindow = 10\nr_universe = 4\n");
    let o = homact(&["verify", "--suite", "backends", "--config", faulty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("(2,5)"));

    let tiny = tmp(
        "tiny.toml",
        "[[groups]]\nname = \"z\"\nkind = \"integers\"\n[[groups]]\nname = \"zz\"\nkind = \"free_product\"\n\
         left = \"z\"\nright = \"z\"\n[action]\namalgams = [\"zz\"]\n[budgets]\nsearch = 1\ndensity_requirements = 2\n",
    );
    let o = homact(&["verify", "--suite", "amalgam", "--config", tiny.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json_report(&o)["status"], "inconclusive");

    assert_eq!(homact(&["verify", "--suite", "nope"]).status.code(), Some(1));
}

#[test]
fn bad_config_reports_its_position() {
    let bad = tmp("bad.toml", "seed = 1\n[budgets]\nsearch = 5\nbogus = 3\n");
    let o = homact(&["verify", "--suite", "backends", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error at 4:"));
}

fn json_report(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap()
}
