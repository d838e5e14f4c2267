use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn vld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vld"))
        .args(args)
        .env_remove("VLD_CONFIG")
        .env_remove("VLD_REMOTE_URL")
        .env_remove("VLD_REMOTE_TOKEN")
        .output()
        .expect("spawn vld")
}

fn ok(args: &[&str]) -> String {
    let out = vld(args);
    assert!(out.status.success(), "vld {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir` with its bytes, by relative path.
fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, p: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                walk(root, &e, out);
            } else {
                out.push((e.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&e).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

fn tasks(dir: &Path) -> Vec<Value> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("tasks.json")).unwrap()).unwrap();
    v["tasks"].as_array().unwrap().clone()
}

#[test]
fn gen_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out_a = ok(&["gen", "--out", s(&a), "--seed", "5", "--tasks", "30"]);
    let out_b = ok(&["gen", "--out", s(&b), "--seed", "5", "--tasks", "30"]);
    assert_eq!(out_a, out_b);
    assert!(out_a.starts_with("30 tasks"));
    assert_eq!(tree(&a), tree(&b));
    assert_eq!(tasks(&a).len(), 30);
}

#[test]
fn floor_flag_pins_every_target() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--out", s(&d), "--seed", "2", "--tasks", "25", "--floor", "1"]);
    let t = tasks(&d);
    assert_eq!(t.len(), 25);
    assert!(t.iter().all(|t| t["target_floor"] == 1), "{t:?}");
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--out", s(&d), "--seed", "8", "--tasks", "12"]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ta = ok(&["run", "--data", s(&d), "--out", s(&a), "--seed", "4", "--noise", "calibrated", "--jobs", "1"]);
    let tb = ok(&["run", "--data", s(&d), "--out", s(&b), "--seed", "4", "--noise", "calibrated", "--jobs", "4"]);
    assert_eq!(ta, tb);
    let (fa, fb) = (tree(&a), tree(&b));
    assert_eq!(fa.len(), 12 + 2);
    assert_eq!(fa, fb);
}

#[test]
fn report_recomputes_the_run_table() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let r = tmp.path().join("r");
    ok(&["gen", "--out", s(&d), "--seed", "9", "--tasks", "10"]);
    let table = ok(&["run", "--data", s(&d), "--out", s(&r)]);
    let again = ok(&["report", s(&r.join("traces")), "--data", s(&d)]);
    let metrics = |t: &str| t.lines().nth(2).unwrap().split_whitespace().skip(1).collect::<Vec<_>>().join(" ");
    assert_eq!(metrics(&table), metrics(&again));
}

#[test]
fn report_rejects_a_doctored_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let r = tmp.path().join("r");
    ok(&["gen", "--out", s(&d), "--seed", "9", "--tasks", "4"]);
    ok(&["run", "--data", s(&d), "--out", s(&r)]);
    let trace = r.join("traces").join("t0000.jsonl");
    let text = std::fs::read_to_string(&trace).unwrap();
    let (kept, footer) = text.trim_end().rsplit_once('\n').unwrap();
    let mut f: Value = serde_json::from_str(footer).unwrap();
    let flipped = if f["outcome"] == "success" { "budget_exhausted" } else { "success" };
    f["outcome"] = Value::from(flipped);
    std::fs::write(&trace, format!("{kept}\n{f}\n")).unwrap();
    assert!(!vld(&["report", s(&r.join("traces")), "--data", s(&d)]).status.success());
}

#[test]
fn unreachable_remote_fails_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--out", s(&d), "--tasks", "2"]);
    let out = vld(&[
        "run",
        "--data",
        s(&d),
        "--out",
        s(&tmp.path().join("r")),
        "--backend",
        "remote",
        "--endpoint",
        "http://127.0.0.1:9",
        "--timeout-secs",
        "2",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn config_file_and_flags_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--out", s(&d), "--tasks", "3"]);
    let cfg = tmp.path().join("c.json");
    let r = tmp.path().join("r");
    std::fs::write(&cfg, serde_json::json!({ "data": d, "out": r, "viewpoint": "default", "seed": 6 }).to_string())
        .unwrap();
    let table = ok(&["--config", s(&cfg), "run", "--seed", "7"]);
    assert!(table.contains("default/backend/ours"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(r.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["run"]["seed"], 7);
    std::fs::write(&cfg, r#"{"viewpoint": "default", "sed": 6}"#).unwrap();
    assert!(!vld(&["--config", s(&cfg), "run"]).status.success());
}

#[test]
fn ablation_table_has_a_row_per_variant_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let a = tmp.path().join("a");
    ok(&["gen", "--out", s(&d), "--seed", "1", "--tasks", "6"]);
    let table = ok(&["ablate", "--data", s(&d), "--out", s(&a), "--study", "viewpoint", "--seeds", "1,2"]);
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 3 * 2 + 3, "{table}");
    for v in ["ours", "random", "default"] {
        assert!(rows.iter().any(|r| r.starts_with(&format!("{v} (pooled)"))));
        assert!(a.join(format!("{v}-s2")).join("report.json").exists());
    }
    assert!(a.join("ablation.json").exists());
}
