use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rlsearch"))
}

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"version":1,"budget":5,"bogus":true}"#).unwrap();
    let out = bin().args(["train", "--env", "coordgame", "--trainer", "qlearn", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn checkpoint_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["search", "--env", "gridpacman", "--mode", "blueprint", "--blueprint"])
        .arg(format!("{FIXTURES}/coordgame/q.json"))
        .arg("--out")
        .arg(dir.path().join("r.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn search_writes_rows_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("r.jsonl");
    let traj = dir.path().join("t.jsonl");
    let out = bin()
        .env("RLSEARCH_DETERMINISTIC", "1")
        .args(["search", "--env", "coordgame", "--mode", "sparta", "--episodes", "2", "--seed", "3", "--blueprint"])
        .arg(format!("{FIXTURES}/coordgame/q.json"))
        .arg("--out")
        .arg(&res)
        .arg("--trajectories")
        .arg(&traj)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> = std::fs::read_to_string(&res).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["return"] == 1.0 && r["mode"] == "sparta" && r["wall_ms"] == 0));
    assert_eq!(std::fs::read_to_string(&traj).unwrap().lines().count(), 4);
}

#[test]
fn summarize_empty_dir_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("summarize").arg("--dir").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("summary.csv").exists());
}
