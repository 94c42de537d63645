use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_teach");

fn teach(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("TEACH_TASKS")
        .env_remove("TEACH_FORMAT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_shipped_library() {
    let o = teach(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("12 tasks, 0 errors"), "{}", stdout(&o));
}

#[test]
fn validate_rejects_a_broken_library() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("broken.task"), "{\"task_id\": 1, \"task_name\": ").unwrap();
    let o = teach(&["validate", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("0 tasks, 1 errors"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [&["frobnicate"][..], &["play", "--seeds"], &["--max-steps", "0", "validate"], &["eval", "edh"], &["--format", "xml", "validate"]] {
        assert_eq!(teach(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn play_writes_one_replayable_session_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = teach(&["--format", "record", "play", "--task", "Make Coffee", "--seeds", "0..49", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = json_files(dir.path());
    assert_eq!(files.len(), 50);
    let summary = stdout(&o).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["summary"], true);

    let o = teach(&["--format", "record", "replay", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert_eq!(v["sessions"], 50);
    assert_eq!(v["diverged"], 0);
}

#[test]
fn seed_ranges_include_both_ends() {
    let dir = tempfile::tempdir().unwrap();
    let o = teach(&["gen", "--task", "Water Plant", "--seeds", "5..7", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json_files(dir.path()).len(), 3);
    assert_eq!(teach(&["gen", "--task", "Water Plant", "--seeds", "7..5", "--out", s(dir.path())]).status.code(), Some(1));
}

#[test]
fn tampered_session_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let o = teach(&["play", "--task", "Make Coffee", "--seeds", "3", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let file = json_files(dir.path()).remove(0);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    let actions = v["actions"].as_array_mut().unwrap();
    let k = actions.iter().position(|a| a["action"]["kind"] == "interact").unwrap();
    actions[k]["success"] = serde_json::Value::Bool(!actions[k]["success"].as_bool().unwrap());
    fs::write(&file, v.to_string()).unwrap();
    let o = teach(&["replay", s(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("diverges at action {k}")), "{}", stderr(&o));
}

#[test]
fn gen_then_play_matches_direct_play() {
    let dir = tempfile::tempdir().unwrap();
    let (sc, a, b) = (dir.path().join("sc"), dir.path().join("a"), dir.path().join("b"));
    let common = ["--task", "Clean All X", "--params", "Mug", "--seeds", "0..2"];
    let o = teach(&[&["gen"][..], &common, &["--out", s(&sc)]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json_files(&sc).len(), 3);
    assert_eq!(teach(&[&["play"][..], &common, &["--out", s(&a)]].concat()).status.code(), Some(0));
    assert_eq!(teach(&["play", "--scenarios", s(&sc), "--out", s(&b)]).status.code(), Some(0));
    let (fa, fb) = (json_files(&a), json_files(&b));
    assert_eq!(fa.len(), 3);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn segment_eval_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (sessions, inst) = (dir.path().join("sessions"), dir.path().join("inst"));
    assert_eq!(teach(&["play", "--task", "Make Coffee", "--seeds", "0..2", "--out", s(&sessions)]).status.code(), Some(0));
    let o = teach(&["--format", "record", "segment", s(&sessions), "--out", s(&inst)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let edh = json_files(&inst.join("edh"));
    assert!(!edh.is_empty());
    assert_eq!(json_files(&inst.join("tfd")).len(), 3);

    let o = teach(&["--format", "record", "eval", "edh", s(&inst.join("edh"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert_eq!(v["sr"], 1.0);
    assert_eq!(v["instances"], edh.len());

    let agent = format!("{BIN} agent follower");
    let o = teach(&["--format", "record", "--workers", "2", "eval", "edh", s(&inst.join("edh")), "--agent-cmd", &agent]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert_eq!(v["instances"], edh.len());
    assert_eq!(v["violations"], 0);
    assert!(v["sr"].as_f64().unwrap() > 0.0);

    let o = teach(&["eval", "tfd", s(&inst.join("edh"))]);
    assert_eq!(o.status.code(), Some(1));

    let o = teach(&["--format", "record", "stats", s(&sessions)]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows[0]["task"], "Make Coffee");
    assert_eq!(rows[0]["sessions"], 3);
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["play", "--task", "Make Coffee", "--seeds", "0", "--out", s(dir.path())])
        .env("TEACH_MAX_STEPS", "1")
        .env("TEACH_FORMAT", "record")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(first["success"], false);
}
