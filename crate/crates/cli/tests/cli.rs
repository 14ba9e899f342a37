use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    repo().join("scenarios").join(format!("{name}.json"))
}

fn fieldc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldc")).args(args).env_remove("FIELDC_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, name: &str, body: serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    p
}

fn small_line(seed: u64) -> serde_json::Value {
    serde_json::json!({
        "version": 1,
        "program": "distance(sense(source))",
        "topology": {"kind": "uniformRandom", "n": 6, "width": 4.0, "height": 4.0},
        "radius": 2.0,
        "seed": seed,
        "sensors": {"defaults": {"source": false}, "devices": {"0": {"source": true}}},
        "schedule": {"mode": "fairAsync", "jitter": 0.4},
        "rounds": 8
    })
}

#[test]
fn check_accepts_the_standard_library() {
    let lib = repo().join("crates/core/stdlib.fc");
    let o = fieldc(&["check", lib.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains(": ok ("));
}

#[test]
fn check_reports_parse_errors_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fc");
    fs::write(&bad, "def f(x) {\n  x +\n}\n").unwrap();
    let o = fieldc(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bad.fc:"), "{err}");
    let loc = err.split("bad.fc:").nth(1).unwrap();
    let parts: Vec<&str> = loc.splitn(3, ':').collect();
    assert!(parts[0].parse::<u32>().is_ok() && parts[1].parse::<u32>().is_ok(), "{err}");
}

#[test]
fn check_with_stdlib_resolves_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("uses.fc");
    fs::write(&f, "gossipMin(sense(v))\n").unwrap();
    let o = fieldc(&["check", "--with-stdlib", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("main expression"));
}

#[test]
fn run_is_reproducible() {
    let s = scenario("gct_distance_to");
    let a = fieldc(&["run", s.to_str().unwrap(), "--rounds", "20"]);
    let b = fieldc(&["run", s.to_str().unwrap(), "--rounds", "20"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_flag_overrides_environment_which_overrides_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), "s.json", small_line(1));
    let s = s.to_str().unwrap();
    let with_env = |seed: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_fieldc"));
        c.args(args).env_remove("FIELDC_SEED");
        if let Some(v) = seed {
            c.env("FIELDC_SEED", v);
        }
        c.output().unwrap().stdout
    };
    let from_scenario = with_env(None, &["run", s]);
    let explicit_one = with_env(None, &["--seed", "1", "run", s]);
    let explicit_nine = with_env(None, &["--seed", "9", "run", s]);
    let env_nine = with_env(Some("9"), &["run", s]);
    let flag_wins = with_env(Some("9"), &["--seed", "1", "run", s]);
    assert_eq!(from_scenario, explicit_one);
    assert_ne!(from_scenario, explicit_nine);
    assert_eq!(env_nine, explicit_nine);
    assert_eq!(flag_wins, explicit_one);
}

#[test]
fn out_writes_only_inside_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = fieldc(&["--out", out.to_str().unwrap(), "run", scenario("distance_line5").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let written: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(!written.is_empty());
    assert!(written.iter().all(|n| n.ends_with(".csv") || n.ends_with(".json")), "{written:?}");

    let mut escaping = small_line(1);
    escaping["outputs"] = serde_json::json!({"csv": "../escaped.csv"});
    let s = write_scenario(dir.path(), "escape.json", escaping);
    let o = fieldc(&["--out", out.to_str().unwrap(), "run", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("escaped.csv").exists());
}

#[test]
fn analyze_flags_the_gossip_dip() {
    let o = fieldc(&["analyze", scenario("gossip_dip").to_str().unwrap(), "--property", "self-stabilization-correctness"]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn analyze_passes_distance_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("distance_grid5");
    let o = fieldc(&["--out", dir.path().to_str().unwrap(), "analyze", s.to_str().unwrap(), "--property", "self-stabilization-correctness"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report = dir.path().join("distance_grid5.self-stabilization-correctness.json");
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(parsed.is_object());
}

#[test]
fn analyze_without_oracle_is_an_error() {
    let o = fieldc(&["analyze", scenario("gct_broadcast").to_str().unwrap(), "--property", "self-stabilization-correctness"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_scenario_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = small_line(1);
    body["colour"] = serde_json::json!("blue");
    let s = write_scenario(dir.path(), "typo.json", body);
    let o = fieldc(&["run", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("typo.json"), "{}", stderr(&o));
}

#[test]
fn missing_files_exit_with_two() {
    assert_eq!(fieldc(&["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
    assert_eq!(fieldc(&["check", "/nonexistent/file.fc"]).status.code(), Some(2));
}

#[test]
fn dump_stdlib_round_trips_through_check() {
    let o = fieldc(&["dump-stdlib"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for def in ["distance", "gossipMin", "hopCountDistance"] {
        assert!(text.contains(&format!("def {def}(")), "{def} missing");
    }
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("lib.fc");
    fs::write(&f, text).unwrap();
    assert_eq!(fieldc(&["check", f.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn list_builtins_names_the_core_operators() {
    let o = fieldc(&["list-builtins"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["minHood", "sumHood", "mux", "sense"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing");
    }
}
