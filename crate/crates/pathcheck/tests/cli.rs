//! The `pathcheck` executable: exit codes, report formats, `eval`.

use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(file)
}

fn pathcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathcheck")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn full() -> Vec<String> {
    ["prelude.hott", "torus_maps.hott", "torus_equiv.hott"]
        .iter()
        .map(|f| corpus(f).display().to_string())
        .collect()
}

#[test]
fn whole_corpus_checks() {
    let files = full();
    let mut args = vec!["check"];
    args.extend(files.iter().map(String::as_str));
    let o = pathcheck(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().last(), Some("OK torus-equiv : Equiv (Prod S1 S1) T2"));
    assert!(out.contains("EVAL F (base, base) ~> Tb"));
    assert!(out.contains("EVAL epsilon base ~> refl (base, base)"));
    assert!(stderr(&o).is_empty());
}

#[test]
fn prelude_is_loaded_implicitly() {
    let maps = corpus("torus_maps.hott").display().to_string();
    let o = pathcheck(&["check", &maps]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("OK f : S1 -> T2"));
    let o = pathcheck(&["check", "--no-prelude", &maps]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[scope]"));
}

#[test]
fn negative_file_exits_one() {
    let f = corpus("negative/loop_defeq.hott").display().to_string();
    let o = pathcheck(&["check", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL refl (ap f loop) [not-convertible]"));
    let err = stderr(&o);
    assert!(err.contains("loop_defeq.hott:4:1: error[not-convertible]"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let o = pathcheck(&["check", "missing.hott"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[usage]"));
    assert_eq!(pathcheck(&["check"]).status.code(), Some(2));
    assert_eq!(pathcheck(&["eval"]).status.code(), Some(2));
    assert_eq!(pathcheck(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pathcheck(&["check", "--format", "xml", "a.hott"]).status.code(), Some(2));
}

#[test]
fn eval_examples() {
    let cases = [
        ("concat (refl base) (refl base)", "refl base"),
        ("S1-rec T2 Tb Tp base", "Tb"),
        ("(fun x => x) loop", "loop"),
    ];
    for (e, want) in cases {
        let o = pathcheck(&["eval", "-e", e]);
        assert_eq!(o.status.code(), Some(0), "{e}: {}", stderr(&o));
        assert_eq!(stdout(&o).trim_end(), want);
    }
    let maps = corpus("torus_maps.hott").display().to_string();
    let o = pathcheck(&["eval", "-e", "F (pair base base)", &maps]);
    assert_eq!(stdout(&o).trim_end(), "Tb");
    let o = pathcheck(&["eval", "-e", "ap f loop", &maps]);
    let stuck = stdout(&o);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(stuck.trim_end(), "Tp");
    assert!(stuck.starts_with("ap "));
}

#[test]
fn eval_failures_exit_one() {
    let o = pathcheck(&["eval", "-e", "loop base"]);
    assert_eq!(o.status.code(), Some(1));
    let o = pathcheck(&["eval", "-e", "nowhere"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[scope]"));
}

#[test]
fn eval_output_reparses() {
    let maps = corpus("torus_maps.hott").display().to_string();
    let first = stdout(&pathcheck(&["eval", "-e", "H", &maps]));
    let again = pathcheck(&["eval", "-e", first.trim_end(), &maps]);
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    assert_eq!(stdout(&again), first);
}

#[test]
fn json_lines_records() {
    let files = full();
    let mut args = vec!["check", "--format", "json-lines"];
    args.extend(files.iter().map(String::as_str));
    let o = pathcheck(&args);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut n = 0;
    for line in out.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["name", "status", "type", "duration-ms"] {
            assert!(v.get(key).is_some(), "{key} missing in {line}");
        }
        assert!(v["duration-ms"].is_null());
        n += 1;
    }
    assert!(n > 100);
    let last: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(last["name"], "torus-equiv");
    assert_eq!(last["type"], "Equiv (Prod S1 S1) T2");
}

#[test]
fn timing_fills_durations() {
    let f = corpus("torus_maps.hott").display().to_string();
    let o = pathcheck(&["check", "--format", "json-lines", "--timing", &f]);
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert!(first["duration-ms"].is_f64());
}

#[test]
fn trace_goes_to_stderr() {
    let o = pathcheck(&["eval", "--trace", "-e", "base", &corpus("torus_maps.hott").display().to_string()]);
    assert_eq!(stdout(&o).trim_end(), "base");
    let o = pathcheck(&["check", "--trace", &corpus("torus_maps.hott").display().to_string()]);
    assert!(stderr(&o).contains("trace: f: "));
}

#[test]
fn runs_are_byte_identical() {
    let files = full();
    let mut args = vec!["check", "--format", "json-lines"];
    args.extend(files.iter().map(String::as_str));
    let a = pathcheck(&args);
    let b = pathcheck(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    let n = corpus("negative/swapped_hexagon.hott").display().to_string();
    assert_eq!(pathcheck(&["check", &n]).stderr, pathcheck(&["check", &n]).stderr);
}
