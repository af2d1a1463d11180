use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fedshare(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedshare"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_log(dir: &Path) -> PathBuf {
    let out = fedshare(
        dir,
        &[
            "gen-log",
            "--days",
            "3",
            "--sessions-per-day",
            "8",
            "--users",
            "12",
            "--out",
            "small.swf",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.join("small.swf")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_result_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    small_log(dir.path());
    let args = [
        "simulate",
        "--log",
        "small.swf",
        "--scenario",
        "1",
        "--algorithm",
        "simpl_direct",
        "--seed",
        "42",
        "--orgs",
        "3",
        "--trace",
        "--out",
        "a.json",
    ];
    let first = fedshare(dir.path(), &args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).starts_with("S1 simpl_direct jobs="));
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let trace = fs::read(dir.path().join("a.trace")).unwrap();
    assert!(!trace.is_empty());

    let second = fedshare(dir.path(), &args);
    assert!(second.status.success());
    assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), a);
    assert_eq!(fs::read(dir.path().join("a.trace")).unwrap(), trace);

    let result: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(result["schema_version"], 1);
    assert_eq!(result["wait_per_org"].as_object().unwrap().len(), 3);
}

#[test]
fn simulate_with_departure() {
    let dir = tempfile::tempdir().unwrap();
    small_log(dir.path());
    let out = fedshare(
        dir.path(),
        &[
            "simulate",
            "--log",
            "small.swf",
            "--algorithm",
            "fairshare",
            "--orgs",
            "3",
            "--depart",
            "csp02@3600",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let bad = fedshare(
        dir.path(),
        &[
            "simulate",
            "--log",
            "small.swf",
            "--algorithm",
            "fairshare",
            "--orgs",
            "3",
            "--depart",
            "nobody@10",
        ],
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    small_log(dir.path());
    let out = fedshare(
        dir.path(),
        &["simulate", "--log", "small.swf", "--algorithm", "fastest"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for name in [
        "orig_direct",
        "rel_direct",
        "simpl_direct",
        "fairshare",
        "round_robin",
    ] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn missing_log_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedshare(
        dir.path(),
        &[
            "simulate",
            "--log",
            "absent.swf",
            "--algorithm",
            "fairshare",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

fn write_table(dir: &Path, name: &str, entries: &str) {
    let text = format!(
        r#"{{"schema_version": 1, "organizations": ["1", "2", "3"], "entries": [{entries}]}}"#
    );
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn shapley_from_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("two.json"),
        r#"{"schema_version": 1, "organizations": ["1", "2"], "entries": [
            {"members": ["1"], "value": 1}, {"members": ["2"], "value": 3}, {"members": ["1", "2"], "value": 6}]}"#,
    )
    .unwrap();
    let out = fedshare(
        dir.path(),
        &["shapley", "--table", "two.json", "--out", "phi.json"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("phi(1) = 2\n"), "{text}");
    assert!(text.contains("phi(2) = 4\n"), "{text}");
    assert!(text.contains("v(N) = 6 : ok"), "{text}");
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("phi.json")).unwrap()).unwrap();
    assert_eq!(report["shapley"]["2"]["numer"], 4);
}

#[test]
fn shapley_rejects_incomplete_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_table(
        dir.path(),
        "gap.json",
        r#"{"members": ["1"], "value": 1}, {"members": ["2"], "value": 1}, {"members": ["3"], "value": 1},
           {"members": ["1", "2"], "value": 2}, {"members": ["2", "3"], "value": 2},
           {"members": ["1", "2", "3"], "value": 3}"#,
    );
    let out = fedshare(dir.path(), &["shapley", "--table", "gap.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("missing coalition {1,3}"),
        "{}",
        stderr(&out)
    );

    write_table(
        dir.path(),
        "grand.json",
        r#"{"members": ["1", "2", "3"], "value": 3}"#,
    );
    let out = fedshare(dir.path(), &["shapley", "--table", "grand.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing coalition"));
}

#[test]
fn shapley_from_log() {
    let dir = tempfile::tempdir().unwrap();
    small_log(dir.path());
    let out = fedshare(
        dir.path(),
        &[
            "shapley",
            "--log",
            "small.swf",
            "--orgs",
            "3",
            "--algorithms",
            "fairshare,simpl_direct",
            "--out",
            "r.json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).matches(": ok").count(), 2);
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn tournament_outputs_have_the_documented_shape_and_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    small_log(dir.path());
    let run = |out: &str| {
        fedshare(
            dir.path(),
            &[
                "tournament",
                "--log",
                "small.swf",
                "--samples",
                "2",
                "--orgs",
                "3",
                "--scenario",
                "1",
                "--algorithms",
                "simpl_direct,fairshare",
                "--seed",
                "5",
                "--jobs",
                "2",
                "--out",
                out,
            ],
        )
    };
    let out = run("a");
    assert!(out.status.success(), "{}", stderr(&out));
    let a = dir.path().join("a");
    assert_eq!(csv_rows(&a.join("detail.csv")).len(), 4);
    let table = csv_rows(&a.join("table.csv"));
    assert_eq!(table.len(), 2);
    assert!(table.iter().all(|row| row.len() == 2));
    let scores = csv::Reader::from_path(a.join("scores.csv"))
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    assert_eq!(
        scores.iter().collect::<Vec<_>>(),
        ["algorithm", "scenario", "log", "score"]
    );

    assert!(run("b").status.success());
    for f in [
        "scores.csv",
        "table.csv",
        "detail.csv",
        "reports.json",
        "manifest.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tournament_config_file_and_default_rows() {
    let dir = tempfile::tempdir().unwrap();
    small_log(dir.path());
    fs::write(
        dir.path().join("exp.json"),
        r#"{"logs": ["small.swf"], "samples": 1, "n_orgs": 2, "scenarios": ["S2"], "out": "cfg"}"#,
    )
    .unwrap();
    let out = fedshare(dir.path(), &["tournament", "--config", "exp.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = csv_rows(&dir.path().join("cfg").join("table.csv"));
    let names: Vec<&str> = table.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        names,
        [
            "orig_direct",
            "rel_direct",
            "simpl_direct",
            "fairshare",
            "round_robin"
        ]
    );

    let bad = fedshare(
        dir.path(),
        &["tournament", "--log", "absent.swf", "--samples", "1"],
    );
    assert_eq!(bad.status.code(), Some(1));
}
