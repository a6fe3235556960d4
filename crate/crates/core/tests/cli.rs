use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QUADRATIC: &str = "\
[problem]
kind = quadratic
n = 5
d = 4
r = 2
manifold = stiefel
[graph]
kind = ring
[algorithm]
name = rextra
grid = 0.1, 0.3
[run]
max_epochs = 40
";

fn rextra(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rextra"));
    cmd.args(args).env_remove("REXTRA_OUTPUT_DIR");
    if let Some(dir) = out_dir {
        cmd.env("REXTRA_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "summary.csv")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_write_identical_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.cfg", QUADRATIC);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(rextra(&["run", &cfg], Some(&a)).status.success());
    assert!(rextra(&["grid", &cfg], Some(&b)).status.success());
    let first = csv_files(&a);
    assert_eq!(first.len(), 2);
    assert_eq!(first, csv_files(&b));
    for (name, bytes) in &first {
        assert_eq!(name.len(), "0123456789abcdef.csv".len());
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("k,epoch,comm_entries_cum,consensus_err,grad_norm,fval,ds\n"));
    }

    assert!(rextra(&["run", &cfg], Some(&a)).status.success());
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
}

#[test]
fn output_dir_flag_and_config_default() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "q.cfg",
        &QUADRATIC.replace(
            "max_epochs = 40\n",
            "max_epochs = 5\noutput_dir = results\n",
        ),
    );
    assert!(rextra(&["run", &cfg], None).status.success());
    assert!(tmp.path().join("results").join("summary.csv").is_file());
    let flag = tmp.path().join("flag");
    let out = rextra(&["run", &cfg, "--output-dir", flag.to_str().unwrap()], None);
    assert!(out.status.success());
    assert!(flag.join("summary.csv").is_file());
}

#[test]
fn config_errors_exit_nonzero_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        "bad.cfg",
        &QUADRATIC
            .replace("name = rextra", "name = nope")
            .replace("kind = ring", "kind = ring\nspeed = 3"),
    );
    let out = rextra(&["run", &bad], Some(tmp.path()));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 9: unknown key `graph.speed`"), "{err}");
    assert!(err.contains("line 11: unknown value `nope`"), "{err}");
    assert!(!tmp.path().join("summary.csv").exists());

    let missing = rextra(&["validate", "/nonexistent/x.cfg"], None);
    assert_eq!(missing.status.code(), Some(2));

    let alpha = write_config(
        tmp.path(),
        "a.cfg",
        &QUADRATIC.replace("grid = 0.1, 0.3", "alpha = 0.1"),
    );
    assert_eq!(
        rextra(&["grid", &alpha], Some(tmp.path())).status.code(),
        Some(2)
    );
}

#[test]
fn validate_prints_mixing_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "q.cfg", QUADRATIC);
    let out = rextra(&["validate", &cfg], None);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("graph ring with 5 nodes and 5 edges"),
        "{text}"
    );
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 6);
    assert!(!text.contains("FAIL"));
}

#[test]
fn probe_prints_a_table() {
    let out = rextra(&["probe", "lemmas", "--samples", "30", "--seed", "4"], None);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(!rextra(&["probe", "nothing"], None).status.success());
}
