//! End-to-end tests of the `brwlab` binary: runs, summaries, exit codes,
//! and byte-identical output across thread counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn brwlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_brwlab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("brwlab-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = brwlab().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "brwlab {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SMALL_FRONT: &str = r#"{
    "seed": 7,
    "experiment": {
        "kind": "front",
        "law": {
            "dimension": 2,
            "count_law": { "kind": "fixed", "k": 2 },
            "radial_law": { "kind": "chi", "sigma": 1.0 }
        },
        "t_max": 200,
        "runs": 12,
        "cap": 20000
    }
}"#;

const SMALL_MTO: &str = r#"{
    "seed": 11,
    "experiment": {
        "kind": "many_to_one",
        "law": {
            "dimension": 2,
            "count_law": { "kind": "fixed", "k": 2 },
            "radial_law": { "kind": "chi", "sigma": 1.0 }
        },
        "n_values": [1, 2],
        "replicas": 20000
    }
}"#;

const SMALL_BALLOT: &str = r#"{
    "seed": 13,
    "experiment": {
        "kind": "ballot_scaling",
        "walk": { "kind": "std_normal" },
        "barrier_c1": 1.0,
        "barrier_c2": 0.0,
        "a_values": [1.0],
        "b_values": [1.0],
        "n_values": [32, 256],
        "replicas": 30000
    }
}"#;

#[test]
fn run_front_and_summarize() {
    let dir = temp_dir("front");
    let config = write_config(&dir, "front.json", SMALL_FRONT);
    let out_dir = dir.join("runs");
    run_ok(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);

    // Exactly one run directory with table, plot, and manifest.
    let entries: Vec<_> = fs::read_dir(&out_dir).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let run_dir = entries[0].as_ref().unwrap().path();
    assert!(run_dir.join("front.csv").is_file());
    assert!(run_dir.join("front.svg").is_file());
    assert!(run_dir.join("run_manifest.json").is_file());
    let csv = fs::read_to_string(run_dir.join("front.csv")).unwrap();
    assert!(csv.starts_with("seed,config,t,median_rt,r_t,residual\n"));
    // Provenance columns on every row.
    for line in csv.lines().skip(1) {
        assert!(line.starts_with("7,"), "row missing seed: {line}");
    }

    let out = run_ok(&["summarize", out_dir.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS"), "{text}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn unknown_kind_exits_2() {
    let dir = temp_dir("badkind");
    let config = write_config(
        &dir,
        "bad.json",
        &SMALL_FRONT.replace("\"front\"", "\"fronts\""),
    );
    let out = brwlab()
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn invalid_replicas_exit_2() {
    let dir = temp_dir("badreplicas");
    let config = write_config(
        &dir,
        "bad.json",
        &SMALL_MTO.replace("20000", "10"),
    );
    let out = brwlab()
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn summarize_empty_dir_exits_0() {
    let dir = temp_dir("empty");
    let out = run_ok(&["summarize", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn summarize_skips_corrupted_manifest() {
    let dir = temp_dir("corrupt");
    let run_dir = dir.join("broken-run");
    fs::create_dir_all(&run_dir).unwrap();
    fs::write(run_dir.join("run_manifest.json"), "{not json").unwrap();
    let out = run_ok(&["summarize", dir.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("SKIP"), "{text}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn seed_override_changes_output_rows() {
    let dir = temp_dir("seedover");
    let config = write_config(&dir, "mto.json", SMALL_MTO);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    run_ok(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    run_ok(&[
        "run",
        config.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    let csv_a = read_single_csv(&out_a, "many_to_one.csv");
    let csv_b = read_single_csv(&out_b, "many_to_one.csv");
    assert_ne!(csv_a, csv_b);
    assert!(csv_b.lines().nth(1).unwrap().starts_with("99,"));
    let _ = fs::remove_dir_all(&dir);
}

fn read_single_csv(out_dir: &Path, name: &str) -> String {
    let entries: Vec<_> = fs::read_dir(out_dir).unwrap().collect();
    assert_eq!(entries.len(), 1);
    fs::read_to_string(entries[0].as_ref().unwrap().path().join(name)).unwrap()
}

#[test]
fn byte_identical_across_thread_counts() {
    // Determinism: the same config and seed produce byte-identical CSVs
    // at 1 and 8 worker threads, for a population experiment and a
    // stratified walk experiment.
    for (tag, config_body, csv_name) in [
        ("det-front", SMALL_FRONT, "front.csv"),
        ("det-ballot", SMALL_BALLOT, "ballot_scaling.csv"),
    ] {
        let dir = temp_dir(tag);
        let config = write_config(&dir, "config.json", config_body);
        let out_1 = dir.join("threads1");
        let out_8 = dir.join("threads8");
        run_ok(&[
            "run",
            config.to_str().unwrap(),
            "--threads",
            "1",
            "--out",
            out_1.to_str().unwrap(),
        ]);
        run_ok(&[
            "run",
            config.to_str().unwrap(),
            "--threads",
            "8",
            "--out",
            out_8.to_str().unwrap(),
        ]);
        let csv_1 = read_single_csv(&out_1, csv_name);
        let csv_8 = read_single_csv(&out_8, csv_name);
        assert_eq!(csv_1, csv_8, "thread count changed {csv_name}");
        let _ = fs::remove_dir_all(&dir);
    }
}
