//! End-to-end tests of the `descred` binary: exit codes, JSON outputs,
//! and byte-level determinism of reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_descred"))
        .args(args)
        .env_remove("DESCRED_SEED")
        .output()
        .expect("binary runs")
}

fn run_seeded(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_descred"))
        .args(args)
        .env("DESCRED_SEED", seed)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf8 path")
}

/// The three-state index-two system used across the suite, with one input.
const FORCED: &str = r#"{
  "schema_version": "1",
  "n": 3,
  "m": 1,
  "E": [[2, -2, -2], [2, 2, -2], [0, 0, 0]],
  "A": [[1, 1, 1], [1, -1, 1], [1, 1, -1]],
  "B": [[0], [0], [1]]
}"#;

const UNFORCED: &str = r#"{
  "schema_version": "1",
  "n": 3,
  "m": 0,
  "E": [[2, -2, -2], [2, 2, -2], [0, 0, 0]],
  "A": [[1, 1, 1], [1, -1, 1], [1, 1, -1]]
}"#;

/// Nilpotent shifted matrix: no consistency space at all.
const PURE: &str = r#"{
  "schema_version": "1",
  "n": 2,
  "m": 0,
  "E": [[0, 1], [0, 0]],
  "A": [[1, 0], [0, 1]]
}"#;

/// Nonsingular E: an ordinary ODE in disguise, no fast part.
const NO_FAST: &str = r#"{
  "schema_version": "1",
  "n": 2,
  "m": 0,
  "E": [[1, 0], [0, 1]],
  "A": [[-1, 0], [0, -2]]
}"#;

/// det(sE - A) vanishes identically.
const IRREGULAR: &str = r#"{
  "schema_version": "1",
  "n": 2,
  "m": 0,
  "E": [[1, 0], [0, 0]],
  "A": [[1, 0], [0, 0]]
}"#;

const SWITCHED_OK: &str = r#"{
  "schema_version": "1",
  "n": 3,
  "m": 0,
  "modes": [
    {"E": [[2, -2, -2], [2, 2, -2], [0, 0, 0]],
     "A": [[1, 1, 1], [1, -1, 1], [1, 1, -1]]},
    {"E": [[2, -2, -2], [2, 2, -2], [0, 0, 0]],
     "A": [[2, 2, 2], [2, -2, 2], [2, 2, -2]]}
  ]
}"#;

#[test]
fn analyze_prints_the_report_as_json() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", UNFORCED);
    let out = run(&["analyze", path_str(&sys)]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["index"], 2);
    assert_eq!(report["consistency_dim"], 1);
    assert_eq!(report["regular"], true);
    assert_eq!(report["is_pure"], false);
    let ranks: Vec<u64> = report["rank_sequence"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(ranks, vec![3, 2, 1, 1]);
}

#[test]
fn analyze_is_deterministic_and_mirrors_the_output_file() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", UNFORCED);
    let report = dir.path().join("report.json");

    let first = run(&["analyze", path_str(&sys), "-o", path_str(&report)]);
    let second = run(&["analyze", path_str(&sys)]);
    assert_eq!(code(&first), 0);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout, "stdout must be byte-identical");

    let on_disk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let printed: serde_json::Value = serde_json::from_str(&stdout(&first)).unwrap();
    assert_eq!(on_disk, printed);
}

#[test]
fn analyze_exits_3_on_an_irregular_pencil() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", IRREGULAR);
    let out = run(&["analyze", path_str(&sys)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("regular"), "stderr: {}", stderr(&out));
}

#[test]
fn malformed_and_mismatched_files_exit_2() {
    let dir = TempDir::new().unwrap();
    let garbage = write(&dir, "bad.json", "{ this is not json");
    assert_eq!(code(&run(&["analyze", path_str(&garbage)])), 2);

    let wrong_shape = write(
        &dir,
        "shape.json",
        r#"{"schema_version": "1", "n": 3, "m": 0,
            "E": [[1, 0], [0, 0]], "A": [[0, 1], [1, 0]]}"#,
    );
    assert_eq!(code(&run(&["analyze", path_str(&wrong_shape)])), 2);

    assert_eq!(
        code(&run(&[
            "analyze",
            path_str(&dir.path().join("absent.json"))
        ])),
        2
    );
}

#[test]
fn complex_entries_parse_as_re_im_pairs() {
    let dir = TempDir::new().unwrap();
    let sys = write(
        &dir,
        "complex.json",
        r#"{"schema_version": "1", "n": 2, "m": 0,
            "E": [[[0, 1], 0], [0, 0]], "A": [[1, 0], [0, 1]]}"#,
    );
    let out = run(&["analyze", path_str(&sys)]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // E = [[i, 0], [0, 0]] against A = I is a rank-one pencil of index 1.
    assert_eq!(report["index"], 1);
}

#[test]
fn bad_flag_values_exit_2() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", UNFORCED);
    let s = path_str(&sys);
    assert_eq!(code(&run(&["reduce", s, "--side", "sideways"])), 2);
    assert_eq!(code(&run(&["analyze", s, "--tol", "loose"])), 2);
    assert_eq!(code(&run(&["analyze", s, "--lambda", "one"])), 2);
}

#[test]
fn reduce_writes_byte_identical_reruns() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", UNFORCED);
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");

    let first = run(&["reduce", path_str(&sys), "--k", "1", "-o", path_str(&out_a)]);
    assert_eq!(code(&first), 0, "stderr: {}", stderr(&first));
    let second = run(&["reduce", path_str(&sys), "--k", "1", "-o", path_str(&out_b)]);
    assert_eq!(code(&second), 0);
    assert_eq!(
        fs::read(&out_a).unwrap(),
        fs::read(&out_b).unwrap(),
        "reduction files must be byte-identical across reruns"
    );

    let file: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_a).unwrap()).unwrap();
    assert_eq!(file["reduction"]["kind"], "reduced");
    assert_eq!(file["reduction"]["data"]["k_used"], 1);
    assert_eq!(file["reduction"]["data"]["index"], 1);
    assert_eq!(file["reduction"]["data"]["side"], "range");
    assert!(file["provenance"]["source_sha256"].is_string());
}

#[test]
fn reduce_at_full_depth_then_check_passes() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", UNFORCED);
    let red = dir.path().join("red.json");

    let reduce = run(&["reduce", path_str(&sys), "-o", path_str(&red)]);
    assert_eq!(code(&reduce), 0, "stderr: {}", stderr(&reduce));

    let check = run(&["check", path_str(&sys), path_str(&red)]);
    assert_eq!(code(&check), 0, "stdout: {}", stdout(&check));
    assert!(stdout(&check).contains("CHECK PASSED"));
}

#[test]
fn corange_reduction_checks_out_too() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", FORCED);
    let red = dir.path().join("red.json");

    let reduce = run(&[
        "reduce",
        path_str(&sys),
        "--side",
        "corange",
        "-o",
        path_str(&red),
    ]);
    assert_eq!(code(&reduce), 0, "stderr: {}", stderr(&reduce));

    let file: serde_json::Value = serde_json::from_str(&fs::read_to_string(&red).unwrap()).unwrap();
    assert_eq!(file["reduction"]["data"]["side"], "corange");
    assert!(
        !file["reduction"]["data"]["g_tilde"].is_null(),
        "forced system must carry its reduced input block"
    );

    let check = run(&["check", path_str(&sys), path_str(&red)]);
    assert_eq!(code(&check), 0, "stdout: {}", stdout(&check));
}

#[test]
fn standard_exits_4_on_a_pure_system() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "pure.json", PURE);
    let out = run(&["standard", path_str(&sys)]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("pure"), "stderr: {}", stderr(&out));
}

#[test]
fn standard_then_check_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", UNFORCED);
    let std_file = dir.path().join("std.json");

    let standard = run(&["standard", path_str(&sys), "-o", path_str(&std_file)]);
    assert_eq!(code(&standard), 0, "stderr: {}", stderr(&standard));

    let first = run_seeded(&["check", path_str(&sys), path_str(&std_file)], "123");
    let second = run_seeded(&["check", path_str(&sys), path_str(&std_file)], "123");
    assert_eq!(code(&first), 0, "stdout: {}", stdout(&first));
    assert_eq!(first.stdout, second.stdout, "same seed, same bytes");
    assert!(stdout(&first).contains("CHECK PASSED"));

    let bad_seed = run_seeded(
        &["check", path_str(&sys), path_str(&std_file)],
        "not-a-number",
    );
    assert_eq!(code(&bad_seed), 2);
}

#[test]
fn qw_exits_4_on_pure_and_5_without_a_fast_part() {
    let dir = TempDir::new().unwrap();
    let pure = write(&dir, "pure.json", PURE);
    assert_eq!(code(&run(&["qw", path_str(&pure)])), 4);

    let no_fast = write(&dir, "odelike.json", NO_FAST);
    assert_eq!(code(&run(&["qw", path_str(&no_fast)])), 5);
}

#[test]
fn qw_then_check_passes_with_a_polynomial_input() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "sys.json", FORCED);
    let qw = dir.path().join("qw.json");

    let decompose = run(&["qw", path_str(&sys), "-o", path_str(&qw)]);
    assert_eq!(code(&decompose), 0, "stderr: {}", stderr(&decompose));

    let file: serde_json::Value = serde_json::from_str(&fs::read_to_string(&qw).unwrap()).unwrap();
    assert_eq!(file["reduction"]["kind"], "qw");

    let plain = run(&["check", path_str(&sys), path_str(&qw)]);
    assert_eq!(code(&plain), 0, "stdout: {}", stdout(&plain));

    let with_input = run(&[
        "check",
        path_str(&sys),
        path_str(&qw),
        "--input",
        "poly:0;1;0.5",
        "--z1",
        "0.7",
    ]);
    assert_eq!(code(&with_input), 0, "stdout: {}", stdout(&with_input));
    assert!(stdout(&with_input).contains("CHECK PASSED"));
}

#[test]
fn check_flags_a_reduction_of_a_different_system() {
    let dir = TempDir::new().unwrap();
    let original = write(&dir, "original.json", UNFORCED);
    let other = write(&dir, "other.json", NO_FAST2);
    let red = dir.path().join("red.json");

    let reduce = run(&["reduce", path_str(&other), "-o", path_str(&red)]);
    assert_eq!(code(&reduce), 0, "stderr: {}", stderr(&reduce));

    let check = run(&["check", path_str(&original), path_str(&red)]);
    assert_eq!(code(&check), 7, "stdout: {}", stdout(&check));
    assert!(stdout(&check).contains("CHECK FAILED"));
    assert!(
        stderr(&check).contains("different system file"),
        "provenance mismatch must be warned about: {}",
        stderr(&check)
    );
}

/// Same order as the fixture so the mismatched check exercises residuals,
/// not shape validation.
const NO_FAST2: &str = r#"{
  "schema_version": "1",
  "n": 3,
  "m": 0,
  "E": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
  "A": [[-1, 0, 0], [0, -2, 0], [0, 0, -3]]
}"#;

#[test]
fn switch_reduce_writes_a_checkable_file() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "switched.json", SWITCHED_OK);
    let red = dir.path().join("sw.json");

    let reduce = run(&["switch-reduce", path_str(&sys), "-o", path_str(&red)]);
    assert_eq!(code(&reduce), 0, "stderr: {}", stderr(&reduce));

    let file: serde_json::Value = serde_json::from_str(&fs::read_to_string(&red).unwrap()).unwrap();
    assert_eq!(file["reduction"]["kind"], "switched");

    let check = run(&["check", path_str(&sys), path_str(&red)]);
    assert_eq!(code(&check), 0, "stdout: {}", stdout(&check));
    assert!(stdout(&check).contains("CHECK PASSED"));
}

#[test]
fn single_and_switched_files_are_not_interchangeable() {
    let dir = TempDir::new().unwrap();
    let single = write(&dir, "single.json", UNFORCED);
    let switched = write(&dir, "switched.json", SWITCHED_OK);

    assert_eq!(code(&run(&["switch-reduce", path_str(&single)])), 2);
    assert_eq!(code(&run(&["analyze", path_str(&switched)])), 2);
}
