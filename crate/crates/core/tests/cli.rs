use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value as Json;

fn data(path: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(path).display().to_string()
}

fn migrate(bench: &str, out: &std::path::Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_migrate"))
        .args(["--source-docs", &data("mock_source.json"), "--target-docs", &data("mock_target.json")])
        .args(["--program", &data(&format!("benchmarks/{bench}.src"))])
        .args(["--tests", &data(&format!("benchmarks/{bench}.tests.json"))])
        .args(["--out", &out.display().to_string()])
        .args(extra)
        .output()
        .expect("migrate runs")
}

fn report(out: &std::path::Path) -> Json {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn full_migration_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = migrate("image_classifier", dir.path(), &["--reproducible"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let program = std::fs::read_to_string(dir.path().join("migrated.src")).unwrap();
    assert!(program.starts_with("input x\n"));
    assert!(program.contains("mt.nn.Conv2d(") && program.contains("permute("), "{program}");
    assert!(!program.contains("mf."));
    let r = report(dir.path());
    assert_eq!(r["status"], "migrated");
    assert_eq!(r["verified"], true);
    assert_eq!(r["totals"]["lines_migrated"], 5);
    assert!(r["totals"].get("elapsed_secs").is_none());
}

#[test]
fn missing_program_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_migrate"))
        .args(["--source-docs", &data("mock_source.json"), "--target-docs", &data("mock_target.json")])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--program") && err.contains("Usage"), "{err}");
}

#[test]
fn bad_flag_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for extra in [&["--mode", "word2vec"][..], &["--top-k", "0"], &["--mode", "tfidf-embedding"], &["--adapter", "x", "--mock"]] {
        let o = migrate("tensor_math", dir.path(), extra);
        assert_eq!(o.status.code(), Some(1), "{extra:?}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_migrate")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unmatched_line_gives_partial_result() {
    // with three candidate APIs per line, `negate` finds no equivalent
    let dir = tempfile::tempdir().unwrap();
    let o = migrate("normalized_rows", dir.path(), &["--top-k", "3"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let program = std::fs::read_to_string(dir.path().join("migrated.src")).unwrap();
    assert!(program.contains("# unmigrated: h1 = mf.math.negate(x)"), "{program}");
    let r = report(dir.path());
    assert_eq!(r["status"], "partial");
    assert_eq!(r["lines"][0]["status"], "failed");
    assert_eq!(r["lines"][1]["status"], "skipped");
}

#[test]
fn embedding_mode_recovers_the_synonym() {
    let dir = tempfile::tempdir().unwrap();
    let o = migrate(
        "normalized_rows",
        dir.path(),
        &["--top-k", "3", "--mode", "tfidf-embedding", "--embeddings", &data("mock_embeddings.txt")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(dir.path().join("migrated.src")).unwrap().contains("mt.neg(x)"));
}

#[test]
fn external_adapter_gives_the_same_result() {
    let mock = tempfile::tempdir().unwrap();
    let external = tempfile::tempdir().unwrap();
    assert_eq!(migrate("table_top", mock.path(), &["--reproducible"]).status.code(), Some(0));
    let o = migrate("table_top", external.path(), &["--reproducible", "--adapter", env!("CARGO_BIN_EXE_mock-adapter")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let read = |d: &tempfile::TempDir| std::fs::read_to_string(d.path().join("migrated.src")).unwrap();
    assert_eq!(read(&mock), read(&external));
    let mut a = report(mock.path());
    let mut b = report(external.path());
    assert_eq!(b["config"]["backend"], "external");
    a["config"]["backend"] = Json::Null;
    b["config"]["backend"] = Json::Null;
    assert_eq!(a, b);
}

#[test]
fn failed_adapter_start_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = migrate("table_top", dir.path(), &["--adapter", "exit 3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn manifest_paths_are_relative_to_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["mock_source.json", "mock_target.json", "benchmarks/tensor_math.src", "benchmarks/tensor_math.tests.json"] {
        let name = f.rsplit('/').next().unwrap();
        std::fs::copy(data(f), dir.path().join(name)).unwrap();
    }
    let manifest = r#"{"source_docs": "mock_source.json", "target_docs": "mock_target.json",
        "program": "tensor_math.src", "tests": "tensor_math.tests.json", "out": "result", "budget": 500}"#;
    std::fs::write(dir.path().join("run.json"), manifest).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_migrate"))
        .args(["--config", &dir.path().join("run.json").display().to_string(), "--seed", "9"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("result"));
    assert_eq!(r["config"]["enumeration_budget"], 500);
    assert_eq!(r["config"]["seed"], 9);

    std::fs::write(dir.path().join("bad.json"), r#"{"programme": "x"}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_migrate"))
        .args(["--config", &dir.path().join("bad.json").display().to_string()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
