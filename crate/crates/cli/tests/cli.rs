use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddi_cli::config::{Overrides, PipelineConfig};

fn ddi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddi")).args(args).output().expect("binary runs")
}

fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mini")
}

#[test]
fn train_without_featurize_names_the_missing_stage() {
    let out_dir = tempfile::tempdir().unwrap();
    let config = mini_dir().join("config.toml");
    let out = ddi(&[
        "--config",
        config.to_str().unwrap(),
        "--output",
        out_dir.path().to_str().unwrap(),
        "train",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ddi featurize"), "{err}");
}

#[test]
fn every_config_violation_is_reported_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        r#"
[paths]
corpus = "missing.tsv"
lexicon = "missing-lexicon.tsv"
catalog = "missing-catalog.tsv"

[split]
ratios = [0.5, 0.5, 0.5]

[cv]
k = 1
"#,
    )
    .unwrap();
    let out = ddi(&["--config", path.to_str().unwrap(), "ingest"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["missing.tsv", "missing-lexicon.tsv", "missing-catalog.tsv", "ratios", "cv.k"] {
        assert!(err.contains(needle), "{needle} not reported in:\n{err}");
    }
}

#[test]
fn stale_artifacts_are_refused_after_config_change() {
    let out_dir = tempfile::tempdir().unwrap();
    let config = mini_dir().join("config.toml");
    let (config, out) = (config.to_str().unwrap(), out_dir.path().to_str().unwrap());
    assert!(ddi(&["--config", config, "--output", out, "ingest"]).status.success());
    let again = ddi(&["--config", config, "--output", out, "--seed", "9", "filter"]);
    assert!(!again.status.success());
    let err = String::from_utf8_lossy(&again.stderr);
    assert!(err.contains("config digest"), "{err}");
}

#[test]
fn shipped_mini_corpus_is_regenerated_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddi(&["gen-synthetic", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    for name in ["abstracts.tsv", "lexicon.tsv", "catalog.tsv", "embeddings.txt", "mar.csv", "config.toml"] {
        let fresh = fs::read(dir.path().join(name)).unwrap();
        let shipped = fs::read(mini_dir().join(name)).unwrap();
        assert!(fresh == shipped, "{name} differs from the shipped copy");
    }
}

#[test]
fn mini_config_is_valid() {
    let cfg = PipelineConfig::load(&mini_dir().join("config.toml"), &Overrides::default()).unwrap();
    assert!(cfg.violations().is_empty(), "{:?}", cfg.violations());
}

#[test]
fn alerts_stage_prints_fixture_tuple() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixtures/mar/config.toml");
    let out_dir = tempfile::tempdir().unwrap();
    let out = ddi(&[
        "--config",
        fixture.to_str().unwrap(),
        "--output",
        out_dir.path().to_str().unwrap(),
        "alerts",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(r#"((Furosemide, Bumetanide), ("2015-07-15", "2015-07-19"), "Reduced Kidney Function")"#));
    let tsv = fs::read_to_string(out_dir.path().join("alerts/alerts.tsv")).unwrap();
    assert!(tsv.lines().any(|l| l.starts_with("P1\t")));
}
