//! Output layout, config-digest headers, and per-stage manifests.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};

use ddi_core::splitting::Split;

/// A file under the output directory and the stage that writes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Artifact {
    pub rel: &'static str,
    pub stage: &'static str,
}

const fn art(rel: &'static str, stage: &'static str) -> Artifact {
    Artifact { rel, stage }
}

pub const INGEST_ABSTRACTS: Artifact = art("ingest/abstracts.tsv", "ingest");
pub const INGEST_STATS: Artifact = art("ingest/stats.txt", "ingest");
pub const FILTER_ABSTRACTS: Artifact = art("filter/abstracts.tsv", "filter");
pub const FILTER_STATS: Artifact = art("filter/stats.txt", "filter");
pub const LABEL_SAMPLES: Artifact = art("label/samples.tsv", "label");
pub const LABEL_TEMPLATES: Artifact = art("label/templates.tsv", "label");
pub const LABEL_REPORT: Artifact = art("label/report.txt", "label");
pub const SPLIT_ASSIGNMENT: Artifact = art("split/assignment.tsv", "split");
pub const SPLIT_SAMPLES: Artifact = art("split/samples.tsv", "split");
pub const SPLIT_LEAKAGE: Artifact = art("split/leakage.txt", "split");
pub const SPLIT_DIAGNOSIS: Artifact = art("split/diagnosis.txt", "diagnose-split");
pub const FEATURE_VOCAB: Artifact = art("featurize/vocab.tsv", "featurize");
pub const FEATURE_REPORT: Artifact = art("featurize/report.txt", "featurize");
pub const MODEL: Artifact = art("train/model.txt", "train");
pub const MODEL_CV: Artifact = art("train/cv.tsv", "train");
pub const MODEL_REPORT: Artifact = art("train/report.txt", "train");
pub const MODEL_TOP_WEIGHTS: Artifact = art("train/top_weights.tsv", "train");
pub const ALERTS: Artifact = art("alerts/alerts.tsv", "alerts");
pub const ALERT_REPORT: Artifact = art("alerts/report.txt", "alerts");

pub fn features(split: Split) -> Artifact {
    match split {
        Split::Train => art("featurize/train.tsv", "featurize"),
        Split::Dev => art("featurize/dev.tsv", "featurize"),
        Split::Test => art("featurize/test.tsv", "featurize"),
    }
}

pub fn metrics(split: Split) -> Artifact {
    match split {
        Split::Train => art("evaluate/metrics_train.txt", "evaluate"),
        Split::Dev => art("evaluate/metrics_dev.txt", "evaluate"),
        Split::Test => art("evaluate/metrics_test.txt", "evaluate"),
    }
}

pub fn roc(split: Split) -> Artifact {
    match split {
        Split::Train => art("evaluate/roc_train.tsv", "evaluate"),
        Split::Dev => art("evaluate/roc_dev.tsv", "evaluate"),
        Split::Test => art("evaluate/roc_test.tsv", "evaluate"),
    }
}

pub fn scores(split: Split) -> Artifact {
    match split {
        Split::Train => art("evaluate/scores_train.tsv", "evaluate"),
        Split::Dev => art("evaluate/scores_dev.tsv", "evaluate"),
        Split::Test => art("evaluate/scores_test.tsv", "evaluate"),
    }
}

pub const MANIFEST_DIR: &str = "manifests";
pub const LOG_DIR: &str = "logs";

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// The `config=` value from the leading `#` lines of a text artifact.
pub fn header_digest(path: &Path) -> anyhow::Result<Option<String>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix('#') else { break };
        if let Some(d) = rest.trim().strip_prefix("config=") {
            return Ok(Some(d.to_string()));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub stage: String,
    pub config_digest: String,
    pub seed: u64,
    /// Input name → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

/// Tracks one stage's reads and writes and emits its manifest.
pub struct StageRun<'a> {
    root: &'a Path,
    digest: &'a str,
    manifest: Manifest,
}

impl<'a> StageRun<'a> {
    pub fn new(root: &'a Path, stage: &str, digest: &'a str, seed: u64) -> Self {
        Self {
            root,
            digest,
            manifest: Manifest {
                stage: stage.to_string(),
                config_digest: digest.to_string(),
                seed,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
        }
    }

    pub fn path(&self, a: Artifact) -> PathBuf {
        self.root.join(a.rel)
    }

    /// Standard header lines for artifacts of this run.
    pub fn header(&self) -> Vec<(&'static str, String)> {
        vec![("config", self.digest.to_string()), ("seed", self.manifest.seed.to_string())]
    }

    /// Records an external input file under `name`.
    pub fn input_file(&mut self, name: &str, path: &Path) -> anyhow::Result<()> {
        let d = sha256_file(path)?;
        self.manifest.inputs.insert(name.to_string(), d);
        Ok(())
    }

    /// Checks that an upstream artifact exists and was produced under the
    /// current config, records it, and returns its path.
    pub fn require(&mut self, a: Artifact) -> anyhow::Result<PathBuf> {
        let path = self.path(a);
        if !path.exists() {
            bail!(
                "missing {} (expected at {}); run `ddi {}` first, it produces this file",
                a.rel,
                path.display(),
                a.stage
            );
        }
        match header_digest(&path)? {
            Some(d) if d == self.digest => {}
            Some(d) => bail!(
                "{} was produced under config digest {} but the current config digest is {}; \
                 rerun `ddi {}` (or `ddi all`) with the current config",
                a.rel,
                short(&d),
                short(self.digest),
                a.stage
            ),
            None => bail!("{} carries no config digest; rerun `ddi {}`", a.rel, a.stage),
        }
        self.manifest.inputs.insert(a.rel.to_string(), sha256_file(&path)?);
        Ok(path)
    }

    /// Writes an artifact through `f` and records its digest.
    pub fn write<F>(&mut self, a: Artifact, f: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.path(a);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        {
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w).with_context(|| format!("writing {}", path.display()))?;
            w.flush()?;
        }
        self.manifest.outputs.insert(a.rel.to_string(), sha256_file(&path)?);
        Ok(())
    }

    /// Writes the manifest; returns it.
    pub fn finish(self) -> anyhow::Result<Manifest> {
        let dir = self.root.join(MANIFEST_DIR);
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{}.json", self.manifest.stage));
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.manifest)
    }
}

fn short(d: &str) -> &str {
    &d[..d.len().min(12)]
}

/// Appends `stage<TAB>millis` to the timing log, kept apart from the
/// manifests so that reruns leave every artifact byte-identical.
pub fn log_timing(root: &Path, stage: &str, millis: u128) -> anyhow::Result<()> {
    let dir = root.join(LOG_DIR);
    fs::create_dir_all(&dir)?;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join("timings.tsv"))?;
    writeln!(f, "{stage}\t{millis}")?;
    Ok(())
}

/// SHA-256 of every file under `root` except the log directory, keyed by
/// relative path with `/` separators.
pub fn digest_tree(root: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> anyhow::Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let rel = path.strip_prefix(root)?;
            if rel == Path::new(LOG_DIR) {
                continue;
            }
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.insert(key, sha256_file(&path)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}
