//! The pipeline configuration file (TOML) and its validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ddi_core::corpus::{DrugId, SourceFormat};
use ddi_core::features::TfWeighting;
use ddi_core::learn::{LossKind, TrainConfig};
use ddi_core::mar_alerts::WindowConfig;
use ddi_core::splitting::SplitRatios;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub alerts: AlertSection,
}

/// Input files and the output directory. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// A file, or a directory whose `*.xml` / `*.txt` / `*.tsv` files are read
    /// in name order.
    pub corpus: PathBuf,
    pub lexicon: PathBuf,
    pub catalog: PathBuf,
    pub embeddings: Option<PathBuf>,
    /// Defaults to the bundled English list.
    pub stopwords: Option<PathBuf>,
    pub mar: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub format: SourceFormat,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            format: SourceFormat::LineDelimited,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// train, dev, test
    pub ratios: [f64; 3],
}

impl Default for SplitSection {
    fn default() -> Self {
        let r = SplitRatios::default();
        Self {
            ratios: [r.train, r.dev, r.test],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Counts,
    Embeddings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub kind: FeatureKind,
    /// Vocabulary size for count features; absent keeps every word.
    pub top_k: Option<usize>,
    /// Defaults to false for counts and true for embeddings.
    pub exclude_stopwords: Option<bool>,
    pub tf_weighting: TfWeighting,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            kind: FeatureKind::Counts,
            top_k: None,
            exclude_stopwords: None,
            tf_weighting: TfWeighting::Raw,
        }
    }
}

impl FeatureSection {
    pub fn excludes_stopwords(&self) -> bool {
        self.exclude_stopwords
            .unwrap_or(self.kind == FeatureKind::Embeddings)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub loss: LossKind,
    /// Used when cross-validation is off (always, for hinge loss).
    pub l1_lambda: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub standardize: bool,
    /// Balance the training classes before fitting.
    pub undersample: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            loss: t.loss,
            l1_lambda: t.l1_lambda,
            max_iters: t.max_iters,
            tolerance: t.tolerance,
            standardize: t.standardize,
            undersample: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    /// Applies to logistic loss only.
    pub enabled: bool,
    pub k: usize,
    /// Explicit penalties; otherwise `grid_size` values from λ_max down to
    /// λ_max·`min_ratio`.
    pub grid: Option<Vec<f64>>,
    pub grid_size: usize,
    pub min_ratio: f64,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            enabled: true,
            k: 5,
            grid: None,
            grid_size: 20,
            min_ratio: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Scores at or above this are predicted positive.
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertSection {
    pub window_hours: f64,
    pub per_drug: BTreeMap<String, f64>,
}

impl Default for AlertSection {
    fn default() -> Self {
        Self {
            window_hours: 24.0,
            per_drug: BTreeMap::new(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> anyhow::Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text)?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, base).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.output {
            cfg.paths.output = out.clone();
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        join(&mut paths.corpus);
        join(&mut paths.lexicon);
        join(&mut paths.catalog);
        join(&mut paths.output);
        for p in [&mut paths.embeddings, &mut paths.stopwords, &mut paths.mar].into_iter().flatten() {
            join(p);
        }
    }

    /// Every problem found, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let [train, dev, test] = self.split.ratios;
        if let Err(e) = SplitRatios::new(train, dev, test) {
            v.push(format!("split.ratios: {e}"));
        }
        if let Err(e) = self.train_config(0.0).validate() {
            v.push(format!("model: {e}"));
        }
        if !(self.model.l1_lambda >= 0.0 && self.model.l1_lambda.is_finite()) {
            v.push("model.l1_lambda must be a finite value >= 0".into());
        }
        if self.cv.k < 2 {
            v.push("cv.k must be at least 2".into());
        }
        if self.cv.grid_size == 0 {
            v.push("cv.grid_size must be positive".into());
        }
        if !(self.cv.min_ratio > 0.0 && self.cv.min_ratio < 1.0) {
            v.push("cv.min_ratio must lie strictly between 0 and 1".into());
        }
        if let Some(grid) = &self.cv.grid {
            if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                v.push("cv.grid must be a non-empty list of finite values >= 0".into());
            }
        }
        if !self.evaluate.threshold.is_finite() {
            v.push("evaluate.threshold must be finite".into());
        }
        if !(self.alerts.window_hours > 0.0 && self.alerts.window_hours.is_finite()) {
            v.push("alerts.window_hours must be positive".into());
        }
        for (drug, h) in &self.alerts.per_drug {
            if DrugId::new(drug.as_str()).is_err() {
                v.push(format!("alerts.per_drug: invalid drug id {drug:?}"));
            }
            if !(*h > 0.0 && h.is_finite()) {
                v.push(format!("alerts.per_drug.{drug} must be positive"));
            }
        }
        let p = &self.paths;
        for (name, path) in [("paths.corpus", &p.corpus), ("paths.lexicon", &p.lexicon), ("paths.catalog", &p.catalog)] {
            if !path.exists() {
                v.push(format!("{name}: {} does not exist", path.display()));
            }
        }
        for (name, path) in [("paths.embeddings", &p.embeddings), ("paths.stopwords", &p.stopwords), ("paths.mar", &p.mar)] {
            if let Some(path) = path {
                if !path.exists() {
                    v.push(format!("{name}: {} does not exist", path.display()));
                }
            }
        }
        if self.features.kind == FeatureKind::Embeddings && p.embeddings.is_none() {
            v.push("features.kind = \"embeddings\" needs paths.embeddings".into());
        }
        v
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let v = self.violations();
        if v.is_empty() {
            return Ok(());
        }
        bail!(
            "invalid configuration ({} problem{}):\n  - {}",
            v.len(),
            if v.len() == 1 { "" } else { "s" },
            v.join("\n  - ")
        )
    }

    pub fn ratios(&self) -> SplitRatios {
        let [t, d, s] = self.split.ratios;
        SplitRatios { train: t, dev: d, test: s }
    }

    pub fn train_config(&self, lambda: f64) -> TrainConfig {
        TrainConfig {
            loss: self.model.loss,
            l1_lambda: lambda,
            max_iters: self.model.max_iters,
            tolerance: self.model.tolerance,
            seed: self.seed,
            standardize: self.model.standardize,
        }
    }

    pub fn window_config(&self) -> anyhow::Result<WindowConfig> {
        let mut w = WindowConfig::hours(self.alerts.window_hours)?;
        for (drug, h) in &self.alerts.per_drug {
            w = w.with_drug(DrugId::new(drug.as_str())?, *h)?;
        }
        Ok(w)
    }

    /// SHA-256 over every setting except paths, so moving the data or the
    /// output directory does not change it.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            seed: u64,
            corpus: &'a CorpusSection,
            split: &'a SplitSection,
            features: &'a FeatureSection,
            model: &'a ModelSection,
            cv: &'a CvSection,
            evaluate: &'a EvaluateSection,
            alerts: &'a AlertSection,
        }
        let view = View {
            seed: self.seed,
            corpus: &self.corpus,
            split: &self.split,
            features: &self.features,
            model: &self.model,
            cv: &self.cv,
            evaluate: &self.evaluate,
            alerts: &self.alerts,
        };
        let json = serde_json::to_vec(&view).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
