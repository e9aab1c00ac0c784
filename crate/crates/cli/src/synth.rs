//! Writes the bundled synthetic corpus and a config that runs it.

use std::fs;
use std::path::Path;

use anyhow::Context;
use ddi_core::synthetic::{mini_corpus, MiniConfig};

pub const MINI_CONFIG: &str = r#"seed = 0

[paths]
corpus = "abstracts.tsv"
lexicon = "lexicon.tsv"
catalog = "catalog.tsv"
embeddings = "embeddings.txt"
mar = "mar.csv"
output = "out"

[corpus]
format = "line-delimited"

[split]
ratios = [0.64, 0.16, 0.2]

[features]
kind = "counts"

[model]
loss = "logistic"
undersample = true

[cv]
enabled = true
k = 5
grid_size = 10

[alerts]
window_hours = 24
"#;

/// Writes `abstracts.tsv`, `lexicon.tsv`, `catalog.tsv`, `embeddings.txt`,
/// `mar.csv` and `config.toml` into `dir`.
pub fn write_mini(dir: &Path, seed: u64) -> anyhow::Result<()> {
    let cfg = MiniConfig {
        seed,
        ..MiniConfig::default()
    };
    let mini = mini_corpus(&cfg);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files = [
        ("abstracts.tsv", mini.abstracts.as_str()),
        ("lexicon.tsv", mini.lexicon.as_str()),
        ("catalog.tsv", mini.catalog.as_str()),
        ("embeddings.txt", mini.embeddings.as_str()),
        ("mar.csv", mini.mar.as_str()),
        ("config.toml", MINI_CONFIG),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
