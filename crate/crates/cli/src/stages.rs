//! Pipeline stages. Each reads its prerequisites from the output directory,
//! writes its artifacts with the config digest in their headers, and leaves
//! a manifest.

use std::collections::{BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context as _};
use ddi_core::corpus::{
    cardiac_drugs_mentioned, corpus_stats, filter_cardiac, parse_abstracts, read_tokenized, tokenize_all,
    write_tokenized, CorpusStats, DrugId, DrugLexicon, ParsedAbstracts, SourceFormat, TokenizedAbstract,
};
use ddi_core::eval::{metrics_report, roc_auc};
use ddi_core::features::{
    build_vocab, count_matrix, embedding_matrix, index_abstracts, undersample, EmbeddingCoverage, EmbeddingTable,
    FeatureMatrix, Stopwords, Vocabulary,
};
use ddi_core::labeling::{
    build_universe, enumerate_samples, read_samples, write_samples, InteractionCatalog, InteractionSample, TemplateTable,
};
use ddi_core::learn::{cross_validate, lambda_grid, predict_scores, train, CvResult, LinearModel, LossKind};
use ddi_core::mar_alerts::{alert_report, build_exposures, detect_overlaps, read_events};
use ddi_core::splitting::{
    assign_abstracts, assign_abstracts_naive, leakage_report, split_corpus, LeakageReport, Split, SplitAssignment,
};
use tracing::{info, warn};

use crate::artifacts::{self as art, log_timing, StageRun};
use crate::config::{FeatureKind, PipelineConfig};

pub const STAGES: [&str; 8] = ["ingest", "filter", "label", "split", "featurize", "train", "evaluate", "alerts"];

/// Figures from the full-scale literature corpus this pipeline was designed
/// for. Printed for comparison only.
const REFERENCE_CORPUS: [(&str, &str); 11] = [
    ("input_abstracts", "663597"),
    ("cardiac_abstracts", "69713"),
    ("avg_drugs_per_abstract", "1.3"),
    ("max_drugs_per_abstract", "80"),
    ("avg_words_per_abstract", "149.5"),
    ("avg_count_per_word", "1.9"),
    ("n_distinct_words", "53338"),
    ("embedding_tokens_covered", "31774"),
    ("embedding_tokens_missing", "21560"),
    ("cardiac_drugs", "44"),
    ("cardiac_drugs_in_abstracts", "36"),
];

const REFERENCE_LABELS: [(&str, &str); 4] = [
    ("related_drugs", "1781"),
    ("positive_interactions", "63450"),
    ("cardiac_cardiac_positives", "218"),
    ("interaction_types", "53"),
];

pub struct Context<'a> {
    pub cfg: &'a PipelineConfig,
    pub digest: String,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        Self {
            cfg,
            digest: cfg.digest(),
        }
    }

    fn root(&self) -> &Path {
        &self.cfg.paths.output
    }

    fn run(&self, stage: &str) -> StageRun<'_> {
        StageRun::new(self.root(), stage, &self.digest, self.cfg.seed)
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

fn write_header(w: &mut dyn Write, header: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

fn load_lexicon(run: &mut StageRun<'_>, cfg: &PipelineConfig) -> anyhow::Result<DrugLexicon> {
    let path = &cfg.paths.lexicon;
    run.input_file("lexicon", path)?;
    Ok(DrugLexicon::read(open(path)?, &source_name(path))?)
}

fn load_catalog(run: &mut StageRun<'_>, cfg: &PipelineConfig) -> anyhow::Result<InteractionCatalog> {
    let path = &cfg.paths.catalog;
    run.input_file("catalog", path)?;
    Ok(InteractionCatalog::read(open(path)?, &source_name(path))?)
}

fn load_stopwords(run: &mut StageRun<'_>, cfg: &PipelineConfig) -> anyhow::Result<Stopwords> {
    match &cfg.paths.stopwords {
        Some(path) => {
            run.input_file("stopwords", path)?;
            Ok(Stopwords::read(open(path)?)?)
        }
        None => Ok(Stopwords::english()),
    }
}

fn read_abstracts(run: &mut StageRun<'_>, a: art::Artifact) -> anyhow::Result<Vec<TokenizedAbstract>> {
    let path = run.require(a)?;
    Ok(read_tokenized(open(&path)?, a.rel)?)
}

fn read_sample_file(run: &mut StageRun<'_>, a: art::Artifact) -> anyhow::Result<Vec<InteractionSample>> {
    let path = run.require(a)?;
    Ok(read_samples(open(&path)?, a.rel)?)
}

fn read_assignment(run: &mut StageRun<'_>) -> anyhow::Result<SplitAssignment> {
    let path = run.require(art::SPLIT_ASSIGNMENT)?;
    Ok(SplitAssignment::read_tsv(open(&path)?, art::SPLIT_ASSIGNMENT.rel)?)
}

fn read_matrix(run: &mut StageRun<'_>, split: Split) -> anyhow::Result<FeatureMatrix> {
    let a = art::features(split);
    let path = run.require(a)?;
    Ok(FeatureMatrix::read(open(&path)?, a.rel)?)
}

/// The corpus path itself, or the matching files of a directory in name order.
fn corpus_files(path: &Path, format: SourceFormat) -> anyhow::Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let exts: &[&str] = match format {
        SourceFormat::PubmedXml => &["xml"],
        SourceFormat::LineDelimited => &["txt", "tsv"],
    };
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.is_file() && p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.contains(&e)));
    files.sort();
    if files.is_empty() {
        bail!("corpus directory {} holds no {} files", path.display(), exts.join("/"));
    }
    Ok(files)
}

fn write_stats(w: &mut dyn Write, s: &CorpusStats) -> std::io::Result<()> {
    writeln!(w, "n_abstracts={}", s.n_abstracts)?;
    writeln!(w, "avg_drugs_per_abstract={}", s.avg_drugs_per_abstract)?;
    writeln!(w, "max_drugs_per_abstract={}", s.max_drugs_per_abstract)?;
    writeln!(w, "avg_words_per_abstract={}", s.avg_words_per_abstract)?;
    writeln!(w, "avg_count_per_word={}", s.avg_count_per_word)?;
    writeln!(w, "n_distinct_words={}", s.n_distinct_words)
}

fn write_reference(w: &mut dyn Write, rows: &[(&str, &str)]) -> std::io::Result<()> {
    writeln!(w, "# full-scale reference figures, for comparison only")?;
    for (k, v) in rows {
        writeln!(w, "reference.{k}={v}")?;
    }
    Ok(())
}

pub fn ingest(ctx: &Context<'_>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("ingest");
    let format = cfg.corpus.format;
    let files = corpus_files(&cfg.paths.corpus, format)?;
    let mut parsed = ParsedAbstracts::default();
    for f in &files {
        let name = if files.len() == 1 {
            "corpus".to_string()
        } else {
            format!("corpus/{}", f.file_name().unwrap_or_default().to_string_lossy())
        };
        run.input_file(&name, f)?;
        let p = parse_abstracts(open(f)?, format).with_context(|| format!("parsing {}", f.display()))?;
        parsed.extend(p).with_context(|| format!("merging {}", f.display()))?;
    }
    let lexicon = load_lexicon(&mut run, cfg)?;
    let tokenized = tokenize_all(&parsed.abstracts, &lexicon);
    let stats = corpus_stats(&tokenized);
    info!(abstracts = tokenized.len(), skipped = parsed.skipped, "ingested corpus");
    let header = run.header();
    run.write(art::INGEST_ABSTRACTS, |w| write_tokenized(w, &tokenized, &header))?;
    run.write(art::INGEST_STATS, |w| {
        write_header(w, &header)?;
        writeln!(w, "records_without_abstract={}", parsed.skipped)?;
        write_stats(w, &stats)
    })?;
    run.finish()?;
    Ok(())
}

pub fn filter(ctx: &Context<'_>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("filter");
    let abstracts = read_abstracts(&mut run, art::INGEST_ABSTRACTS)?;
    let lexicon = load_lexicon(&mut run, cfg)?;
    let (kept, report) = filter_cardiac(abstracts, &lexicon);
    let stats = corpus_stats(&kept);
    let cardiac_total = lexicon.cardiac().count();
    let cardiac_seen = cardiac_drugs_mentioned(&kept, &lexicon);
    info!(input = report.input, retained = report.retained, "filtered cardiac abstracts");
    let header = run.header();
    run.write(art::FILTER_ABSTRACTS, |w| write_tokenized(w, &kept, &header))?;
    run.write(art::FILTER_STATS, |w| {
        write_header(w, &header)?;
        writeln!(w, "input_abstracts={}", report.input)?;
        writeln!(w, "retained_abstracts={}", report.retained)?;
        writeln!(w, "retention_ratio={}", report.retention_ratio)?;
        writeln!(w, "cardiac_drugs={cardiac_total}")?;
        writeln!(w, "cardiac_drugs_in_abstracts={cardiac_seen}")?;
        write_stats(w, &stats)?;
        write_reference(w, &REFERENCE_CORPUS)
    })?;
    run.finish()?;
    Ok(())
}

pub fn label(ctx: &Context<'_>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("label");
    let abstracts = read_abstracts(&mut run, art::FILTER_ABSTRACTS)?;
    let lexicon = load_lexicon(&mut run, cfg)?;
    let catalog = load_catalog(&mut run, cfg)?;
    let cardiac: BTreeSet<DrugId> = lexicon.cardiac().cloned().collect();
    if cardiac.is_empty() {
        bail!("the lexicon flags no cardiac drugs");
    }
    let universe = build_universe(&cardiac, &catalog);
    let mut samples = enumerate_samples(&cardiac, &universe, &catalog);
    let templates = TemplateTable::build(&catalog, &lexicon);
    templates.annotate(&mut samples);
    let positives = samples.iter().filter(|s| s.label == 1).count();
    let cardiac_pairs = samples
        .iter()
        .filter(|s| s.label == 1 && cardiac.contains(&s.other_drug))
        .count();
    info!(samples = samples.len(), positives, templates = templates.len(), "labeled pairs");
    let header = run.header();
    run.write(art::LABEL_SAMPLES, |w| write_samples(w, &samples, &header))?;
    run.write(art::LABEL_TEMPLATES, |w| {
        write_header(w, &header)?;
        templates.write_tsv(w)
    })?;
    run.write(art::LABEL_REPORT, |w| {
        write_header(w, &header)?;
        writeln!(w, "cardiac_drugs={}", cardiac.len())?;
        writeln!(w, "cardiac_drugs_in_abstracts={}", cardiac_drugs_mentioned(&abstracts, &lexicon))?;
        writeln!(w, "related_drugs={}", universe.len())?;
        writeln!(w, "samples={}", samples.len())?;
        writeln!(w, "positive_samples={positives}")?;
        writeln!(w, "negative_samples={}", samples.len() - positives)?;
        writeln!(w, "cardiac_cardiac_positives={cardiac_pairs}")?;
        writeln!(w, "catalog_pairs_unordered={}", catalog.len())?;
        writeln!(w, "catalog_rows_ordered={}", catalog.ordered_len())?;
        writeln!(w, "interaction_types={}", templates.len())?;
        writeln!(w, "descriptions_without_drug_names={}", templates.unmatched)?;
        write_reference(w, &REFERENCE_LABELS)
    })?;
    run.finish()?;
    Ok(())
}

fn write_leakage(w: &mut dyn Write, report: &LeakageReport) -> std::io::Result<()> {
    writeln!(w, "split\tsamples\tpositives\tsamples_without_abstracts\tabstracts_used")?;
    for c in &report.per_split {
        writeln!(w, "{}\t{}\t{}\t{}\t{}", c.split, c.samples, c.positives, c.empty_samples, c.abstracts_used)?;
    }
    for (a, b, n) in &report.shared {
        writeln!(w, "shared_abstracts.{a}.{b}={n}")?;
    }
    writeln!(w, "cross_split_shared_abstracts={}", report.cross_split_total())
}

pub fn split(ctx: &Context<'_>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("split");
    let abstracts = read_abstracts(&mut run, art::FILTER_ABSTRACTS)?;
    let mut samples = read_sample_file(&mut run, art::LABEL_SAMPLES)?;
    let assignment = split_corpus(&abstracts, &samples, cfg.ratios(), cfg.seed)?;
    assign_abstracts(&assignment, &abstracts, &mut samples)?;
    let report = leakage_report(&assignment, &samples)?;
    if report.cross_split_total() != 0 {
        bail!("internal error: split assignment leaks abstracts across splits");
    }
    let header = run.header();
    let digest_only = [("config", ctx.digest.clone())];
    run.write(art::SPLIT_ASSIGNMENT, |w| assignment.write_tsv(w, &digest_only))?;
    run.write(art::SPLIT_SAMPLES, |w| write_samples(w, &samples, &header))?;
    run.write(art::SPLIT_LEAKAGE, |w| {
        write_header(w, &header)?;
        write_leakage(w, &report)
    })?;
    run.finish()?;
    Ok(())
}

/// Shared-abstract counts of the leakage-free assignment next to the naive
/// baseline in which every sample sees every abstract mentioning its drugs.
pub fn diagnose_split(ctx: &Context<'_>) -> anyhow::Result<String> {
    let mut run = ctx.run("diagnose-split");
    let assignment = read_assignment(&mut run)?;
    let abstracts = read_abstracts(&mut run, art::FILTER_ABSTRACTS)?;
    let samples = read_sample_file(&mut run, art::SPLIT_SAMPLES)?;
    let ours = leakage_report(&assignment, &samples)?;
    let mut naive_samples = samples.clone();
    assign_abstracts_naive(&abstracts, &mut naive_samples);
    let naive = leakage_report(&assignment, &naive_samples)?;

    let mut text = String::new();
    use std::fmt::Write as _;
    writeln!(text, "split_pair\tsplit_aware\tnaive").unwrap();
    for ((a, b, n), (_, _, m)) in ours.shared.iter().zip(&naive.shared) {
        writeln!(text, "{a}-{b}\t{n}\t{m}").unwrap();
    }
    writeln!(text, "total\t{}\t{}", ours.cross_split_total(), naive.cross_split_total()).unwrap();
    if naive.cross_split_total() == 0 && abstracts.iter().all(|a| a.drug_mentions.len() < 2) {
        writeln!(
            text,
            "# no abstract mentions two drugs, so no abstract can serve two samples; both columns are 0"
        )
        .unwrap();
    }
    let header = run.header();
    run.write(art::SPLIT_DIAGNOSIS, |w| {
        write_header(w, &header)?;
        w.write_all(text.as_bytes())
    })?;
    run.finish()?;
    Ok(text)
}

pub fn featurize(ctx: &Context<'_>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("featurize");
    let abstracts = read_abstracts(&mut run, art::FILTER_ABSTRACTS)?;
    let samples = read_sample_file(&mut run, art::SPLIT_SAMPLES)?;
    let assignment = read_assignment(&mut run)?;
    let stopwords = load_stopwords(&mut run, cfg)?;
    let excluded = if cfg.features.excludes_stopwords() {
        stopwords
    } else {
        Stopwords::none()
    };
    let index = index_abstracts(&abstracts);
    let by_split = |split: Split| -> Vec<InteractionSample> {
        samples
            .iter()
            .filter(|s| assignment.split_of_sample(&s.key()) == Some(split))
            .cloned()
            .collect()
    };
    let header = run.header();
    let mut report = String::new();
    use std::fmt::Write as _;
    writeln!(report, "kind={}", match cfg.features.kind {
        FeatureKind::Counts => "counts",
        FeatureKind::Embeddings => "embeddings",
    })
    .unwrap();

    match cfg.features.kind {
        FeatureKind::Counts => {
            let train_abstracts: Vec<&TokenizedAbstract> = abstracts
                .iter()
                .filter(|a| assignment.abstract_split.get(&a.id) == Some(&Split::Train))
                .collect();
            let vocab = build_vocab(&train_abstracts, cfg.features.top_k, &excluded);
            writeln!(report, "vocabulary_size={}", vocab.len()).unwrap();
            run.write(art::FEATURE_VOCAB, |w| {
                write_header(w, &header)?;
                vocab.write_tsv(w)
            })?;
            for split in Split::ALL {
                let m = count_matrix(&by_split(split), &index, &vocab)?;
                describe_matrix(&mut report, split, &m);
                run.write(art::features(split), |w| m.write(w, &header))?;
            }
        }
        FeatureKind::Embeddings => {
            let path = cfg.paths.embeddings.as_ref().expect("validated");
            run.input_file("embeddings", path)?;
            let table = EmbeddingTable::read(open(path)?, &source_name(path))?;
            let (covered, missing) = distinct_coverage(&abstracts, &table, &excluded);
            writeln!(report, "embedding_dim={}", table.dim()).unwrap();
            writeln!(report, "distinct_tokens_covered={covered}").unwrap();
            writeln!(report, "distinct_tokens_missing={missing}").unwrap();
            for split in Split::ALL {
                let (m, cov) = embedding_matrix(&by_split(split), &index, &table, &excluded, cfg.features.tf_weighting)?;
                describe_matrix(&mut report, split, &m);
                let EmbeddingCoverage { hits, misses } = cov;
                writeln!(report, "{split}.token_hits={hits}\n{split}.token_misses={misses}").unwrap();
                run.write(art::features(split), |w| m.write(w, &header))?;
            }
        }
    }
    run.write(art::FEATURE_REPORT, |w| {
        write_header(w, &header)?;
        w.write_all(report.as_bytes())
    })?;
    run.finish()?;
    Ok(())
}

fn describe_matrix(report: &mut String, split: Split, m: &FeatureMatrix) {
    use std::fmt::Write as _;
    let (neg, pos) = m.class_counts();
    writeln!(report, "{split}.rows={}\n{split}.positives={pos}\n{split}.negatives={neg}", m.n_rows()).unwrap();
}

/// Distinct non-stopword tokens of the corpus with and without a vector.
fn distinct_coverage(abstracts: &[TokenizedAbstract], table: &EmbeddingTable, stopwords: &Stopwords) -> (usize, usize) {
    let distinct: HashSet<&str> = abstracts
        .iter()
        .flat_map(|a| a.tokens.iter().map(String::as_str))
        .filter(|t| !stopwords.contains(t))
        .collect();
    let covered = distinct.iter().filter(|t| table.get(t).is_some()).count();
    (covered, distinct.len() - covered)
}

pub fn train_stage(ctx: &Context<'_>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("train");
    let full = read_matrix(&mut run, Split::Train)?;
    let vocab = match cfg.features.kind {
        FeatureKind::Counts => {
            let path = run.require(art::FEATURE_VOCAB)?;
            Some(Vocabulary::read_tsv(open(&path)?, art::FEATURE_VOCAB.rel)?)
        }
        FeatureKind::Embeddings => None,
    };
    let (neg, pos) = full.class_counts();
    let matrix = if cfg.model.undersample {
        undersample(&full, cfg.seed).context("undersampling the training split")?
    } else {
        full
    };
    let use_cv = cfg.cv.enabled && cfg.model.loss == LossKind::Logistic;
    let cv: Option<CvResult> = if use_cv {
        let grid = match &cfg.cv.grid {
            Some(g) => g.clone(),
            None => lambda_grid(&matrix, cfg.cv.grid_size, cfg.cv.min_ratio, cfg.model.standardize)?,
        };
        let k = cfg.cv.k;
        Some(cross_validate(&matrix, &grid, k, &cfg.train_config(0.0), cfg.seed)?)
    } else {
        if cfg.cv.enabled {
            info!("cross-validation applies to logistic loss only; using model.l1_lambda");
        }
        None
    };
    let lambda = cv.as_ref().map_or(cfg.model.l1_lambda, |c| c.best_lambda);
    let model = train(&matrix, &cfg.train_config(lambda))?;
    if !model.meta.converged {
        warn!(iterations = model.meta.iterations, "solver stopped at max_iters before converging");
    }
    info!(lambda, nonzero = model.nonzero(), "trained model");

    let header = run.header();
    run.write(art::MODEL, |w| model.write(w, &header))?;
    run.write(art::MODEL_CV, |w| {
        write_header(w, &header)?;
        match &cv {
            Some(cv) => write_cv(w, cv),
            None => writeln!(w, "# cross-validation not run"),
        }
    })?;
    run.write(art::MODEL_REPORT, |w| {
        write_header(w, &header)?;
        let (uneg, upos) = matrix.class_counts();
        writeln!(w, "train_rows={}\ntrain_positives={pos}\ntrain_negatives={neg}", pos + neg)?;
        writeln!(w, "fit_rows={}\nfit_positives={upos}\nfit_negatives={uneg}", upos + uneg)?;
        writeln!(w, "loss={}\nl1_lambda={lambda}", model.loss)?;
        if let Some(cv) = &cv {
            writeln!(w, "cv_folds={}\ncv_undefined_folds={}", cfg.cv.k, cv.undefined_folds)?;
        }
        writeln!(w, "nonzero_weights={}\nl1_norm={}", model.nonzero(), model.l1_norm())?;
        writeln!(
            w,
            "iterations={}\nobjective={}\nconverged={}",
            model.meta.iterations, model.meta.objective, model.meta.converged
        )
    })?;
    run.write(art::MODEL_TOP_WEIGHTS, |w| {
        write_header(w, &header)?;
        write_top_weights(w, &model, vocab.as_ref(), 50)
    })?;
    run.finish()?;
    Ok(())
}

fn write_cv(w: &mut dyn Write, cv: &CvResult) -> std::io::Result<()> {
    let k = cv.fold_auc.first().map_or(0, Vec::len);
    let folds: Vec<String> = (1..=k).map(|f| format!("fold_{f}")).collect();
    writeln!(w, "# best_lambda={}", cv.best_lambda)?;
    writeln!(w, "lambda\tmean_auc\t{}", folds.join("\t"))?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for (l, lambda) in cv.lambda_grid.iter().enumerate() {
        let row: Vec<String> = cv.fold_auc[l].iter().map(|v| fmt(*v)).collect();
        writeln!(w, "{lambda}\t{}\t{}", fmt(cv.mean_auc[l]), row.join("\t"))?;
    }
    Ok(())
}

fn write_top_weights(w: &mut dyn Write, model: &LinearModel, vocab: Option<&Vocabulary>, n: usize) -> std::io::Result<()> {
    let mut cols: Vec<usize> = (0..model.dims()).filter(|&j| model.weights[j] != 0.0).collect();
    cols.sort_by(|&a, &b| model.weights[b].abs().total_cmp(&model.weights[a].abs()).then(a.cmp(&b)));
    writeln!(w, "rank\tcolumn\tword\tweight")?;
    for (r, &j) in cols.iter().take(n).enumerate() {
        let word = vocab.and_then(|v| v.word(j)).unwrap_or("-");
        writeln!(w, "{}\t{j}\t{word}\t{}", r + 1, model.weights[j])?;
    }
    Ok(())
}

pub fn evaluate(ctx: &Context<'_>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("evaluate");
    let model_path = run.require(art::MODEL)?;
    let model = LinearModel::read(open(&model_path)?, art::MODEL.rel)?;
    let header = run.header();
    let threshold = cfg.evaluate.threshold;
    for split in Split::ALL {
        let m = read_matrix(&mut run, split)?;
        let scores = predict_scores(&model, &m)?;
        let labels = m.labels();
        run.write(art::scores(split), |w| {
            write_header(w, &header)?;
            writeln!(w, "key\tlabel\tscore")?;
            for ((k, y), s) in m.row_keys().iter().zip(labels).zip(&scores) {
                writeln!(w, "{k}\t{y}\t{s}")?;
            }
            Ok(())
        })?;
        let (neg, pos) = m.class_counts();
        run.write(art::metrics(split), |w| {
            write_header(w, &header)?;
            writeln!(w, "split={split}\nrows={}\npositives={pos}\nnegatives={neg}", m.n_rows())?;
            if m.n_rows() == 0 {
                return writeln!(w, "# no rows; metrics undefined");
            }
            let report = metrics_report(&scores, labels, threshold).map_err(std::io::Error::other)?;
            write!(w, "{report}")?;
            let baseline = metrics_report(&vec![1.0; scores.len()], labels, 0.0)
                .map_err(std::io::Error::other)?;
            let b = baseline.metrics;
            writeln!(
                w,
                "# all-positive baseline: sens = {}, spec = {}, ppv = {}, npv = {}",
                b.sensitivity, b.specificity, b.ppv, b.npv
            )
        })?;
        run.write(art::roc(split), |w| {
            if pos > 0 && neg > 0 {
                let curve = roc_auc(&scores, labels).map_err(std::io::Error::other)?;
                curve.write_tsv(w, &header)
            } else {
                write_header(w, &header)?;
                writeln!(w, "# auc=N/A (needs both classes)")?;
                writeln!(w, "threshold\tsensitivity\tspecificity\tfpr")
            }
        })?;
    }
    run.finish()?;
    Ok(())
}

pub fn alerts(ctx: &Context<'_>) -> anyhow::Result<String> {
    let cfg = ctx.cfg;
    let mut run = ctx.run("alerts");
    let Some(mar) = &cfg.paths.mar else {
        bail!("paths.mar is not set; the alerts stage needs a medication administration record file");
    };
    run.input_file("mar", mar)?;
    let events = read_events(open(mar)?, &source_name(mar))?;
    let catalog = load_catalog(&mut run, cfg)?;
    let windows = cfg.window_config()?;
    let exposures = build_exposures(&events, &windows);
    let report = alert_report(detect_overlaps(&exposures, &catalog));
    info!(events = events.len(), alerts = report.total, "scanned administration records");
    let header = run.header();
    run.write(art::ALERTS, |w| report.write_tsv(w, &header))?;
    let text = report.to_string();
    run.write(art::ALERT_REPORT, |w| {
        write_header(w, &header)?;
        w.write_all(text.as_bytes())
    })?;
    run.finish()?;
    Ok(text)
}

/// Runs one named stage and records its wall time in the log directory.
pub fn run_stage(ctx: &Context<'_>, stage: &str) -> anyhow::Result<()> {
    let start = Instant::now();
    match stage {
        "ingest" => ingest(ctx)?,
        "filter" => filter(ctx)?,
        "label" => label(ctx)?,
        "split" => split(ctx)?,
        "featurize" => featurize(ctx)?,
        "train" => train_stage(ctx)?,
        "evaluate" => evaluate(ctx)?,
        "alerts" => {
            alerts(ctx)?;
        }
        "diagnose-split" => {
            diagnose_split(ctx)?;
        }
        other => bail!("unknown stage {other:?}"),
    }
    log_timing(ctx.root(), stage, start.elapsed().as_millis())?;
    Ok(())
}

/// Every stage in order; `alerts` only when a MAR file is configured.
pub fn run_all(ctx: &Context<'_>) -> anyhow::Result<()> {
    for stage in STAGES {
        if stage == "alerts" && ctx.cfg.paths.mar.is_none() {
            warn!("paths.mar is not set; skipping alerts");
            continue;
        }
        info!(stage, "running");
        run_stage(ctx, stage).with_context(|| format!("stage {stage} failed"))?;
    }
    Ok(())
}
