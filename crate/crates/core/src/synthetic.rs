//! Seeded synthetic data: a planted-signal sample set for recovery
//! experiments, and a small end-to-end corpus (lexicon, catalog, abstracts,
//! embeddings, MAR) in the pipeline's input formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::corpus::{DrugId, TokenizedAbstract};
use crate::labeling::InteractionSample;
use crate::rng::XorShift64Star;

const PLANTED_STREAM: u64 = 10;
const MINI_STREAM: u64 = 11;

const SYLLABLES: [&str; 16] = [
    "ba", "ke", "di", "lo", "mu", "ra", "si", "to", "ne", "pu", "ga", "vi", "zo", "fe", "hu", "ja",
];

/// The `i`-th of `n` distinct pronounceable filler words. All words for a
/// given `n` have the same number of syllables (at least three) and never
/// contain an `x`.
pub fn filler_word(i: usize, n: usize) -> String {
    let mut width = 3;
    while 16usize.pow(width) < n {
        width += 1;
    }
    let mut digits = Vec::with_capacity(width as usize);
    let mut v = i;
    for _ in 0..width {
        digits.push(v % 16);
        v /= 16;
    }
    digits.iter().rev().map(|&d| SYLLABLES[d]).collect()
}

/// Draws ranks `0..n` with probability proportional to `1 / (rank + 1)^s`.
#[derive(Debug, Clone)]
pub struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    pub fn new(n: usize, s: f64) -> Self {
        let mut total = 0.0;
        let cumulative = (0..n)
            .map(|r| {
                total += 1.0 / ((r + 1) as f64).powf(s);
                total
            })
            .collect();
        Self { cumulative }
    }

    pub fn sample(&self, rng: &mut XorShift64Star) -> usize {
        let total = *self.cumulative.last().expect("non-empty support");
        let u = rng.unit_f64() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_samples: usize,
    pub vocab_size: usize,
    pub n_signal: usize,
    pub positive_rate: f64,
    pub abstracts_per_sample: (usize, usize),
    pub words_per_abstract: usize,
    /// Chance that each signal word is injected into a positive abstract.
    pub signal_prob: f64,
    /// Signal words are drawn from Zipf ranks at or above this.
    pub min_signal_rank: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            vocab_size: 5000,
            n_signal: 20,
            positive_rate: 0.3,
            abstracts_per_sample: (1, 3),
            words_per_abstract: 60,
            signal_prob: 0.15,
            min_signal_rank: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub abstracts: Vec<TokenizedAbstract>,
    /// Each sample owns its abstracts; `abstract_ids` is already filled.
    pub samples: Vec<InteractionSample>,
    pub signal_words: BTreeSet<String>,
}

/// Samples whose private abstracts are Zipf filler text; abstracts of
/// positive samples additionally carry signal words.
pub fn planted_corpus(cfg: &PlantedConfig) -> PlantedCorpus {
    let mut rng = XorShift64Star::stream(cfg.seed, PLANTED_STREAM);
    let words: Vec<String> = (0..cfg.vocab_size).map(|i| filler_word(i, cfg.vocab_size)).collect();
    let zipf = Zipf::new(cfg.vocab_size, 1.0);

    let mut ranks: Vec<usize> = (cfg.min_signal_rank..cfg.vocab_size).collect();
    rng.shuffle(&mut ranks);
    let signal: Vec<usize> = ranks[..cfg.n_signal].to_vec();

    let mut abstracts = Vec::new();
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let (lo, hi) = cfg.abstracts_per_sample;
    for i in 0..cfg.n_samples {
        let label = u8::from(rng.bernoulli(cfg.positive_rate));
        let cardiac = DrugId::from(format!("card{:02}", i % 50).as_str());
        let other = DrugId::from(format!("oth{i:05}").as_str());
        let k = lo + rng.index(hi - lo + 1);
        let mut ids = BTreeSet::new();
        for a in 0..k {
            let mut tokens: Vec<String> = (0..cfg.words_per_abstract)
                .map(|_| words[zipf.sample(&mut rng)].clone())
                .collect();
            if label == 1 {
                for &r in &signal {
                    if rng.bernoulli(cfg.signal_prob) {
                        let at = rng.index(tokens.len() + 1);
                        tokens.insert(at, words[r].clone());
                    }
                }
            }
            let id = format!("s{i:05}a{a}");
            ids.insert(id.clone());
            abstracts.push(TokenizedAbstract {
                id,
                tokens,
                drug_mentions: [cardiac.clone(), other.clone()].into_iter().collect(),
            });
        }
        samples.push(InteractionSample {
            cardiac_drug: cardiac,
            other_drug: other,
            label,
            template_id: None,
            abstract_ids: ids,
        });
    }
    PlantedCorpus {
        abstracts,
        samples,
        signal_words: signal.iter().map(|&r| words[r].clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniConfig {
    pub n_abstracts: usize,
    pub vocab_size: usize,
    pub n_signal: usize,
    pub embedding_dim: usize,
    /// Chance that a (cardiac, other) pair is catalogued as interacting.
    pub interaction_rate: f64,
    pub n_patients: usize,
    pub seed: u64,
}

impl Default for MiniConfig {
    fn default() -> Self {
        Self {
            n_abstracts: 600,
            vocab_size: 800,
            n_signal: 12,
            embedding_dim: 16,
            interaction_rate: 0.35,
            n_patients: 12,
            seed: 7,
        }
    }
}

/// File contents of a small corpus, in the pipeline's input formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniCorpus {
    /// `drug_id<TAB>phrase<TAB>cardiac_flag`
    pub lexicon: String,
    /// `drug_a<TAB>drug_b<TAB>description`
    pub catalog: String,
    /// `id<TAB>text`
    pub abstracts: String,
    /// `token v1 .. vd`
    pub embeddings: String,
    /// `patient_id,drug,timestamp`
    pub mar: String,
}

const CARDIAC: [(&str, &[&str]); 6] = [
    ("Furosemide", &["furosemide", "frusemide"]),
    ("Digoxin", &["digoxin"]),
    ("Amiodarone", &["amiodarone"]),
    ("Metoprolol", &["metoprolol"]),
    ("Warfarin", &["warfarin"]),
    ("Diltiazem", &["diltiazem"]),
];

const OTHERS: [(&str, &[&str]); 18] = [
    ("Bumetanide", &["bumetanide"]),
    ("Aspirin", &["aspirin", "acetylsalicylic acid"]),
    ("Clarithromycin", &["clarithromycin"]),
    ("Fluconazole", &["fluconazole"]),
    ("Simvastatin", &["simvastatin"]),
    ("Verapamil", &["verapamil"]),
    ("Ibuprofen", &["ibuprofen"]),
    ("Omeprazole", &["omeprazole"]),
    ("Rifampicin", &["rifampicin", "rifampin"]),
    ("Ketoconazole", &["ketoconazole"]),
    ("Lithium", &["lithium carbonate"]),
    ("Phenytoin", &["phenytoin"]),
    ("Cimetidine", &["cimetidine"]),
    ("Quinidine", &["quinidine"]),
    ("Theophylline", &["theophylline"]),
    ("Sertraline", &["sertraline"]),
    ("Metformin", &["metformin"]),
    ("Tramadol", &["tramadol"]),
];

/// Mentioned in text but absent from the lexicon.
const UNLISTED: [&str; 3] = ["placebocillin", "vitamin", "saline"];

const TEMPLATES: [&str; 5] = [
    "{a} may increase the hypotensive activities of {b}.",
    "The risk or severity of bleeding can be increased when {a} is combined with {b}.",
    "{a} may decrease the excretion rate of {b} which could result in a higher serum level.",
    "The serum concentration of {b} can be increased when it is combined with {a}.",
    "{a} can cause a decrease in the absorption of {b} resulting in a reduced serum concentration.",
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Deterministic in `cfg`. The catalog always lists
/// `Furosemide / Bumetanide` as "Reduced Kidney Function", and the MAR
/// contains patient `P000` whose doses of the two overlap from 2015-07-15 to
/// 2015-07-19.
pub fn mini_corpus(cfg: &MiniConfig) -> MiniCorpus {
    let mut rng = XorShift64Star::stream(cfg.seed, MINI_STREAM);
    let words: Vec<String> = (0..cfg.vocab_size).map(|i| filler_word(i, cfg.vocab_size)).collect();
    let zipf = Zipf::new(cfg.vocab_size, 1.0);
    let mut ranks: Vec<usize> = (cfg.vocab_size / 10..cfg.vocab_size).collect();
    rng.shuffle(&mut ranks);
    let signal: Vec<usize> = ranks[..cfg.n_signal.min(ranks.len())].to_vec();

    let mut lexicon = String::from("# drug_id\tphrase\tcardiac\n");
    for (flag, list) in [(1, &CARDIAC[..]), (0, &OTHERS[..])] {
        for (id, phrases) in list {
            for p in *phrases {
                writeln!(lexicon, "{id}\t{p}\t{flag}").unwrap();
            }
        }
    }

    let drugs: Vec<(&str, &[&str])> = CARDIAC.iter().chain(OTHERS.iter()).copied().collect();
    let mut pairs: BTreeMap<(usize, usize), String> = BTreeMap::new();
    pairs.insert((0, CARDIAC.len()), "Reduced Kidney Function".to_string());
    for c in 0..CARDIAC.len() {
        for o in c + 1..drugs.len() {
            if pairs.contains_key(&(c, o)) || !rng.bernoulli(cfg.interaction_rate) {
                continue;
            }
            let (a, b) = if rng.bernoulli(0.5) { (c, o) } else { (o, c) };
            let t = TEMPLATES[rng.index(TEMPLATES.len())];
            let text = t.replace("{a}", drugs[a].0).replace("{b}", drugs[b].0.to_lowercase().as_str());
            pairs.insert((c, o), capitalize(&text));
        }
    }
    let mut catalog = String::from("drug_a\tdrug_b\tdescription\n");
    for (&(a, b), text) in &pairs {
        writeln!(catalog, "{}\t{}\t{text}", drugs[a].0, drugs[b].0).unwrap();
    }
    let interacting: Vec<(usize, usize)> = pairs.keys().copied().collect();

    let mut abstracts = String::new();
    for i in 0..cfg.n_abstracts {
        let mut mentioned: Vec<String> = Vec::new();
        let mut signal_rate = 0.02;
        let roll = rng.unit_f64();
        if roll < 0.45 {
            let (a, b) = interacting[rng.index(interacting.len())];
            for d in [a, b] {
                let phrases = drugs[d].1;
                mentioned.push(phrases[rng.index(phrases.len())].to_string());
            }
            signal_rate = 0.3;
        } else if roll < 0.9 {
            for _ in 0..1 + rng.index(3) {
                let (_, phrases) = drugs[rng.index(drugs.len())];
                mentioned.push(phrases[rng.index(phrases.len())].to_string());
            }
        }
        if rng.bernoulli(0.2) {
            mentioned.push(UNLISTED[rng.index(UNLISTED.len())].to_string());
        }
        let n_words = 40 + rng.index(60);
        let mut tokens: Vec<String> = (0..n_words).map(|_| words[zipf.sample(&mut rng)].clone()).collect();
        for &r in &signal {
            if rng.bernoulli(signal_rate) {
                tokens.insert(rng.index(tokens.len() + 1), words[r].clone());
            }
        }
        for m in &mentioned {
            let name = if rng.bernoulli(0.5) { capitalize(m) } else { m.clone() };
            tokens.insert(rng.index(tokens.len() + 1), name);
        }
        let mut text = String::new();
        for (k, t) in tokens.iter().enumerate() {
            if k > 0 {
                text.push(if k % 13 == 0 { '.' } else { ' ' });
                if k % 13 == 0 {
                    text.push(' ');
                }
            }
            text.push_str(t);
        }
        text.push('.');
        writeln!(abstracts, "{}\t{text}", 100_000 + i).unwrap();
    }

    let mut embeddings = format!("{} {}\n", 0, cfg.embedding_dim);
    let direction: Vec<f64> = (0..cfg.embedding_dim).map(|_| rng.normal()).collect();
    let mut n_vectors = 0;
    for (r, w) in words.iter().enumerate() {
        if rng.bernoulli(0.1) {
            continue;
        }
        let is_signal = signal.contains(&r);
        let v: Vec<String> = direction
            .iter()
            .map(|d| {
                let x = if is_signal { d + 0.3 * rng.normal() } else { rng.normal() };
                format!("{:.5}", x)
            })
            .collect();
        writeln!(embeddings, "{w} {}", v.join(" ")).unwrap();
        n_vectors += 1;
    }
    embeddings = embeddings.replacen("0 ", &format!("{n_vectors} "), 1);

    let mut mar = String::from("patient_id,drug,timestamp\n");
    for (drug, hour) in [("Furosemide", 8), ("Bumetanide", 10)] {
        for day in 15..=18 {
            writeln!(mar, "P000,{drug},2015-07-{day}T{hour:02}:00:00Z").unwrap();
        }
    }
    for p in 1..=cfg.n_patients {
        for _ in 0..3 + rng.index(8) {
            let (d, _) = drugs[rng.index(drugs.len())];
            let day = 1 + rng.index(28);
            let hour = rng.index(24);
            writeln!(mar, "P{p:03},{d},2016-03-{day:02}T{hour:02}:00:00Z").unwrap();
        }
    }

    MiniCorpus {
        lexicon,
        catalog,
        abstracts,
        embeddings,
        mar,
    }
}
