//! Leakage-free train/dev/test splitting.
//!
//! Abstracts and interaction samples are partitioned independently. A
//! sample then receives only abstracts from its own split that mention
//! either of its drugs, so no abstract can feed samples on both sides of a
//! split boundary. Within a split an abstract may serve many samples.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DrugId, TokenizedAbstract};
use crate::error::{Error, Result};
use crate::labeling::InteractionSample;
use crate::rng::XorShift64Star;

const ABSTRACT_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::validation(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    /// 20% held out for test, then 20% of the remainder for dev.
    fn default() -> Self {
        Self {
            train: 0.64,
            dev: 0.16,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let r = Self { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::validation(format!(
                "split ratios must be finite and non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items by largest remainder: each split gets
    /// the floor of its quota, then leftover items go to the largest
    /// fractional parts, ties resolved train, dev, test.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train, self.dev, self.test].map(|r| r * n as f64);
        let mut sizes = quotas.map(|q| (q + 1e-9).floor() as usize);
        let assigned: usize = sizes.iter().sum();
        let mut order = [0usize, 1, 2];
        let frac = |i: usize| quotas[i] - sizes[i] as f64;
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub abstract_split: BTreeMap<String, Split>,
    pub sample_split: BTreeMap<String, Split>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

fn partition(
    keys: Vec<String>,
    ratios: &SplitRatios,
    rng: &mut XorShift64Star,
    what: &str,
) -> Result<BTreeMap<String, Split>> {
    let mut keys = keys;
    let n = keys.len();
    rng.shuffle(&mut keys);
    let [n_train, n_dev, _] = ratios.sizes(n);
    let mut out = BTreeMap::new();
    for (i, key) in keys.into_iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        };
        if out.insert(key.clone(), split).is_some() {
            return Err(Error::validation(format!("duplicate {what} key {key:?}")));
        }
    }
    Ok(out)
}

/// Shuffles abstracts and samples with independent seeded streams and cuts
/// each list by `ratios`.
pub fn split_corpus(
    abstracts: &[TokenizedAbstract],
    samples: &[InteractionSample],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment> {
    ratios.validate()?;
    if abstracts.is_empty() {
        return Err(Error::validation("cannot split an empty abstract list"));
    }
    if samples.is_empty() {
        return Err(Error::validation("cannot split an empty sample list"));
    }
    let abstract_keys = abstracts.iter().map(|a| a.id.clone()).collect();
    let sample_keys = samples.iter().map(InteractionSample::key).collect();
    Ok(SplitAssignment {
        abstract_split: partition(
            abstract_keys,
            &ratios,
            &mut XorShift64Star::stream(seed, ABSTRACT_STREAM),
            "abstract",
        )?,
        sample_split: partition(
            sample_keys,
            &ratios,
            &mut XorShift64Star::stream(seed, SAMPLE_STREAM),
            "sample",
        )?,
        seed,
        ratios,
    })
}

type MentionIndex<'a> = HashMap<&'a DrugId, Vec<&'a str>>;

fn mention_index<'a>(
    abstracts: &'a [TokenizedAbstract],
    mut keep: impl FnMut(&TokenizedAbstract) -> Result<bool>,
) -> Result<MentionIndex<'a>> {
    let mut index: MentionIndex<'a> = HashMap::new();
    for a in abstracts {
        if keep(a)? {
            for d in &a.drug_mentions {
                index.entry(d).or_default().push(a.id.as_str());
            }
        }
    }
    Ok(index)
}

fn lookup<'a, 'b>(index: &'b MentionIndex<'a>, d: &'b DrugId) -> impl Iterator<Item = &'a str> + 'b {
    index.get(d).into_iter().flatten().copied()
}

/// Fills `abstract_ids` of every sample with the abstracts of its own split
/// that mention either of its drugs. Existing ids are replaced.
pub fn assign_abstracts(
    assignment: &SplitAssignment,
    abstracts: &[TokenizedAbstract],
    samples: &mut [InteractionSample],
) -> Result<()> {
    let mut per_split: HashMap<Split, MentionIndex<'_>> = HashMap::new();
    for split in Split::ALL {
        let index = mention_index(abstracts, |a| match assignment.abstract_split.get(&a.id) {
            Some(s) => Ok(*s == split),
            None => Err(Error::validation(format!("abstract {:?} has no split", a.id))),
        })?;
        per_split.insert(split, index);
    }
    let splits: Vec<Split> = samples
        .iter()
        .map(|s| {
            assignment
                .sample_split
                .get(&s.key())
                .copied()
                .ok_or_else(|| Error::validation(format!("sample {} has no split", s.key())))
        })
        .collect::<Result<_>>()?;
    samples
        .par_iter_mut()
        .zip(splits.par_iter())
        .for_each(|(sample, split)| {
            let index = &per_split[split];
            sample.abstract_ids = lookup(index, &sample.cardiac_drug)
                .chain(lookup(index, &sample.other_drug))
                .map(str::to_string)
                .collect();
        });
    Ok(())
}

/// The leaky baseline: samples are split but abstracts are not, so each
/// sample receives every abstract mentioning either drug. Diagnostic only.
pub fn assign_abstracts_naive(abstracts: &[TokenizedAbstract], samples: &mut [InteractionSample]) {
    let index = mention_index(abstracts, |_| Ok(true)).expect("infallible filter");
    samples.par_iter_mut().for_each(|sample| {
        sample.abstract_ids = lookup(&index, &sample.cardiac_drug)
            .chain(lookup(&index, &sample.other_drug))
            .map(str::to_string)
            .collect();
    });
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub split: Split,
    pub samples: usize,
    pub positives: usize,
    pub empty_samples: usize,
    pub abstracts_used: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageReport {
    /// Abstracts used by samples of both splits, for each split pair.
    pub shared: Vec<(Split, Split, usize)>,
    pub per_split: Vec<SplitCounts>,
}

impl LeakageReport {
    pub fn cross_split_total(&self) -> usize {
        self.shared.iter().map(|(_, _, n)| n).sum()
    }
}

pub fn leakage_report(assignment: &SplitAssignment, samples: &[InteractionSample]) -> Result<LeakageReport> {
    let mut used: BTreeMap<Split, HashSet<&str>> = BTreeMap::new();
    let mut counts: BTreeMap<Split, SplitCounts> = Split::ALL
        .iter()
        .map(|&split| {
            (
                split,
                SplitCounts {
                    split,
                    samples: 0,
                    positives: 0,
                    empty_samples: 0,
                    abstracts_used: 0,
                },
            )
        })
        .collect();
    for s in samples {
        let split = *assignment
            .sample_split
            .get(&s.key())
            .ok_or_else(|| Error::validation(format!("sample {} has no split", s.key())))?;
        let c = counts.get_mut(&split).expect("all splits present");
        c.samples += 1;
        c.positives += usize::from(s.label == 1);
        c.empty_samples += usize::from(s.abstract_ids.is_empty());
        used.entry(split)
            .or_default()
            .extend(s.abstract_ids.iter().map(String::as_str));
    }
    let empty = HashSet::new();
    let get = |s: Split| used.get(&s).unwrap_or(&empty);
    let mut shared = Vec::new();
    for (i, &a) in Split::ALL.iter().enumerate() {
        for &b in &Split::ALL[i + 1..] {
            shared.push((a, b, get(a).intersection(get(b)).count()));
        }
    }
    for (split, c) in counts.iter_mut() {
        c.abstracts_used = get(*split).len();
    }
    Ok(LeakageReport {
        shared,
        per_split: counts.into_values().collect(),
    })
}

impl SplitAssignment {
    pub fn split_of_sample(&self, key: &str) -> Option<Split> {
        self.sample_split.get(key).copied()
    }

    /// Writes the assignment file: `#` header lines (seed, ratios, any extra
    /// `key=value` pairs), a column header, then `kind<TAB>key<TAB>split`
    /// rows, abstracts first, each block sorted by key.
    pub fn write_tsv<W: Write>(&self, mut w: W, extra_header: &[(&str, String)]) -> std::io::Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(
            w,
            "# ratios={},{},{}",
            self.ratios.train, self.ratios.dev, self.ratios.test
        )?;
        for (k, v) in extra_header {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "kind\tkey\tsplit")?;
        for (k, s) in &self.abstract_split {
            writeln!(w, "abstract\t{k}\t{s}")?;
        }
        for (k, s) in &self.sample_split {
            writeln!(w, "sample\t{k}\t{s}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut seed = None;
        let mut ratios = None;
        let mut abstract_split = BTreeMap::new();
        let mut sample_split = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let row_err = |m: String| Error::row(source_name, line_no, m);
            if let Some(header) = line.strip_prefix("# ") {
                if let Some(v) = header.strip_prefix("seed=") {
                    seed = Some(v.parse::<u64>().map_err(|e| row_err(e.to_string()))?);
                } else if let Some(v) = header.strip_prefix("ratios=") {
                    let parts: Vec<f64> = v
                        .split(',')
                        .map(|p| p.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| row_err(e.to_string()))?;
                    if parts.len() != 3 {
                        return Err(row_err("ratios needs three values".into()));
                    }
                    ratios = Some(SplitRatios::new(parts[0], parts[1], parts[2])?);
                }
                continue;
            }
            if line.is_empty() || line == "kind\tkey\tsplit" {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(row_err("expected kind, key and split".into()));
            }
            let split: Split = fields[2].parse().map_err(|e: Error| row_err(e.to_string()))?;
            let target = match fields[0] {
                "abstract" => &mut abstract_split,
                "sample" => &mut sample_split,
                other => return Err(row_err(format!("unknown kind {other:?}"))),
            };
            if target.insert(fields[1].to_string(), split).is_some() {
                return Err(row_err(format!("duplicate key {:?}", fields[1])));
            }
        }
        Ok(Self {
            abstract_split,
            sample_split,
            seed: seed.ok_or_else(|| Error::validation(format!("{source_name}: missing seed header")))?,
            ratios: ratios
                .ok_or_else(|| Error::validation(format!("{source_name}: missing ratios header")))?,
        })
    }
}

/// Abstract ids grouped by split, sorted.
pub fn abstracts_by_split(assignment: &SplitAssignment) -> BTreeMap<Split, BTreeSet<&str>> {
    let mut out: BTreeMap<Split, BTreeSet<&str>> = BTreeMap::new();
    for (id, s) in &assignment.abstract_split {
        out.entry(*s).or_default().insert(id.as_str());
    }
    out
}
