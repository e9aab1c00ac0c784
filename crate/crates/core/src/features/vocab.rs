use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::corpus::TokenizedAbstract;
use crate::error::{Error, Result};

/// Lowercase stopword list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

const ENGLISH_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

impl Stopwords {
    pub fn none() -> Self {
        Self::default()
    }

    /// The bundled standard English list.
    pub fn english() -> Self {
        Self::read(ENGLISH_STOPWORDS.as_bytes()).expect("bundled list is valid")
    }

    /// One token per line; blank lines and `#` lines ignored; entries lowercased.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut set = HashSet::new();
        for line in reader.lines() {
            let line = line?;
            let w = line.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            set.insert(w.to_lowercase());
        }
        Ok(Self(set))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// Word columns ordered by corpus frequency (descending), ties broken by
/// the word in ascending byte order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_sorted(words: Vec<(String, u64)>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i))
            .collect();
        Self { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn word(&self, column: usize) -> Option<&str> {
        self.words.get(column).map(|(w, _)| w.as_str())
    }

    pub fn words(&self) -> &[(String, u64)] {
        &self.words
    }

    /// Rows `column<TAB>word<TAB>frequency`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "column\tword\tfrequency")?;
        for (i, (word, f)) in self.words.iter().enumerate() {
            writeln!(w, "{i}\t{word}\t{f}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut words = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line == "column\tword\tfrequency" || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = || Error::row(source_name, idx + 1, "expected column, word, frequency");
            if fields.len() != 3 {
                return Err(bad());
            }
            let col: usize = fields[0].parse().map_err(|_| bad())?;
            if col != words.len() {
                return Err(Error::row(source_name, idx + 1, "columns must be dense and ordered"));
            }
            let freq: u64 = fields[2].parse().map_err(|_| bad())?;
            words.push((fields[1].to_string(), freq));
        }
        Ok(Self::from_sorted(words))
    }
}

/// Counts token occurrences over `abstracts` (the training split only) and
/// keeps the `top_k` most frequent; `None` keeps every word.
pub fn build_vocab(
    abstracts: &[&TokenizedAbstract],
    top_k: Option<usize>,
    exclude: &Stopwords,
) -> Vocabulary {
    let counts: HashMap<&str, u64> = abstracts
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<&str, u64>, a| {
            for t in &a.tokens {
                if !exclude.contains(t) {
                    *acc.entry(t.as_str()).or_default() += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let mut words: Vec<(String, u64)> = counts.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        words.truncate(k);
    }
    Vocabulary::from_sorted(words)
}
