use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::vocab::Stopwords;
use crate::corpus::TokenizedAbstract;
use crate::error::{Error, Result};

/// Pre-trained word vectors, keyed by lowercase token.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::validation(format!(
                "vector for {token:?} has length {}, table width is {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.entry(token.to_lowercase()).or_insert(vector);
        Ok(())
    }

    /// Reads `token v1 v2 ... vd` lines. The width is taken from the first
    /// vector line; a leading `count dim` header line is skipped.
    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut table: Option<Self> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<&str> = parts.collect();
            if line_no == 1 && values.len() == 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
                continue;
            }
            let vector: Vec<f64> = values
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::row(source_name, line_no, format!("bad component: {e}")))?;
            if vector.is_empty() {
                return Err(Error::row(source_name, line_no, "token without a vector"));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::row(source_name, line_no, "non-finite component"));
            }
            let t = table.get_or_insert_with(|| Self::new(vector.len()));
            t.insert(token, vector)
                .map_err(|e| Error::row(source_name, line_no, e.to_string()))?;
        }
        table.ok_or_else(|| Error::validation(format!("{source_name}: no vectors found")))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TfWeighting {
    /// Raw occurrence count in the abstract.
    #[default]
    Raw,
    /// Count divided by the abstract's non-stopword token total.
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedText {
    pub vector: Vec<f64>,
    /// Distinct non-stopword tokens found in the table.
    pub hits: usize,
    /// Distinct non-stopword tokens missing from the table.
    pub misses: usize,
}

/// Term-frequency-weighted sum of the vectors of an abstract's distinct
/// non-stopword tokens. Tokens are visited in sorted order, so the result is
/// independent of token order bit for bit.
pub fn embed_abstract(
    abstract_: &TokenizedAbstract,
    table: &EmbeddingTable,
    stopwords: &Stopwords,
    weighting: TfWeighting,
) -> EmbeddedText {
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &abstract_.tokens {
        if !stopwords.contains(t) {
            *tf.entry(t.as_str()).or_default() += 1;
        }
    }
    let total: usize = tf.values().sum();
    let mut vector = vec![0.0; table.dim()];
    let (mut hits, mut misses) = (0, 0);
    for (token, count) in tf {
        match table.get(token) {
            Some(v) => {
                hits += 1;
                let w = match weighting {
                    TfWeighting::Raw => count as f64,
                    TfWeighting::Normalized => count as f64 / total as f64,
                };
                for (acc, x) in vector.iter_mut().zip(v) {
                    *acc += w * x;
                }
            }
            None => misses += 1,
        }
    }
    EmbeddedText {
        vector,
        hits,
        misses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(tokens: &[&str]) -> TokenizedAbstract {
        TokenizedAbstract {
            id: "a".into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            drug_mentions: Default::default(),
        }
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::read("x 1 0\ny 0 2\n".as_bytes(), "emb").unwrap()
    }

    #[test]
    fn tf_weighted_sum() {
        let e = embed_abstract(&abs(&["x", "x", "y"]), &table(), &Stopwords::none(), TfWeighting::Raw);
        assert_eq!(e.vector, vec![2.0, 2.0]);
        assert_eq!((e.hits, e.misses), (2, 0));
        let n = embed_abstract(&abs(&["x", "x", "y"]), &table(), &Stopwords::none(), TfWeighting::Normalized);
        assert_eq!(n.vector, vec![2.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn stopwords_only_gives_zero() {
        let sw: Stopwords = ["the", "of"].into_iter().collect();
        let e = embed_abstract(&abs(&["the", "of", "the"]), &table(), &sw, TfWeighting::Raw);
        assert_eq!(e.vector, vec![0.0, 0.0]);
        assert_eq!((e.hits, e.misses), (0, 0));
    }

    #[test]
    fn misses_counted() {
        let e = embed_abstract(&abs(&["x", "furosemide", "furosemide"]), &table(), &Stopwords::none(), TfWeighting::Raw);
        assert_eq!(e.vector, vec![1.0, 0.0]);
        assert_eq!(e.misses, 1);
    }

    #[test]
    fn reader_handles_header_and_rejects_ragged_rows() {
        let t = EmbeddingTable::read("2 3\nA 1 2 3\nb 4 5 6\n".as_bytes(), "emb").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("a"), Some(&[1.0, 2.0, 3.0][..]));
        let err = EmbeddingTable::read("a 1 2\nb 1\n".as_bytes(), "emb").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(EmbeddingTable::read("".as_bytes(), "emb").is_err());
    }
}
