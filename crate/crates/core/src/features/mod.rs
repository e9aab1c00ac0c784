//! Per-sample features: summed word counts over a sample's abstracts, or
//! summed term-frequency-weighted embeddings; plus label-balancing
//! undersampling and matrix persistence.

mod embedding;
mod sparse;
mod vocab;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use embedding::{embed_abstract, EmbeddedText, EmbeddingTable, TfWeighting};
pub use sparse::SparseVector;
pub use vocab::{build_vocab, Stopwords, Vocabulary};

use crate::corpus::TokenizedAbstract;
use crate::error::{Error, Result};
use crate::labeling::InteractionSample;
use crate::rng::XorShift64Star;

const UNDERSAMPLE_STREAM: u64 = 3;

pub type AbstractIndex<'a> = HashMap<&'a str, &'a TokenizedAbstract>;

pub fn index_abstracts(abstracts: &[TokenizedAbstract]) -> AbstractIndex<'_> {
    abstracts.iter().map(|a| (a.id.as_str(), a)).collect()
}

fn resolve<'a>(index: &AbstractIndex<'a>, sample: &InteractionSample, id: &str) -> Result<&'a TokenizedAbstract> {
    index.get(id).copied().ok_or_else(|| {
        Error::validation(format!("sample {} references unknown abstract {id:?}", sample.key()))
    })
}

/// Word counts summed over every abstract assigned to the sample.
pub fn count_vector(
    sample: &InteractionSample,
    abstracts: &AbstractIndex<'_>,
    vocab: &Vocabulary,
) -> Result<SparseVector> {
    let mut pairs = Vec::new();
    for id in &sample.abstract_ids {
        let a = resolve(abstracts, sample, id)?;
        pairs.extend(a.tokens.iter().filter_map(|t| vocab.column(t)).map(|c| (c, 1.0)));
    }
    Ok(SparseVector::from_pairs(vocab.len(), pairs))
}

/// Sum of [`embed_abstract`] over the sample's abstracts (in id order).
pub fn embed_sample(
    sample: &InteractionSample,
    abstracts: &AbstractIndex<'_>,
    table: &EmbeddingTable,
    stopwords: &Stopwords,
    weighting: TfWeighting,
) -> Result<EmbeddedText> {
    let mut out = EmbeddedText {
        vector: vec![0.0; table.dim()],
        hits: 0,
        misses: 0,
    };
    for id in &sample.abstract_ids {
        let a = resolve(abstracts, sample, id)?;
        let e = embed_abstract(a, table, stopwords, weighting);
        for (acc, x) in out.vector.iter_mut().zip(&e.vector) {
            *acc += x;
        }
        out.hits += e.hits;
        out.misses += e.misses;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Sparse,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Sparse(Vec<SparseVector>),
    Dense(Vec<Vec<f64>>),
}

/// Feature rows with aligned row keys and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    row_keys: Vec<String>,
    dims: usize,
    storage: Storage,
    labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn new(row_keys: Vec<String>, dims: usize, storage: Storage, labels: Vec<u8>) -> Result<Self> {
        let n = match &storage {
            Storage::Sparse(rows) => {
                if rows.iter().any(|r| r.dims() != dims) {
                    return Err(Error::validation("sparse row width differs from matrix dims"));
                }
                rows.len()
            }
            Storage::Dense(rows) => {
                if rows.iter().any(|r| r.len() != dims) {
                    return Err(Error::validation("dense row width differs from matrix dims"));
                }
                rows.len()
            }
        };
        if row_keys.len() != n || labels.len() != n {
            return Err(Error::validation(format!(
                "{n} rows but {} keys and {} labels",
                row_keys.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::validation("labels must be 0 or 1"));
        }
        Ok(Self {
            row_keys,
            dims,
            storage,
            labels,
        })
    }

    pub fn from_dense(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        let keys = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(keys, dims, Storage::Dense(rows), labels)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_keys(&self) -> &[String] {
        &self.row_keys
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn storage_kind(&self) -> StorageKind {
        match self.storage {
            Storage::Sparse(_) => StorageKind::Sparse,
            Storage::Dense(_) => StorageKind::Dense,
        }
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (self.labels.len() - pos, pos)
    }

    /// Calls `f(column, value)` for every stored entry of row `i`.
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match &self.storage {
            Storage::Sparse(rows) => rows[i].entries().iter().for_each(|&(c, v)| f(c, v)),
            Storage::Dense(rows) => rows[i].iter().enumerate().for_each(|(c, &v)| f(c, v)),
        }
    }

    pub fn row_dot(&self, i: usize, weights: &[f64]) -> f64 {
        match &self.storage {
            Storage::Sparse(rows) => rows[i].dot(weights),
            Storage::Dense(rows) => rows[i].iter().zip(weights).map(|(x, w)| x * w).sum(),
        }
    }

    pub fn all_finite(&self) -> bool {
        match &self.storage {
            Storage::Sparse(rows) => rows.iter().all(|r| r.entries().iter().all(|(_, v)| v.is_finite())),
            Storage::Dense(rows) => rows.iter().all(|r| r.iter().all(|v| v.is_finite())),
        }
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let storage = match &self.storage {
            Storage::Sparse(rows) => Storage::Sparse(indices.iter().map(|&i| rows[i].clone()).collect()),
            Storage::Dense(rows) => Storage::Dense(indices.iter().map(|&i| rows[i].clone()).collect()),
        };
        Self {
            row_keys: indices.iter().map(|&i| self.row_keys[i].clone()).collect(),
            dims: self.dims,
            storage,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Header `# features rows=N dims=D storage=KIND`, any extra `# key=value`
    /// lines, then one `key<TAB>label<TAB>values` record per row. Sparse
    /// values are `col:value` pairs, dense values the full row; both
    /// space-separated.
    pub fn write<W: Write>(&self, mut w: W, extra_header: &[(&str, String)]) -> std::io::Result<()> {
        let kind = match self.storage_kind() {
            StorageKind::Sparse => "sparse",
            StorageKind::Dense => "dense",
        };
        writeln!(w, "# features rows={} dims={} storage={kind}", self.n_rows(), self.dims)?;
        for (k, v) in extra_header {
            writeln!(w, "# {k}={v}")?;
        }
        for i in 0..self.n_rows() {
            write!(w, "{}\t{}\t", self.row_keys[i], self.labels[i])?;
            match &self.storage {
                Storage::Sparse(rows) => {
                    let parts: Vec<String> = rows[i].entries().iter().map(|(c, v)| format!("{c}:{v}")).collect();
                    writeln!(w, "{}", parts.join(" "))?;
                }
                Storage::Dense(rows) => {
                    let parts: Vec<String> = rows[i].iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{}", parts.join(" "))?;
                }
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::validation(format!("{source_name}: empty feature file")))?;
        let header = header?;
        let fields: HashMap<&str, &str> = header
            .strip_prefix("# features ")
            .ok_or_else(|| Error::row(source_name, 1, "missing feature header"))?
            .split(' ')
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::row(source_name, 1, format!("header lacks {k}")))
        };
        let rows: usize = get("rows")?.parse().map_err(|_| Error::row(source_name, 1, "bad rows"))?;
        let dims: usize = get("dims")?.parse().map_err(|_| Error::row(source_name, 1, "bad dims"))?;
        let sparse = match get("storage")? {
            "sparse" => true,
            "dense" => false,
            other => return Err(Error::row(source_name, 1, format!("unknown storage {other}"))),
        };
        let mut keys = Vec::with_capacity(rows);
        let mut labels = Vec::with_capacity(rows);
        let mut sparse_rows = Vec::new();
        let mut dense_rows = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::row(source_name, line_no, m.to_string());
            let mut parts = line.splitn(3, '\t');
            let (Some(key), Some(label), Some(values)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected key, label and values"));
            };
            keys.push(key.to_string());
            labels.push(match label {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad("label must be 0 or 1")),
            });
            let tokens = values.split(' ').filter(|s| !s.is_empty());
            if sparse {
                let mut pairs = Vec::new();
                for t in tokens {
                    let (c, v) = t.split_once(':').ok_or_else(|| bad("expected col:value"))?;
                    let c: usize = c.parse().map_err(|_| bad("bad column"))?;
                    let v: f64 = v.parse().map_err(|_| bad("bad value"))?;
                    if c >= dims {
                        return Err(bad("column out of range"));
                    }
                    pairs.push((c, v));
                }
                sparse_rows.push(SparseVector::from_pairs(dims, pairs));
            } else {
                let row: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("bad value"))?;
                if row.len() != dims {
                    return Err(bad("row width differs from dims"));
                }
                dense_rows.push(row);
            }
        }
        if keys.len() != rows {
            return Err(Error::validation(format!(
                "{source_name}: header says {rows} rows, found {}",
                keys.len()
            )));
        }
        let storage = if sparse {
            Storage::Sparse(sparse_rows)
        } else {
            Storage::Dense(dense_rows)
        };
        Self::new(keys, dims, storage, labels)
    }
}

/// Word-count matrix for `samples`, rows in sample order.
pub fn count_matrix(
    samples: &[InteractionSample],
    abstracts: &AbstractIndex<'_>,
    vocab: &Vocabulary,
) -> Result<FeatureMatrix> {
    let rows = samples
        .par_iter()
        .map(|s| count_vector(s, abstracts, vocab))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(
        samples.iter().map(InteractionSample::key).collect(),
        vocab.len(),
        Storage::Sparse(rows),
        samples.iter().map(|s| s.label).collect(),
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingCoverage {
    pub hits: usize,
    pub misses: usize,
}

/// Embedding matrix for `samples`, rows in sample order, plus hit/miss
/// totals summed over samples.
pub fn embedding_matrix(
    samples: &[InteractionSample],
    abstracts: &AbstractIndex<'_>,
    table: &EmbeddingTable,
    stopwords: &Stopwords,
    weighting: TfWeighting,
) -> Result<(FeatureMatrix, EmbeddingCoverage)> {
    let embedded = samples
        .par_iter()
        .map(|s| embed_sample(s, abstracts, table, stopwords, weighting))
        .collect::<Result<Vec<_>>>()?;
    let coverage = embedded.iter().fold(EmbeddingCoverage::default(), |acc, e| EmbeddingCoverage {
        hits: acc.hits + e.hits,
        misses: acc.misses + e.misses,
    });
    let matrix = FeatureMatrix::new(
        samples.iter().map(InteractionSample::key).collect(),
        table.dim(),
        Storage::Dense(embedded.into_iter().map(|e| e.vector).collect()),
        samples.iter().map(|s| s.label).collect(),
    )?;
    Ok((matrix, coverage))
}

/// Keeps every minority-class row and a seeded sample (without replacement)
/// of majority-class rows of the same size. Surviving rows keep their
/// original relative order.
pub fn undersample(matrix: &FeatureMatrix, seed: u64) -> Result<FeatureMatrix> {
    let (neg, pos) = matrix.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::validation("undersampling needs both classes present"));
    }
    let majority_label = u8::from(pos > neg);
    let minority = neg.min(pos);
    let mut majority: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| matrix.labels[i] == majority_label)
        .collect();
    let mut rng = XorShift64Star::stream(seed, UNDERSAMPLE_STREAM);
    // partial Fisher-Yates: the first `minority` slots become the sample
    for i in 0..minority {
        let j = i + rng.index(majority.len() - i);
        majority.swap(i, j);
    }
    let mut keep = vec![false; matrix.n_rows()];
    for &i in &majority[..minority] {
        keep[i] = true;
    }
    for (i, y) in matrix.labels.iter().enumerate() {
        if *y != majority_label {
            keep[i] = true;
        }
    }
    let survivors: Vec<usize> = (0..matrix.n_rows()).filter(|&i| keep[i]).collect();
    Ok(matrix.select(&survivors))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::corpus::tokenize;

    fn abs(id: &str, text: &str) -> TokenizedAbstract {
        TokenizedAbstract {
            id: id.into(),
            tokens: tokenize(text),
            drug_mentions: Default::default(),
        }
    }

    fn sample(ids: &[&str]) -> InteractionSample {
        InteractionSample {
            cardiac_drug: "c".into(),
            other_drug: "o".into(),
            label: 1,
            template_id: None,
            abstract_ids: ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
        }
    }

    #[test]
    fn count_vector_examples() {
        let corpus = vec![abs("a1", "dose dose response"), abs("a2", "response curve")];
        let refs: Vec<_> = corpus.iter().collect();
        let vocab = build_vocab(&refs[..1], None, &Stopwords::none());
        assert_eq!(vocab.column("dose"), Some(0));
        let index = index_abstracts(&corpus);
        let v = count_vector(&sample(&["a1"]), &index, &vocab).unwrap();
        assert_eq!(v.entries(), &[(0, 2.0), (1, 1.0)]);
        assert!(count_vector(&sample(&[]), &index, &vocab).unwrap().is_zero());
        // out-of-vocabulary words contribute nothing
        let both = count_vector(&sample(&["a1", "a2"]), &index, &vocab).unwrap();
        assert_eq!(both.entries(), &[(0, 2.0), (1, 2.0)]);
        assert!(count_vector(&sample(&["nope"]), &index, &vocab).is_err());
    }

    #[test]
    fn embed_sample_sums_abstracts() {
        let corpus = vec![abs("a1", "x x"), abs("a2", "y q")];
        let index = index_abstracts(&corpus);
        let table = EmbeddingTable::read("x 1 0\ny 0 2\n".as_bytes(), "e").unwrap();
        let e = embed_sample(&sample(&["a1", "a2"]), &index, &table, &Stopwords::none(), TfWeighting::Raw).unwrap();
        assert_eq!(e.vector, vec![2.0, 2.0]);
        assert_eq!(e.misses, 1);
        let empty = embed_sample(&sample(&[]), &index, &table, &Stopwords::none(), TfWeighting::Raw).unwrap();
        assert_eq!(empty.vector, vec![0.0, 0.0]);
        assert!(embed_sample(&sample(&["zz"]), &index, &table, &Stopwords::none(), TfWeighting::Raw).is_err());
    }

    fn labeled(labels: &[u8]) -> FeatureMatrix {
        let rows = labels.iter().enumerate().map(|(i, _)| vec![i as f64, 1.0]).collect();
        FeatureMatrix::from_dense(rows, labels.to_vec()).unwrap()
    }

    #[test]
    fn undersample_examples() {
        let m = labeled(&[1, 0, 0, 0]);
        let u = undersample(&m, 5).unwrap();
        assert_eq!(u.class_counts(), (1, 1));
        assert_eq!(u.row_keys()[0], "0");
        assert_eq!(undersample(&m, 5).unwrap(), u);

        let balanced = labeled(&[1, 0, 0, 1]);
        assert_eq!(undersample(&balanced, 9).unwrap(), balanced);

        assert!(undersample(&labeled(&[1, 1]), 1).is_err());
    }

    #[test]
    fn matrix_round_trip_both_storages() {
        let dense = FeatureMatrix::from_dense(vec![vec![0.1, -2.5e-7], vec![3.0, 0.0]], vec![1, 0]).unwrap();
        let mut buf = Vec::new();
        dense.write(&mut buf, &[("config", "x".into())]).unwrap();
        assert_eq!(FeatureMatrix::read(buf.as_slice(), "m").unwrap(), dense);

        let sparse = FeatureMatrix::new(
            vec!["a|b".into(), "a|c".into()],
            4,
            Storage::Sparse(vec![SparseVector::from_pairs(4, [(3, 2.0)]), SparseVector::zeros(4)]),
            vec![0, 1],
        )
        .unwrap();
        let mut buf = Vec::new();
        sparse.write(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "# features rows=2 dims=4 storage=sparse\na|b\t0\t3:2\na|c\t1\t\n");
        assert_eq!(FeatureMatrix::read(buf.as_slice(), "m").unwrap(), sparse);
    }

    #[test]
    fn shape_validation() {
        assert!(FeatureMatrix::new(vec!["a".into()], 2, Storage::Dense(vec![vec![1.0]]), vec![0]).is_err());
        assert!(FeatureMatrix::new(vec![], 2, Storage::Dense(vec![vec![1.0, 2.0]]), vec![0]).is_err());
        assert!(FeatureMatrix::from_dense(vec![vec![1.0]], vec![2]).is_err());
    }
}
