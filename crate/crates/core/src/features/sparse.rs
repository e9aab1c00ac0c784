use std::collections::BTreeMap;
use std::ops::Add;

use serde::{Deserialize, Serialize};

/// Sparse non-negative feature vector. Entries are sorted by column, never
/// zero, and every column is below `dims`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dims: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dims: usize) -> Self {
        Self {
            dims,
            entries: Vec::new(),
        }
    }

    /// Builds from (column, value) pairs; duplicates are summed and zeros dropped.
    pub fn from_pairs(dims: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, v) in pairs {
            assert!(c < dims, "column {c} out of range for {dims} dims");
            *acc.entry(c).or_insert(0.0) += v;
        }
        Self {
            dims,
            entries: acc.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, col: usize) -> f64 {
        self.entries
            .binary_search_by_key(&col, |(c, _)| *c)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, v)| v * dense[c]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dims];
        for &(c, v) in &self.entries {
            out[c] = v;
        }
        out
    }
}

impl Add for &SparseVector {
    type Output = SparseVector;

    fn add(self, rhs: &SparseVector) -> SparseVector {
        assert_eq!(self.dims, rhs.dims, "dimension mismatch");
        SparseVector::from_pairs(
            self.dims,
            self.entries.iter().chain(rhs.entries.iter()).copied(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_merges_and_drops_zeros() {
        let v = SparseVector::from_pairs(5, [(3, 1.0), (1, 2.0), (3, 1.0), (4, 0.0)]);
        assert_eq!(v.entries(), &[(1, 2.0), (3, 2.0)]);
        assert_eq!(v.get(3), 2.0);
        assert_eq!(v.get(0), 0.0);
        assert_eq!(v.l1_norm(), 4.0);
        assert_eq!(v.dot(&[1.0, 1.0, 1.0, 0.5, 1.0]), 3.0);
        assert_eq!(v.to_dense(), vec![0.0, 2.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn addition() {
        let a = SparseVector::from_pairs(3, [(0, 1.0)]);
        let b = SparseVector::from_pairs(3, [(0, 1.0), (2, 4.0)]);
        assert_eq!((&a + &b).entries(), &[(0, 2.0), (2, 4.0)]);
    }
}
