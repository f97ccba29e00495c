//! Sparse weight vectors produced by tree-family learners.
//!
//! A fitted learner assigns a query point a nonnegative weight over every
//! training row; the weights sum to one and predictions are weighted
//! combinations of per-row costs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse nonnegative weights over `len` training rows, summing to one.
/// Entries are sorted by row index and omit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    len: usize,
    entries: Vec<(usize, f64)>,
}

impl WeightVector {
    /// Build from (row, weight) entries; entries are sorted and zero weights
    /// dropped.
    pub fn from_entries(len: usize, mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|(_, w)| *w != 0.0);
        entries.sort_unstable_by_key(|(i, _)| *i);
        debug_assert!(entries.iter().all(|(i, _)| *i < len));
        Self { len, entries }
    }

    /// Uniform weights `1/k` over `k` rows.
    pub fn uniform(len: usize, rows: &[usize]) -> Self {
        let w = 1.0 / rows.len() as f64;
        Self::from_entries(len, rows.iter().map(|&i| (i, w)).collect())
    }

    /// Average of several weight vectors over the same row set.
    pub fn average(vectors: &[WeightVector]) -> Self {
        assert!(!vectors.is_empty());
        let len = vectors[0].len;
        let scale = 1.0 / vectors.len() as f64;
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for v in vectors {
            debug_assert_eq!(v.len, len);
            for &(i, w) in &v.entries {
                *acc.entry(i).or_insert(0.0) += w * scale;
            }
        }
        Self {
            len,
            entries: acc.into_iter().collect(),
        }
    }

    /// Number of rows the vector is defined over (including zero weights).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nonzero (row, weight) pairs in ascending row order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.len()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.entries.iter().map(|(_, w)| *w).fold(0.0, f64::max)
    }

    /// Row indices carrying nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|(i, _)| *i).collect()
    }

    /// Check the weight laws: sum one within `1e-10` and every weight in
    /// `[0, 1/min_leaf]` (up to floating slack).
    pub fn validate(&self, min_leaf: usize) -> Result<()> {
        let sum = self.sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        let cap = 1.0 / min_leaf as f64;
        for &(i, w) in &self.entries {
            if w < 0.0 || w > cap + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "weight {w} on row {i} outside [0, {cap}]"
                )));
            }
        }
        Ok(())
    }
}
