//! Extra-trees importance ranking and top-k feature subsets.

use serde::{Deserialize, Serialize};

use crate::error::{EmgError, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;
use crate::trees::{feature_importances, fit_extra_trees, TreeParams};

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub names: Vec<String>,
    /// Aligned with `names` (schema order).
    pub scores: Vec<f64>,
    /// Names by descending score; equal scores keep schema order.
    pub ordering: Vec<String>,
    /// True when no tree had an informative split; scores are then all zero.
    pub empty: bool,
}

impl ImportanceRanking {
    pub fn new(names: Vec<String>, scores: Vec<f64>, empty: bool) -> Self {
        let mut order: Vec<usize> = (0..names.len()).collect();
        // Stable sort keeps schema order among equal scores.
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        ImportanceRanking {
            ordering: order.iter().map(|&i| names[i].clone()).collect(),
            names,
            scores,
            empty,
        }
    }

    pub fn score(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.scores[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProvenance {
    pub seed: u64,
    pub hyperparams: TreeParams,
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub names: Vec<String>,
    pub k: usize,
    pub provenance: Option<SelectionProvenance>,
}

/// Fits extra trees on `train` and ranks its columns by importance.
pub fn rank_features<F: Scalar>(train: &FeatureMatrix<F>, hp: &TreeParams, seed: u64) -> Result<ImportanceRanking> {
    let forest = fit_extra_trees(train, hp, seed)?;
    feature_importances(&forest)
}

pub fn select_top_k(r: &ImportanceRanking, k: usize) -> Result<FeatureSubset> {
    let d = r.ordering.len();
    if k == 0 || k > d {
        return Err(EmgError::KOutOfRange { k, max: d });
    }
    Ok(FeatureSubset {
        names: r.ordering[..k].to_vec(),
        k,
        provenance: None,
    })
}

/// Reduces `m` to the subset's columns, in subset order.
pub fn project<F: Scalar>(m: &FeatureMatrix<F>, s: &FeatureSubset) -> Result<FeatureMatrix<F>> {
    let cols = s
        .names
        .iter()
        .map(|n| m.column_index(n).ok_or_else(|| EmgError::UnknownFeature(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(m.take_columns(&cols))
}

/// Names present in every subset, in the order of the first one.
pub fn intersection(subsets: &[FeatureSubset]) -> Vec<String> {
    let Some(first) = subsets.first() else {
        return Vec::new();
    };
    first
        .names
        .iter()
        .filter(|n| subsets[1..].iter().all(|s| s.names.contains(n)))
        .cloned()
        .collect()
}
