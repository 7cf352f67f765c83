//! Brute-force k-nearest-neighbour classifier.
//!
//! Training rows are z-scored with the training fold's mean and population
//! standard deviation; columns that are constant on the training fold are
//! dropped from the distance. Queries are compared by Euclidean distance to
//! every stored row.
//!
//! Tie rules, all deterministic:
//! * equal distances: lower training-row index is nearer;
//! * equal vote counts: smaller summed distance wins, then smaller label code.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EmgError, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub standardize: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: DEFAULT_K,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel<F> {
    pub k: usize,
    pub standardize: bool,
    pub feature_names: Vec<String>,
    /// Columns that take part in the distance.
    pub active: Vec<usize>,
    pub means: Vec<F>,
    pub stds: Vec<F>,
    /// Standardized training rows restricted to `active`, row-major.
    rows: Vec<F>,
    labels: Vec<usize>,
    classes: Vec<usize>,
}

fn column_stats<F: Scalar>(m: &FeatureMatrix<F>, col: usize) -> (F, F) {
    let n = F::from_usize_lossy(m.n_rows());
    let mean = m.rows().map(|r| r[col]).sum::<F>() / n;
    let var = m.rows().map(|r| (r[col] - mean) * (r[col] - mean)).sum::<F>() / n;
    (mean, var.sqrt())
}

pub fn fit_knn<F: Scalar>(train: &FeatureMatrix<F>, params: &KnnParams) -> Result<KnnModel<F>> {
    let n = train.n_rows();
    if n == 0 {
        return Err(EmgError::EmptyTraining);
    }
    if params.k == 0 {
        return Err(EmgError::InvalidParams("k must be at least 1".into()));
    }
    if params.k > n {
        return Err(EmgError::KTooLarge { k: params.k, n });
    }
    let d = train.n_cols();
    let mut means = vec![F::zero(); d];
    let mut stds = vec![F::one(); d];
    let mut active = Vec::with_capacity(d);
    for j in 0..d {
        if params.standardize {
            let (mu, sd) = column_stats(train, j);
            means[j] = mu;
            stds[j] = sd;
            let tiny = F::from_f64_lossy(1e-12) * mu.abs().max(F::min_positive_value());
            if !(sd > tiny) {
                log::warn!("knn: column {:?} is constant on the training fold; excluded from distance", train.names()[j]);
                continue;
            }
        }
        active.push(j);
    }
    let mut rows = Vec::with_capacity(n * active.len());
    for r in train.rows() {
        rows.extend(active.iter().map(|&j| (r[j] - means[j]) / stds[j]));
    }
    Ok(KnnModel {
        k: params.k,
        standardize: params.standardize,
        feature_names: train.names().to_vec(),
        active,
        means,
        stds,
        rows,
        labels: train.labels().to_vec(),
        classes: train.classes(),
    })
}

impl<F: Scalar> KnnModel<F> {
    pub fn n_train(&self) -> usize {
        self.labels.len()
    }

    fn standardize_row(&self, row: &[F]) -> Vec<F> {
        self.active
            .iter()
            .map(|&j| (row[j] - self.means[j]) / self.stds[j])
            .collect()
    }

    /// `(distance, training index)` of the `k` nearest rows, nearest first.
    pub fn neighbors(&self, row: &[F]) -> Result<Vec<(F, usize)>> {
        if row.len() != self.feature_names.len() {
            return Err(EmgError::WidthMismatch {
                expected: self.feature_names.len(),
                got: row.len(),
            });
        }
        let q = self.standardize_row(row);
        let w = q.len();
        let mut dist: Vec<(F, usize)> = (0..self.n_train())
            .map(|i| {
                let t = &self.rows[i * w..(i + 1) * w];
                let d2 = q.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>();
                (d2, i)
            })
            .collect();
        let by_key = |a: &(F, usize), b: &(F, usize)| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_key);
            dist.truncate(self.k);
        }
        dist.sort_by(by_key);
        Ok(dist.into_iter().map(|(d2, i)| (d2.sqrt(), i)).collect())
    }

    pub fn predict_row(&self, row: &[F]) -> Result<usize> {
        let nn = self.neighbors(row)?;
        let mut votes = vec![0usize; self.classes.len()];
        let mut dist_sum = vec![F::zero(); self.classes.len()];
        for (d, i) in nn {
            let c = self
                .classes
                .binary_search(&self.labels[i])
                .expect("training label in class list");
            votes[c] += 1;
            dist_sum[c] = dist_sum[c] + d;
        }
        let mut best = 0;
        for c in 1..self.classes.len() {
            if votes[c] > votes[best] || (votes[c] == votes[best] && dist_sum[c] < dist_sum[best]) {
                best = c;
            }
        }
        Ok(self.classes[best])
    }

    pub fn predict(&self, m: &FeatureMatrix<F>) -> Result<Vec<usize>> {
        (0..m.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(m.row(i)))
            .collect()
    }
}
