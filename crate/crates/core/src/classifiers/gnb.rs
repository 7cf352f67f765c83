//! Gaussian naive Bayes in the log domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EmgError, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

/// Variance floor relative to the mean per-feature variance of the training set.
pub const VAR_FLOOR_RELATIVE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel<F> {
    pub feature_names: Vec<String>,
    pub classes: Vec<usize>,
    pub priors: Vec<F>,
    /// `means[c][j]`, `vars[c][j]` for class index `c`, feature `j`.
    pub means: Vec<Vec<F>>,
    pub vars: Vec<Vec<F>>,
    pub var_floor: F,
}

pub fn fit_gnb<F: Scalar>(train: &FeatureMatrix<F>) -> Result<GnbModel<F>> {
    fit_gnb_with_classes(train, &train.classes())
}

/// Fits with an explicit class list; every listed class needs a sample.
pub fn fit_gnb_with_classes<F: Scalar>(train: &FeatureMatrix<F>, classes: &[usize]) -> Result<GnbModel<F>> {
    if train.n_rows() == 0 {
        return Err(EmgError::EmptyTraining);
    }
    let d = train.n_cols();
    let n = F::from_usize_lossy(train.n_rows());

    let mut overall_var = F::zero();
    for j in 0..d {
        let mu = train.rows().map(|r| r[j]).sum::<F>() / n;
        overall_var = overall_var + train.rows().map(|r| (r[j] - mu) * (r[j] - mu)).sum::<F>() / n;
    }
    let mean_var = if d > 0 { overall_var / F::from_usize_lossy(d) } else { F::zero() };
    let rel = F::from_f64_lossy(VAR_FLOOR_RELATIVE);
    let var_floor = if mean_var > F::zero() { rel * mean_var } else { rel };

    let mut priors = Vec::with_capacity(classes.len());
    let mut means = Vec::with_capacity(classes.len());
    let mut vars = Vec::with_capacity(classes.len());
    for &c in classes {
        let idx: Vec<usize> = (0..train.n_rows()).filter(|&i| train.labels()[i] == c).collect();
        if idx.is_empty() {
            return Err(EmgError::EmptyClass(c));
        }
        let nc = F::from_usize_lossy(idx.len());
        priors.push(nc / n);
        let mu: Vec<F> = (0..d).map(|j| idx.iter().map(|&i| train.get(i, j)).sum::<F>() / nc).collect();
        let var: Vec<F> = (0..d)
            .map(|j| {
                let v = idx.iter().map(|&i| (train.get(i, j) - mu[j]).powi(2)).sum::<F>() / nc;
                v.max(var_floor)
            })
            .collect();
        means.push(mu);
        vars.push(var);
    }
    Ok(GnbModel {
        feature_names: train.names().to_vec(),
        classes: classes.to_vec(),
        priors,
        means,
        vars,
        var_floor,
    })
}

impl<F: Scalar> GnbModel<F> {
    /// `log P(c) + sum_j log N(x_j; mean, var)` per class. Each per-feature
    /// term saturates so the sum stays finite for finite inputs.
    pub fn log_joint(&self, row: &[F]) -> Result<Vec<F>> {
        let d = self.feature_names.len();
        if row.len() != d {
            return Err(EmgError::WidthMismatch { expected: d, got: row.len() });
        }
        let half = F::from_f64_lossy(0.5);
        let log_2pi = F::from_f64_lossy((2.0 * std::f64::consts::PI).ln());
        let floor = -F::max_value() / F::from_usize_lossy(2 * (d + 1));
        Ok((0..self.classes.len())
            .map(|c| {
                let mut acc = self.priors[c].ln().max(floor);
                for ((&x, &mu), &var) in row.iter().zip(&self.means[c]).zip(&self.vars[c]) {
                    let z = (x - mu) / var.sqrt();
                    let term = -half * (log_2pi + var.ln()) - half * z * z;
                    acc = acc + if term.is_finite() { term.max(floor) } else { floor };
                }
                acc
            })
            .collect())
    }

    /// Argmax of [`log_joint`](Self::log_joint); ties go to the smaller code.
    pub fn predict_row(&self, row: &[F]) -> Result<usize> {
        let lj = self.log_joint(row)?;
        let mut best = 0;
        for c in 1..lj.len() {
            if lj[c] > lj[best] {
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
