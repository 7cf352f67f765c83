//! Uniform front over the five classifiers plus the versioned JSON dump.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::gnb::{fit_gnb, GnbModel};
use crate::classifiers::knn::{fit_knn, KnnModel, KnnParams};
use crate::error::{EmgError, Result};
use crate::evaluation::stratified_kfold;
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;
use crate::trees::{fit_decision_tree, fit_extra_trees, fit_random_forest, Forest, TreeParams, MODEL_FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    GaussianNb,
    DecisionTree,
    RandomForest,
    ExtraTrees,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::RandomForest,
        ModelKind::ExtraTrees,
        ModelKind::GaussianNb,
        ModelKind::DecisionTree,
        ModelKind::Knn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::GaussianNb => "gaussian_nb",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::ExtraTrees => "extra_trees",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Knn => "KNN",
            ModelKind::GaussianNb => "Gaussian NB",
            ModelKind::DecisionTree => "Decision Tree",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::ExtraTrees => "Extra Tree",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = EmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ModelKind::Knn),
            "gaussian_nb" | "gnb" => Ok(ModelKind::GaussianNb),
            "decision_tree" | "dt" => Ok(ModelKind::DecisionTree),
            "random_forest" | "rf" => Ok(ModelKind::RandomForest),
            "extra_trees" | "et" => Ok(ModelKind::ExtraTrees),
            other => Err(EmgError::InvalidParams(format!("unknown model {other:?}"))),
        }
    }
}

pub const TUNE_K_GRID: [usize; 8] = [1, 3, 5, 7, 9, 11, 13, 15];
const TUNE_K_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub knn: KnnParams,
    /// Grid-search odd k in 1..=15 by inner 3-fold CV on the training data.
    pub tune_k: bool,
    pub trees: TreeParams,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Knn,
            knn: KnnParams::default(),
            tune_k: false,
            trees: TreeParams::default(),
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec { kind, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel<F> {
    Knn(KnnModel<F>),
    GaussianNb(GnbModel<F>),
    Forest(Forest<F>),
}

impl<F: Scalar> TrainedModel<F> {
    pub fn predict(&self, m: &FeatureMatrix<F>) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Knn(k) => k.predict(m),
            TrainedModel::GaussianNb(g) => g.predict(m),
            TrainedModel::Forest(f) => f.predict(m),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedModel::Knn(k) => &k.feature_names,
            TrainedModel::GaussianNb(g) => &g.feature_names,
            TrainedModel::Forest(f) => &f.feature_names,
        }
    }
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64
}

/// Picks k from [`TUNE_K_GRID`] by inner stratified CV; ties go to the smaller
/// k. Falls back to `fallback` when the data cannot be split.
pub fn tune_k<F: Scalar>(train: &FeatureMatrix<F>, standardize: bool, seed: u64, fallback: usize) -> Result<usize> {
    let Ok(folds) = stratified_kfold(train, TUNE_K_FOLDS, seed) else {
        log::warn!("tune-k: too few samples per class for inner CV, keeping k={fallback}");
        return Ok(fallback);
    };
    let mut best = (fallback, -1.0);
    for &k in &TUNE_K_GRID {
        let mut correct = 0.0;
        let mut total = 0usize;
        let mut feasible = true;
        for (tr, te) in &folds {
            if k > tr.len() {
                feasible = false;
                break;
            }
            let model = fit_knn(&train.take_rows(tr), &KnnParams { k, standardize })?;
            let test = train.take_rows(te);
            correct += accuracy(&model.predict(&test)?, test.labels()) * te.len() as f64;
            total += te.len();
        }
        if !feasible {
            break;
        }
        let acc = correct / total as f64;
        if acc > best.1 {
            best = (k, acc);
        }
    }
    Ok(best.0)
}

pub fn fit_model<F: Scalar>(spec: &ModelSpec, train: &FeatureMatrix<F>, seed: u64) -> Result<TrainedModel<F>> {
    train.check_trainable()?;
    Ok(match spec.kind {
        ModelKind::Knn => {
            let k = if spec.tune_k {
                tune_k(train, spec.knn.standardize, seed, spec.knn.k)?
            } else {
                spec.knn.k
            };
            TrainedModel::Knn(fit_knn(train, &KnnParams { k, ..spec.knn })?)
        }
        ModelKind::GaussianNb => TrainedModel::GaussianNb(fit_gnb(train)?),
        ModelKind::DecisionTree => TrainedModel::Forest(fit_decision_tree(train, &spec.trees)?),
        ModelKind::RandomForest => TrainedModel::Forest(fit_random_forest(train, &spec.trees, seed)?),
        ModelKind::ExtraTrees => TrainedModel::Forest(fit_extra_trees(train, &spec.trees, seed)?),
    })
}

/// Versioned envelope written by `emgkit train --dump`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump<F> {
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub kind: ModelKind,
    pub body: TrainedModel<F>,
}

impl<F: Scalar> ModelDump<F> {
    pub fn new(kind: ModelKind, body: TrainedModel<F>, seed: u64, config_hash: String) -> Self {
        ModelDump {
            format_version: MODEL_FORMAT_VERSION,
            tool_version: crate::VERSION.to_string(),
            config_hash,
            seed,
            kind,
            body,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        de.disable_recursion_limit();
        let d = ModelDump::deserialize(&mut de)?;
        de.end()?;
        if d.format_version != MODEL_FORMAT_VERSION {
            return Err(EmgError::InvalidParams(format!(
                "unsupported model format version {}",
                d.format_version
            )));
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SynthParams};

    #[test]
    fn names_parse_both_ways() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn every_model_dumps_and_reloads() {
        let m = generate_synthetic::<f64>(&SynthParams { classes: 3, per_class: 20, ..Default::default() }, 4).unwrap();
        for kind in ModelKind::ALL {
            let spec = ModelSpec {
                trees: TreeParams { n_trees: 5, ..Default::default() },
                ..ModelSpec::new(kind)
            };
            let body = fit_model(&spec, &m, 1).unwrap();
            let dump = ModelDump::new(kind, body, 1, "abc".into());
            let back = ModelDump::<f64>::from_json(&dump.to_json().unwrap()).unwrap();
            assert_eq!(back, dump);
            assert_eq!(back.body.predict(&m).unwrap(), dump.body.predict(&m).unwrap());
        }
    }

    #[test]
    fn tuned_k_is_from_the_grid() {
        let m = generate_synthetic::<f64>(&SynthParams { classes: 2, per_class: 30, separation: 2.0, ..Default::default() }, 9).unwrap();
        let k = tune_k(&m, true, 0, 5).unwrap();
        assert!(TUNE_K_GRID.contains(&k));
        let tiny = m.take_rows(&[0, 1, 30, 31]);
        assert_eq!(tune_k(&tiny, true, 0, 5).unwrap(), 5);
    }
}
