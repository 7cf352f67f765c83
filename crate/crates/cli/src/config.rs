//! Run configuration: a TOML file with CLI-flag overrides.
//!
//! ```toml
//! seed = 42
//!
//! [data]
//! root = "data/EMG_data_for_gestures-master"   # or: features = "features.csv"
//! unmark_unknown_labels = false
//!
//! [windowing]
//! window_len = 200     # 0 = one window per gesture segment
//! stride = 100
//!
//! [features]
//! channel_mean = false
//! percent = 50.0
//!
//! [model]
//! kind = "knn"         # knn | gaussian_nb | decision_tree | random_forest | extra_trees
//! k = 5
//! standardize = true
//! tune_k = false
//! n_trees = 100
//! min_samples_split = 2
//! max_features = "sqrt" # "sqrt" | "all" | { count = N }
//!
//! [evaluation]
//! feature_mode = "selected"   # selected | all
//! top_k = 10
//! folds = 5
//! split = "stratified"        # stratified | subject_wise
//! selection_trees = 100
//!
//! [output]
//! report = "report.json"
//! confusion_csv = "confusion.csv"
//! markdown = "report.md"
//! ```
//!
//! The config hash covers every section except `[output]`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use emgkit_core::evaluation::{EvalConfig, DEFAULT_FOLDS, DEFAULT_SEED};
use emgkit_core::features::DEFAULT_PERCENT;
use emgkit_core::model::ModelSpec;
use emgkit_core::preprocess::{DEFAULT_STRIDE, DEFAULT_WINDOW_LEN};
use emgkit_core::selection::DEFAULT_TOP_K;
use emgkit_core::{ChannelMode, FeatureConfig, FeatureMode, MaxFeatures, ModelKind, SplitMode, TreeParams};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub root: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub unmark_unknown_labels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingSection {
    pub window_len: usize,
    pub stride: usize,
}

impl Default for WindowingSection {
    fn default() -> Self {
        WindowingSection {
            window_len: DEFAULT_WINDOW_LEN,
            stride: DEFAULT_STRIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub channel_mean: bool,
    pub percent: f64,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            channel_mean: false,
            percent: DEFAULT_PERCENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub k: usize,
    pub standardize: bool,
    pub tune_k: bool,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for ModelSection {
    fn default() -> Self {
        let spec = ModelSpec::default();
        ModelSection {
            kind: spec.kind,
            k: spec.knn.k,
            standardize: spec.knn.standardize,
            tune_k: spec.tune_k,
            n_trees: spec.trees.n_trees,
            max_depth: spec.trees.max_depth,
            min_samples_split: spec.trees.min_samples_split,
            max_features: spec.trees.max_features,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FeatureModeName {
    All,
    Selected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub feature_mode: FeatureModeName,
    pub top_k: usize,
    pub folds: usize,
    pub split: SplitMode,
    pub selection_trees: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            feature_mode: FeatureModeName::Selected,
            top_k: DEFAULT_TOP_K,
            folds: DEFAULT_FOLDS,
            split: SplitMode::Stratified,
            selection_trees: TreeParams::default().n_trees,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
    pub confusion_csv: Option<PathBuf>,
    pub markdown: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub data: DataSection,
    pub windowing: WindowingSection,
    pub features: FeaturesSection,
    pub model: ModelSection,
    pub evaluation: EvaluationSection,
    pub output: OutputSection,
}

/// The hashed part of a config: everything that can change a result.
#[derive(Serialize)]
struct HashedView<'a> {
    seed: u64,
    data: &'a DataSection,
    windowing: &'a WindowingSection,
    features: &'a FeaturesSection,
    model: &'a ModelSection,
    evaluation: &'a EvaluationSection,
}

impl RunConfig {
    /// Parses a config file. Relative paths inside it resolve against the
    /// file's directory. The file must set `seed`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(|e| UsageError(format!("{e:#}")))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        if cfg.seed.is_none() {
            return Err(UsageError(format!("config {} must set `seed`", path.display())).into());
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.data.root);
        rebase(&mut cfg.data.features);
        rebase(&mut cfg.output.report);
        rebase(&mut cfg.output.confusion_csv);
        rebase(&mut cfg.output.markdown);
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn hash(&self) -> String {
        let view = HashedView {
            seed: self.seed(),
            data: &self.data,
            windowing: &self.windowing,
            features: &self.features,
            model: &self.model,
            evaluation: &self.evaluation,
        };
        emgkit_core::sha256_hex(&serde_json::to_vec(&view).expect("config serializes"))
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            percent: self.features.percent,
            channel_mode: if self.features.channel_mean {
                ChannelMode::ChannelMean
            } else {
                ChannelMode::PerChannel
            },
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            n_trees: self.model.n_trees,
            max_depth: self.model.max_depth,
            min_samples_split: self.model.min_samples_split,
            max_features: self.model.max_features,
        }
    }

    pub fn selection_trees(&self) -> TreeParams {
        TreeParams {
            n_trees: self.evaluation.selection_trees,
            ..TreeParams::default()
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::new(self.model.kind);
        spec.knn.k = self.model.k;
        spec.knn.standardize = self.model.standardize;
        spec.tune_k = self.model.tune_k;
        spec.trees = self.tree_params();
        spec
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            model: self.model_spec(),
            feature_mode: match self.evaluation.feature_mode {
                FeatureModeName::All => FeatureMode::All,
                FeatureModeName::Selected => FeatureMode::Selected { k: self.evaluation.top_k },
            },
            folds: self.evaluation.folds,
            seed: self.seed(),
            split: self.evaluation.split,
            selection_trees: self.selection_trees(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| -> Result<()> { Err(UsageError(m).into()) };
        if self.model.k == 0 {
            return bad("model.k must be at least 1".into());
        }
        if self.model.n_trees == 0 || self.evaluation.selection_trees == 0 {
            return bad("tree counts must be at least 1".into());
        }
        if self.evaluation.folds < 2 {
            return bad("evaluation.folds must be at least 2".into());
        }
        if self.evaluation.top_k == 0 {
            return bad("evaluation.top_k must be at least 1".into());
        }
        if !(self.features.percent > 0.0 && self.features.percent < 100.0) {
            return bad(format!("features.percent {} outside (0, 100)", self.features.percent));
        }
        if self.windowing.stride == 0 || self.windowing.window_len == 1 {
            return bad("windowing needs stride >= 1 and window_len 0 or >= 2".into());
        }
        if self.data.root.is_some() && self.data.features.is_some() {
            return bad("set only one of data.root and data.features".into());
        }
        Ok(())
    }
}
