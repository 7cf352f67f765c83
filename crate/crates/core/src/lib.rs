//! Surface-EMG hand-gesture recognition.
//!
//! Pipeline: parse 8-channel recordings ([`dataset`]), cut them into
//! label-pure windows ([`preprocess`]), compute 20 statistics per channel
//! ([`features`]), rank features with extra-trees importances
//! ([`selection`]), fit one of five classifiers ([`model`]) and score it with
//! stratified cross-validation ([`evaluation`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pin the common choice.

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod matrix;
pub mod model;
pub mod preprocess;
pub mod scalar;
pub mod selection;
pub mod synth;
pub mod trees;

use sha2::{Digest, Sha256};

pub use dataset::{GestureLabel, LabelPolicy, Recording, N_CHANNELS};
pub use error::{EmgError, Result};
pub use evaluation::{evaluate_pipeline, EvalConfig, EvaluationReport, FeatureMode, SplitMode};
pub use features::{ChannelMode, FeatureConfig};
pub use matrix::FeatureMatrix;
pub use model::{fit_model, ModelDump, ModelKind, ModelSpec, TrainedModel};
pub use scalar::Scalar;
pub use selection::{FeatureSubset, ImportanceRanking};
pub use trees::{Forest, ForestKind, MaxFeatures, TreeParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type FeatureMatrix32 = FeatureMatrix<f32>;
pub type Forest64 = Forest<f64>;
pub type Forest32 = Forest<f32>;
pub type KnnModel64 = classifiers::KnnModel<f64>;
pub type GnbModel64 = classifiers::GnbModel<f64>;
pub type TrainedModel64 = TrainedModel<f64>;
pub type TrainedModel32 = TrainedModel<f32>;

/// Lowercase hex SHA-256 of `bytes`; used for config hashes in artifacts.
pub fn sha256_hex(bytes: &[u8]) -> String {
    dataset::hex_string(&Sha256::digest(bytes))
}
