//! Distance-based and probabilistic classifiers that complement the tree
//! ensembles.

pub mod gnb;
pub mod knn;

pub use gnb::{fit_gnb, GnbModel};
pub use knn::{fit_knn, KnnModel, KnnParams};
