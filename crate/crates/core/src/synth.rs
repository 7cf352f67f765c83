//! Seeded synthetic feature matrices for dataset-free testing.
//!
//! Generator (so tests can reproduce it independently):
//!
//! 1. `rng = ChaCha8Rng::seed_from_u64(seed)`.
//! 2. Per feature `j`, a scale `s_j = 10^u` with `u ~ U[-2, 2)` (drawn in column order).
//! 3. Rows are emitted class-major, labels `1..=classes`. Class `c` (0-based)
//!    has mean `separation` on axis `c % n_features` and 0 elsewhere; each
//!    value is `s_j * (mean_j + z)` with `z ~ N(0, 1)` drawn row by row, column
//!    by column.
//!
//! Features are therefore axis-aligned independent Gaussians per class, and any
//! two class means are `separation * sqrt(2)` standard deviations apart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EmgError, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub classes: usize,
    pub per_class: usize,
    /// Distance of each class mean from the origin, in noise standard deviations.
    pub separation: f64,
    pub n_features: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            classes: 6,
            per_class: 200,
            separation: 6.0,
            n_features: 10,
        }
    }
}

pub fn generate_synthetic<F: Scalar>(p: &SynthParams, seed: u64) -> Result<FeatureMatrix<F>> {
    if p.classes < 2 {
        return Err(EmgError::InvalidParams("classes must be at least 2".into()));
    }
    if p.per_class < 10 {
        return Err(EmgError::InvalidParams("per_class must be at least 10".into()));
    }
    if p.n_features < p.classes {
        return Err(EmgError::InvalidParams(
            "n_features must be at least the number of classes".into(),
        ));
    }
    if !p.separation.is_finite() || p.separation < 0.0 {
        return Err(EmgError::InvalidParams("separation must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..p.n_features)
        .map(|_| 10f64.powf(rng.random_range(-2.0..2.0)))
        .collect();
    let mut data = Vec::with_capacity(p.classes * p.per_class * p.n_features);
    let mut labels = Vec::with_capacity(p.classes * p.per_class);
    for c in 0..p.classes {
        for _ in 0..p.per_class {
            for (j, s) in scales.iter().enumerate() {
                let mean = if j == c % p.n_features { p.separation } else { 0.0 };
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(F::from_f64_lossy(s * (mean + z)));
            }
            labels.push(c + 1);
        }
    }
    let names = (0..p.n_features).map(|j| format!("syn{j}")).collect();
    FeatureMatrix::from_flat(names, data, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let p = SynthParams { classes: 6, per_class: 200, ..Default::default() };
        let a = generate_synthetic::<f64>(&p, 7).unwrap();
        assert_eq!((a.n_rows(), a.n_cols()), (1200, 10));
        assert_eq!(a.classes(), vec![1, 2, 3, 4, 5, 6]);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv(&mut x).unwrap();
        generate_synthetic::<f64>(&p, 7).unwrap().write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        assert_ne!(a, generate_synthetic::<f64>(&p, 8).unwrap());
    }

    #[test]
    fn invalid_params() {
        for p in [
            SynthParams { classes: 1, ..Default::default() },
            SynthParams { per_class: 9, ..Default::default() },
            SynthParams { n_features: 3, ..Default::default() },
            SynthParams { separation: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(generate_synthetic::<f64>(&p, 0), Err(EmgError::InvalidParams(_))));
        }
    }

    #[test]
    fn class_means_follow_the_generator() {
        let p = SynthParams { classes: 2, per_class: 2000, n_features: 2, separation: 4.0 };
        let m = generate_synthetic::<f64>(&p, 1).unwrap();
        // class 1 sits on axis 0; scale-free check via ratio to the spread
        let col0: Vec<f64> = (0..2000).map(|i| m.get(i, 0)).collect();
        let mean = col0.iter().sum::<f64>() / 2000.0;
        let sd = (col0.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1999.0).sqrt();
        assert!((mean / sd - 4.0).abs() < 0.15, "{}", mean / sd);
    }
}
