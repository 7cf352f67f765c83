//! Per-channel feature bank: morphological, time-domain and energy features.
//!
//! Every window channel yields the 20 columns listed in [`FEATURE_NAMES`], in
//! that order. Columns are named `ch{c}_{feature}` and concatenated
//! channel-major, giving 160 columns for an 8-channel window. The order is
//! part of the on-disk schema (see `FEATURES.md`) and must not change without
//! bumping [`SCHEMA_VERSION`].

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{GestureLabel, N_CHANNELS};
use crate::error::{EmgError, Result};
use crate::matrix::FeatureMatrix;
use crate::preprocess::Window;
use crate::scalar::{cmp_scalar, Scalar};

pub const SCHEMA_VERSION: u32 = 1;

pub const FEATURE_NAMES: [&str; 20] = [
    "mav",
    "min",
    "max",
    "ptp",
    "mean",
    "median",
    "var_s",
    "var_p",
    "mad",
    "std_s",
    "std_p",
    "percentile",
    "q1",
    "iqr",
    "skewness",
    "kurtosis",
    "energy",
    "power",
    "rms",
    "hjorth_activity",
];

pub const FEATURES_PER_CHANNEL: usize = FEATURE_NAMES.len();

/// Relative threshold on `m2 / mean(x^2)` below which a series counts as
/// constant for skewness and kurtosis.
pub const CONSTANT_RELATIVE_EPS: f64 = 1e-12;

pub const DEFAULT_PERCENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// One feature block per channel (160 columns).
    #[default]
    PerChannel,
    /// Each feature averaged over the 8 channels (20 columns).
    ChannelMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub percent: f64,
    pub channel_mode: ChannelMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            percent: DEFAULT_PERCENT,
            channel_mode: ChannelMode::PerChannel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeFeatures<F> {
    pub mav: F,
    pub min: F,
    pub max: F,
    pub ptp: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionFeatures<F> {
    pub mean: F,
    pub median: F,
    pub var_s: F,
    pub var_p: F,
    pub mad: F,
    pub std_s: F,
    pub std_p: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStatistics<F> {
    pub percentile: F,
    pub q1: F,
    pub q3: F,
    pub iqr: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures<F> {
    pub skewness: F,
    pub kurtosis: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEnergyFeatures<F> {
    pub energy: F,
    pub power: F,
    pub rms: F,
    pub hjorth_activity: F,
}

/// Compensated (Neumaier) summation.
fn sum<F: Scalar>(values: impl Iterator<Item = F>) -> F {
    let mut total = F::zero();
    let mut comp = F::zero();
    for v in values {
        let t = total + v;
        if total.abs() >= v.abs() {
            comp = comp + ((total - t) + v);
        } else {
            comp = comp + ((v - t) + total);
        }
        total = t;
    }
    total + comp
}

fn require_len<F>(x: &[F], needed: usize) -> Result<()> {
    match x.len() {
        0 if needed <= 1 => Err(EmgError::EmptySeries),
        n if n < needed => Err(EmgError::SeriesTooShort { needed, got: n }),
        _ => Ok(()),
    }
}

fn mean<F: Scalar>(x: &[F]) -> F {
    sum(x.iter().copied()) / F::from_usize_lossy(x.len())
}

pub fn amplitude_features<F: Scalar>(x: &[F]) -> Result<AmplitudeFeatures<F>> {
    require_len(x, 1)?;
    let (min, max) = x
        .iter()
        .fold((x[0], x[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(AmplitudeFeatures {
        mav: mean(&x.iter().map(|v| v.abs()).collect::<Vec<_>>()),
        min,
        max,
        ptp: max - min,
    })
}

/// `(1/n) * sum((x_i - mean)^k)`.
pub fn central_moment<F: Scalar>(x: &[F], k: i32) -> Result<F> {
    require_len(x, 1)?;
    let mu = mean(x);
    Ok(sum(x.iter().map(|&v| (v - mu).powi(k))) / F::from_usize_lossy(x.len()))
}

fn sorted<F: Scalar>(x: &[F]) -> Vec<F> {
    let mut s = x.to_vec();
    s.sort_by(cmp_scalar);
    s
}

fn median_sorted<F: Scalar>(s: &[F]) -> F {
    let n = s.len();
    let two = F::one() + F::one();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / two
    }
}

pub fn dispersion_features<F: Scalar>(x: &[F]) -> Result<DispersionFeatures<F>> {
    require_len(x, 2)?;
    let n = F::from_usize_lossy(x.len());
    let mu = mean(x);
    let ss = sum(x.iter().map(|&v| (v - mu) * (v - mu)));
    let var_s = ss / (n - F::one());
    let var_p = ss / n;
    Ok(DispersionFeatures {
        mean: mu,
        median: median_sorted(&sorted(x)),
        var_s,
        var_p,
        mad: sum(x.iter().map(|&v| (v - mu).abs())) / n,
        std_s: var_s.sqrt(),
        std_p: var_p.sqrt(),
    })
}

/// Value at 1-based fractional rank `rank` of sorted data, linearly
/// interpolated and clamped to `[1, n]`.
fn at_rank<F: Scalar>(s: &[F], rank: f64) -> F {
    let n = s.len();
    let r = rank.clamp(1.0, n as f64);
    let lower = r.floor() as usize;
    let frac = F::from_f64_lossy(r - lower as f64);
    if lower >= n {
        return s[n - 1];
    }
    let a = s[lower - 1];
    a + frac * (s[lower] - a)
}

/// Percentile at rank `p(n+1)/100`, quartiles at ranks `(n+1)/4` and `3(n+1)/4`.
pub fn order_statistics<F: Scalar>(x: &[F], percent: f64) -> Result<OrderStatistics<F>> {
    require_len(x, 2)?;
    if !(percent > 0.0 && percent < 100.0) {
        return Err(EmgError::InvalidPercent(percent));
    }
    let s = sorted(x);
    let np1 = (s.len() + 1) as f64;
    let q1 = at_rank(&s, np1 / 4.0);
    let q3 = at_rank(&s, 3.0 * np1 / 4.0);
    Ok(OrderStatistics {
        percentile: at_rank(&s, percent * np1 / 100.0),
        q1,
        q3,
        iqr: q3 - q1,
    })
}

pub fn shape_features<F: Scalar>(x: &[F]) -> Result<ShapeFeatures<F>> {
    require_len(x, 2)?;
    let m2 = central_moment(x, 2)?;
    let mean_sq = sum(x.iter().map(|&v| v * v)) / F::from_usize_lossy(x.len());
    if m2 <= F::from_f64_lossy(CONSTANT_RELATIVE_EPS) * mean_sq {
        return Ok(ShapeFeatures {
            skewness: F::zero(),
            kurtosis: F::zero(),
        });
    }
    let m3 = central_moment(x, 3)?;
    let m4 = central_moment(x, 4)?;
    Ok(ShapeFeatures {
        skewness: m3 / m2.powf(F::from_f64_lossy(1.5)),
        kurtosis: m4 / (m2 * m2),
    })
}

pub fn spectral_energy_features<F: Scalar>(x: &[F]) -> Result<SpectralEnergyFeatures<F>> {
    require_len(x, 1)?;
    let n = F::from_usize_lossy(x.len());
    let energy = sum(x.iter().map(|&v| v * v));
    let power = energy / n;
    let mu = mean(x);
    Ok(SpectralEnergyFeatures {
        energy,
        power,
        rms: power.sqrt(),
        hjorth_activity: sum(x.iter().map(|&v| (v - mu) * (v - mu))) / n,
    })
}

/// The 20 per-channel features in [`FEATURE_NAMES`] order.
pub fn channel_features<F: Scalar>(x: &[F], percent: f64) -> Result<[F; FEATURES_PER_CHANNEL]> {
    let a = amplitude_features(x)?;
    let d = dispersion_features(x)?;
    let o = order_statistics(x, percent)?;
    let s = shape_features(x)?;
    let e = spectral_energy_features(x)?;
    Ok([
        a.mav,
        a.min,
        a.max,
        a.ptp,
        d.mean,
        d.median,
        d.var_s,
        d.var_p,
        d.mad,
        d.std_s,
        d.std_p,
        o.percentile,
        o.q1,
        o.iqr,
        s.skewness,
        s.kurtosis,
        e.energy,
        e.power,
        e.rms,
        e.hjorth_activity,
    ])
}

pub fn feature_names(mode: ChannelMode) -> Vec<String> {
    match mode {
        ChannelMode::PerChannel => (0..N_CHANNELS)
            .flat_map(|c| FEATURE_NAMES.iter().map(move |f| format!("ch{c}_{f}")))
            .collect(),
        ChannelMode::ChannelMean => FEATURE_NAMES.iter().map(|f| format!("chmean_{f}")).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<F> {
    pub values: Vec<F>,
    pub names: Arc<Vec<String>>,
    pub label: GestureLabel,
}

fn extract_with_names<F: Scalar>(
    w: &Window,
    cfg: &FeatureConfig,
    names: Arc<Vec<String>>,
) -> Result<FeatureVector<F>> {
    let mut per_channel = Vec::with_capacity(N_CHANNELS);
    for (c, ch) in w.channels.iter().enumerate() {
        let x: Vec<F> = ch.iter().map(|&v| F::from_f64_lossy(v)).collect();
        let feats = channel_features(&x, cfg.percent).map_err(|e| EmgError::InChannel {
            channel: c,
            offset: w.offset,
            source: Box::new(e),
        })?;
        per_channel.push(feats);
    }
    let values = match cfg.channel_mode {
        ChannelMode::PerChannel => per_channel.into_iter().flatten().collect(),
        ChannelMode::ChannelMean => {
            let n = F::from_usize_lossy(N_CHANNELS);
            (0..FEATURES_PER_CHANNEL)
                .map(|j| sum(per_channel.iter().map(|f| f[j])) / n)
                .collect()
        }
    };
    Ok(FeatureVector {
        values,
        names,
        label: w.label,
    })
}

pub fn extract_features<F: Scalar>(w: &Window, cfg: &FeatureConfig) -> Result<FeatureVector<F>> {
    extract_with_names(w, cfg, Arc::new(feature_names(cfg.channel_mode)))
}

/// One row per window, in input order; subject ids become the row groups.
pub fn build_feature_matrix<F: Scalar>(
    windows: &[Window],
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix<F>> {
    if windows.is_empty() {
        return Err(EmgError::EmptyInput);
    }
    let names = Arc::new(feature_names(cfg.channel_mode));
    let rows = windows
        .par_iter()
        .map(|w| extract_with_names::<F>(w, cfg, Arc::clone(&names)).map(|v| v.values))
        .collect::<Result<Vec<_>>>()?;
    let labels = windows.iter().map(|w| w.label.code() as usize).collect();
    let groups = windows.iter().map(|w| w.subject_id).collect();
    FeatureMatrix::from_rows(names.as_ref().clone(), rows, labels)?.with_groups(groups)
}
