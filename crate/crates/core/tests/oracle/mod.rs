//! Naive reference implementations of the per-channel features. Plain loops
//! and left-to-right summation, written without reference to the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const NAMES: [&str; 20] = [
    "mav", "min", "max", "ptp", "mean", "median", "var_s", "var_p", "mad", "std_s", "std_p", "percentile", "q1",
    "iqr", "skewness", "kurtosis", "energy", "power", "rms", "hjorth_activity",
];

fn naive_sum(v: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s
}

fn interp(sorted: &[f64], rank: f64) -> f64 {
    let n = sorted.len() as f64;
    if rank <= 1.0 {
        return sorted[0];
    }
    if rank >= n {
        return sorted[sorted.len() - 1];
    }
    let lo = rank.floor();
    let i = lo as usize;
    sorted[i - 1] + (rank - lo) * (sorted[i] - sorted[i - 1])
}

/// All 20 features of `x` in schema order.
pub fn features(x: &[f64], percent: f64) -> [f64; 20] {
    let n = x.len() as f64;
    let mean = naive_sum(x.iter().copied()) / n;
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = s.len();
    let median = if m % 2 == 1 { s[m / 2] } else { 0.5 * (s[m / 2 - 1] + s[m / 2]) };
    let ss = naive_sum(x.iter().map(|v| (v - mean) * (v - mean)));
    let var_s = ss / (n - 1.0);
    let var_p = ss / n;
    let q1 = interp(&s, (n + 1.0) * 0.25);
    let q3 = interp(&s, (n + 1.0) * 0.75);
    let m2 = var_p;
    let m3 = naive_sum(x.iter().map(|v| (v - mean).powi(3))) / n;
    let m4 = naive_sum(x.iter().map(|v| (v - mean).powi(4))) / n;
    let energy = naive_sum(x.iter().map(|v| v * v));
    let (skew, kurt) = if m2 <= 1e-12 * energy / n { (0.0, 0.0) } else { (m3 / m2.powf(1.5), m4 / (m2 * m2)) };
    [
        naive_sum(x.iter().map(|v| v.abs())) / n,
        s[0],
        s[m - 1],
        s[m - 1] - s[0],
        mean,
        median,
        var_s,
        var_p,
        naive_sum(x.iter().map(|v| (v - mean).abs())) / n,
        var_s.sqrt(),
        var_p.sqrt(),
        interp(&s, percent * (n + 1.0) / 100.0),
        q1,
        q3 - q1,
        skew,
        kurt,
        energy,
        energy / n,
        (energy / n).sqrt(),
        var_p,
    ]
}

/// Magnitude each feature is measured against: `max|x|^p` for a feature of
/// degree `p` in `x`, 1 for the scale-free ones.
pub fn reference_scale(x: &[f64], feature: usize) -> f64 {
    let a = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    match NAMES[feature] {
        "skewness" | "kurtosis" => 1.0,
        "var_s" | "var_p" | "power" | "hjorth_activity" => a * a,
        "energy" => a * a * x.len() as f64,
        _ => a,
    }
}

/// `|got - want| <= rel * max(|want|, scale)`.
pub fn close(got: f64, want: f64, scale: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(scale)
}

/// Mixed random series: Gaussian, uniform, heavy-tailed and quantized (tied
/// values) draws at scales from 1e-3 to 1e3 with offsets up to five scales.
pub fn random_series(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(2..=400);
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let offset = rng.random_range(-5.0..5.0) * scale;
    let kind = rng.random_range(0..4);
    (0..n)
        .map(|_| {
            let z: f64 = match kind {
                0 => StandardNormal.sample(rng),
                1 => rng.random_range(-1.0..1.0),
                2 => {
                    let g: f64 = StandardNormal.sample(rng);
                    g * g * g
                }
                _ => (rng.random_range(-4.0f64..4.0)).round(),
            };
            offset + scale * z
        })
        .collect()
}

pub fn series_batch(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_series(&mut rng)).collect()
}
