mod oracle;

use emgkit_core::dataset::N_CHANNELS;
use emgkit_core::features::{channel_features, extract_features, feature_names, ChannelMode, FeatureConfig, FEATURE_NAMES};
use emgkit_core::preprocess::Window;
use emgkit_core::GestureLabel;
use proptest::prelude::*;

#[test]
fn oracle_names_match_schema() {
    assert_eq!(FEATURE_NAMES, oracle::NAMES);
}

#[test]
fn thousand_series_match_naive_oracle() {
    for (i, x) in oracle::series_batch(2024, 1000).iter().enumerate() {
        let got = channel_features(x, 50.0).unwrap();
        let want = oracle::features(x, 50.0);
        for f in 0..20 {
            assert!(
                oracle::close(got[f], want[f], oracle::reference_scale(x, f), 1e-9),
                "series {i} (n={}) {}: got {} want {}",
                x.len(),
                FEATURE_NAMES[f],
                got[f],
                want[f]
            );
        }
    }
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1e3f64..1e3, 2..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_oracle_at_any_percent(x in series(), p in 0.5f64..99.5) {
        let got = channel_features(&x, p).unwrap();
        let want = oracle::features(&x, p);
        for f in 0..20 {
            prop_assert!(oracle::close(got[f], want[f], oracle::reference_scale(&x, f), 1e-9), "{}: {} vs {}", FEATURE_NAMES[f], got[f], want[f]);
        }
    }

    #[test]
    fn shift_law(x in series(), c in -500.0f64..500.0) {
        let base = channel_features(&x, 50.0).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v + c).collect();
        let shifted = channel_features(&y, 50.0).unwrap();
        let a = x.iter().chain(&y).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for (f, name) in FEATURE_NAMES.iter().enumerate() {
            let (got, want, scale) = match *name {
                "min" | "max" | "mean" | "median" | "percentile" | "q1" => (shifted[f], base[f] + c, a),
                "ptp" | "mad" | "std_s" | "std_p" | "iqr" => (shifted[f], base[f], a),
                "var_s" | "var_p" | "hjorth_activity" => (shifted[f], base[f], a * a),
                // moments are shift-free only once the series is not near-constant
                "skewness" | "kurtosis" if base[7] > 1e-6 * a * a => (shifted[f], base[f], 1e3),
                _ => continue,
            };
            prop_assert!(oracle::close(got, want, scale, 1e-9), "{name}: {got} vs {want}");
        }
    }

    #[test]
    fn scale_law(x in series(), s in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let base = channel_features(&x, 50.0).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v * s).collect();
        let sc = channel_features(&y, 50.0).unwrap();
        let idx = |n: &str| FEATURE_NAMES.iter().position(|f| *f == n).unwrap();
        let a = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
        let check = |name: &str, want: f64, scale: f64| -> Result<(), TestCaseError> {
            let got = sc[idx(name)];
            prop_assert!(oracle::close(got, want, scale, 1e-9), "{name}: {got} vs {want}");
            Ok(())
        };
        let abs = s.abs();
        for n in ["mav", "ptp", "mad", "std_s", "std_p", "iqr", "rms"] {
            check(n, base[idx(n)] * abs, a * abs)?;
        }
        for n in ["mean", "median", "percentile"] {
            check(n, base[idx(n)] * s, a * abs)?;
        }
        for n in ["var_s", "var_p", "power", "hjorth_activity"] {
            check(n, base[idx(n)] * s * s, a * a * s * s)?;
        }
        check("energy", base[idx("energy")] * s * s, a * a * s * s * x.len() as f64)?;
        if s > 0.0 {
            check("min", base[idx("min")] * s, a * abs)?;
            check("max", base[idx("max")] * s, a * abs)?;
        } else {
            check("min", base[idx("max")] * s, a * abs)?;
            check("max", base[idx("min")] * s, a * abs)?;
        }
        if base[idx("var_p")] > 1e-6 * a * a {
            check("skewness", base[idx("skewness")] * s.signum(), 1e3)?;
            check("kurtosis", base[idx("kurtosis")], 1e3)?;
        }
    }

    #[test]
    fn channel_order_in_the_vector(chans in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 8), N_CHANNELS)) {
        let channels: [Vec<f64>; N_CHANNELS] = std::array::from_fn(|c| chans[c].clone());
        let w = Window { subject_id: 1, trial_id: 1, label: GestureLabel::WristFlexion, channels, offset: 0 };
        let v = extract_features::<f64>(&w, &FeatureConfig::default()).unwrap();
        prop_assert_eq!(v.names.as_ref(), &feature_names(ChannelMode::PerChannel));
        for (c, ch) in chans.iter().enumerate() {
            let want = oracle::features(ch, 50.0);
            for (f, w) in want.iter().enumerate() {
                prop_assert!(oracle::close(v.values[c * 20 + f], *w, oracle::reference_scale(ch, f), 1e-9));
            }
        }
        let cm = extract_features::<f64>(&w, &FeatureConfig { channel_mode: ChannelMode::ChannelMean, ..Default::default() }).unwrap();
        for f in 0..20 {
            let mean = (0..N_CHANNELS).map(|c| v.values[c * 20 + f]).sum::<f64>() / N_CHANNELS as f64;
            prop_assert!((cm.values[f] - mean).abs() <= 1e-9 * mean.abs().max(100.0));
        }
    }
}
