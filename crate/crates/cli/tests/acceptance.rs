//! Acceptance checks. Prints one line per criterion and exits non-zero when any
//! checked criterion fails. Real-data criteria need `EMGKIT_UCI_DIR` pointing at
//! the extracted recording archive and are reported as SKIP otherwise.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use emgkit_core::dataset::{load_dataset_with, summarize};
use emgkit_core::evaluation::{confusion, confusion_with_labels, metrics};
use emgkit_core::features::{build_feature_matrix, channel_features, FEATURE_NAMES};
use emgkit_core::preprocess::windows_from_recordings;
use emgkit_core::synth::{generate_synthetic, SynthParams};
use emgkit_core::trees::{feature_importances, fit_decision_tree, fit_extra_trees, fit_random_forest, gini_impurity, TreeNode};
use emgkit_core::{
    evaluate_pipeline, fit_model, EvalConfig, EvaluationReport, FeatureConfig, FeatureMatrix, FeatureMode, LabelPolicy, ModelKind,
    ModelSpec, TreeParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNTIME_BUDGET: Duration = Duration::from_secs(120);

#[derive(Default)]
struct Tally {
    failed: Vec<String>,
}

impl Tally {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        println!("[{}] {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id.to_string());
        }
    }

    fn check_result(&mut self, id: &str, r: Result<String, String>) {
        match r {
            Ok(d) => self.check(id, true, d),
            Err(d) => self.check(id, false, d),
        }
    }
}

fn skip(id: &str, why: &str) {
    println!("[SKIP] {id}: {why}");
}

fn info(id: &str, detail: String) {
    println!("[INFO] {id}: {detail}");
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn run(m: &FeatureMatrix<f64>, kind: ModelKind, mode: FeatureMode) -> EvaluationReport {
    let cfg = EvalConfig {
        model: ModelSpec::new(kind),
        feature_mode: mode,
        ..Default::default()
    };
    evaluate_pipeline(m, &cfg).unwrap_or_else(|e| panic!("{kind} evaluation failed: {e}"))
}

fn real_data(t: &mut Tally, root: &Path) {
    let recs = load_dataset_with(root, LabelPolicy::UnmarkUnknown).expect("loading EMGKIT_UCI_DIR");
    let s = summarize(&recs);
    info("dataset", format!("{} recordings from {} subjects (reference 72 / 36)", s.recordings, s.subjects));
    let windows = windows_from_recordings(&recs, 200, 100).expect("windowing");
    let m = build_feature_matrix::<f64>(&windows, &FeatureConfig::default()).expect("features");
    info("dataset", format!("{} windows x {} features", m.n_rows(), m.n_cols()));

    let sel = FeatureMode::Selected { k: 10 };
    let knn_sel = run(&m, ModelKind::Knn, sel);
    let knn_all = run(&m, ModelKind::Knn, FeatureMode::All);
    let dt_sel = run(&m, ModelKind::DecisionTree, sel);
    let rf_sel = run(&m, ModelKind::RandomForest, sel);
    let gnb_all = run(&m, ModelKind::GaussianNb, FeatureMode::All);
    let gnb_sel = run(&m, ModelKind::GaussianNb, sel);

    let a = knn_sel.accuracy();
    t.check("1 knn selected-10 accuracy", (0.939..=1.0).contains(&a), format!("{} (band 93.90% to 100%)", pct(a)));

    let g = gnb_all.accuracy();
    let knn_gap = a - g;
    let dt_gap = dt_sel.accuracy() - g;
    let rf_off = rf_sel.accuracy() - 0.97;
    t.check(
        "2 model ordering",
        knn_gap >= 0.30 && dt_gap >= 0.30 && rf_off.abs() <= 0.035,
        format!(
            "knn-gnb {:+.2} pp, dt-gnb {:+.2} pp (need >= 30), rf {} vs 97.00% ({:+.2} pp, need within 3.5)",
            100.0 * knn_gap,
            100.0 * dt_gap,
            pct(rf_sel.accuracy()),
            100.0 * rf_off
        ),
    );
    info("2 gnb selected-10", pct(gnb_sel.accuracy()));

    let drop = knn_all.accuracy() - a;
    t.check(
        "3 selection keeps knn accuracy",
        drop <= 0.01,
        format!("selected {} vs all {} ({:+.2} pp)", pct(a), pct(knn_all.accuracy()), -100.0 * drop),
    );

    let worst = knn_sel
        .metrics
        .per_class
        .iter()
        .min_by(|x, y| x.f1.total_cmp(&y.f1))
        .expect("classes");
    let f1s: Vec<String> = knn_sel.metrics.per_class.iter().map(|c| format!("{}={:.3}", c.label, c.f1)).collect();
    t.check("4 per-gesture f1 >= 0.90", worst.f1 >= 0.90, format!("worst {} {:.3}; {}", worst.name, worst.f1, f1s.join(" ")));
}

fn oracle_batch() -> Result<String, String> {
    let batch = oracle::series_batch(77, 1000);
    let mut worst = 0.0f64;
    for (i, x) in batch.iter().enumerate() {
        let got = channel_features(x, 50.0).map_err(|e| e.to_string())?;
        let want = oracle::features(x, 50.0);
        for f in 0..20 {
            let scale = oracle::reference_scale(x, f).max(f64::MIN_POSITIVE);
            worst = worst.max((got[f] - want[f]).abs() / scale);
            if !oracle::close(got[f], want[f], scale, 1e-9) {
                return Err(format!("series {i} {}: {} vs {}", FEATURE_NAMES[f], got[f], want[f]));
            }
        }
    }
    Ok(format!("1000 series, worst scaled error {worst:.1e} (tolerance 1e-9)"))
}

fn invariance_laws() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let idx = |n: &str| FEATURE_NAMES.iter().position(|f| *f == n).unwrap();
    let mut cases = 0;
    for x in oracle::series_batch(91, 300) {
        let a = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
        let base = channel_features(&x, 50.0).map_err(|e| e.to_string())?;
        let c = rng.random_range(-5.0..5.0) * a;
        let shifted = channel_features(&x.iter().map(|v| v + c).collect::<Vec<_>>(), 50.0).map_err(|e| e.to_string())?;
        let s = rng.random_range(0.1..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let scaled = channel_features(&x.iter().map(|v| v * s).collect::<Vec<_>>(), 50.0).map_err(|e| e.to_string())?;
        let sa = a + c.abs();
        for n in ["min", "max", "mean", "median", "percentile"] {
            if !oracle::close(shifted[idx(n)], base[idx(n)] + c, sa, 1e-9) {
                return Err(format!("shift {n}: {} vs {}", shifted[idx(n)], base[idx(n)] + c));
            }
        }
        for n in ["ptp", "mad", "std_s", "std_p", "iqr"] {
            if !oracle::close(shifted[idx(n)], base[idx(n)], sa, 1e-9) {
                return Err(format!("shift {n}: {} vs {}", shifted[idx(n)], base[idx(n)]));
            }
            if !oracle::close(scaled[idx(n)], base[idx(n)] * s.abs(), a * s.abs(), 1e-9) {
                return Err(format!("scale {n}: {} vs {}", scaled[idx(n)], base[idx(n)] * s.abs()));
            }
        }
        for n in ["var_p", "power", "hjorth_activity"] {
            if !oracle::close(scaled[idx(n)], base[idx(n)] * s * s, a * a * s * s, 1e-9) {
                return Err(format!("scale {n}: {} vs {}", scaled[idx(n)], base[idx(n)] * s * s));
            }
        }
        cases += 1;
    }
    Ok(format!("{cases} series under random shift and scale"))
}

fn split_consistency(node: &TreeNode<f64>) -> Result<(), String> {
    if let TreeNode::Split { impurity, impurity_decrease, n_samples, left, right, .. } = node {
        let (nl, nr) = (left.n_samples(), right.n_samples());
        if nl + nr != *n_samples || nl == 0 || nr == 0 {
            return Err(format!("children {nl}+{nr} vs parent {n_samples}"));
        }
        let n = *n_samples as f64;
        let expect = impurity - (nl as f64 / n) * left.impurity() - (nr as f64 / n) * right.impurity();
        if *impurity_decrease < 0.0 || (expect.max(0.0) - impurity_decrease).abs() > 1e-12 {
            return Err(format!("decrease {impurity_decrease} vs children {expect}"));
        }
        split_consistency(left)?;
        split_consistency(right)?;
    }
    Ok(())
}

fn tree_identities() -> Result<String, String> {
    let g = |c: &[usize]| gini_impurity(c).map_err(|e| e.to_string());
    for n in 1..50 {
        if g(&[n])? != 0.0 || g(&[0, n, 0])? != 0.0 {
            return Err(format!("pure node of {n} has non-zero impurity"));
        }
    }
    for k in 2..=12usize {
        let want = 1.0 - 1.0 / k as f64;
        if (g(&vec![7; k])? - want).abs() > 1e-12 {
            return Err(format!("uniform {k} classes"));
        }
    }
    if gini_impurity(&[0, 0]).is_ok() {
        return Err("empty node accepted".into());
    }
    let p = SynthParams { classes: 4, per_class: 60, separation: 2.0, n_features: 8 };
    let m = generate_synthetic::<f64>(&p, 3).map_err(|e| e.to_string())?;
    let hp = TreeParams { n_trees: 20, ..Default::default() };
    let forests = [
        fit_decision_tree(&m, &hp).map_err(|e| e.to_string())?,
        fit_random_forest(&m, &hp, 9).map_err(|e| e.to_string())?,
        fit_extra_trees(&m, &hp, 9).map_err(|e| e.to_string())?,
    ];
    let mut splits = 0;
    for f in &forests {
        for t in &f.trees {
            split_consistency(t)?;
            t.for_each_split(&mut |_| splits += 1);
        }
        let imp = feature_importances(f).map_err(|e| e.to_string())?;
        let sum: f64 = imp.scores.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || imp.scores.iter().any(|s| *s < 0.0) {
            return Err(format!("{:?} importances sum {sum}", f.kind));
        }
    }
    Ok(format!("gini identities hold; {splits} splits consistent; importances sum to 1"))
}

fn knn_memorizes() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (n, d) = (300, 5);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-100.0..100.0)).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(1..=6)).collect();
    let names = (0..d).map(|j| format!("f{j}")).collect();
    let m = FeatureMatrix::from_rows(names, rows, labels).map_err(|e| e.to_string())?;
    for standardize in [true, false] {
        let mut spec = ModelSpec::new(ModelKind::Knn);
        spec.knn.k = 1;
        spec.knn.standardize = standardize;
        let model = fit_model(&spec, &m, 0).map_err(|e| e.to_string())?;
        let pred = model.predict(&m).map_err(|e| e.to_string())?;
        let acc = pred.iter().zip(m.labels()).filter(|(a, b)| a == b).count() as f64 / n as f64;
        if acc != 1.0 {
            return Err(format!("standardize={standardize}: training accuracy {acc}"));
        }
    }
    Ok(format!("k=1 training accuracy 100% on {n} random rows with random labels"))
}

fn metric_identities() -> Result<String, String> {
    let labels: Vec<usize> = (1..=6).collect();
    let truth: Vec<usize> = labels.iter().flat_map(|&l| std::iter::repeat_n(l, l * 3)).collect();
    let s = metrics(&confusion_with_labels(labels, &truth, &truth).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let ones = s.accuracy == 1.0
        && s.per_class.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0 && c.specificity == 1.0);
    if !ones {
        return Err("diagonal matrix does not give perfect metrics".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..200 {
        let n = rng.random_range(1..300);
        let k = rng.random_range(2..8);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let s = metrics(&confusion(&truth, &pred).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if (s.micro_avg.recall - s.accuracy).abs() > 1e-12 || (s.micro_avg.precision - s.accuracy).abs() > 1e-12 {
            return Err(format!("case {case}: micro {} vs accuracy {}", s.micro_avg.recall, s.accuracy));
        }
    }
    Ok("diagonal gives all 1.0; micro recall equals accuracy on 200 random cases".into())
}

fn cli_rerun_identical() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_emgkit");
    let data = dir.path().join("synth.csv");
    let status = Command::new(bin)
        .args(["synth", "--seed", "21", "--per-class", "60", "--out"])
        .arg(&data)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("synth exited {status}"));
    }
    let mut outs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("report{threads}.json"));
        let md = dir.path().join(format!("report{threads}.md"));
        let status = Command::new(bin)
            .env("EMGKIT_THREADS", threads)
            .args(["evaluate", "--seed", "42", "--model", "random_forest", "--trees", "20", "--selection-trees", "20", "--features"])
            .arg(&data)
            .arg("--out")
            .arg(&out)
            .arg("--markdown")
            .arg(&md)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("evaluate exited {status}"));
        }
        outs.push((std::fs::read(&out).map_err(|e| e.to_string())?, std::fs::read(&md).map_err(|e| e.to_string())?));
    }
    if outs[0] != outs[1] {
        return Err("report bytes differ between runs".into());
    }
    Ok(format!("report ({} bytes) and markdown identical across two runs", outs[0].0.len()))
}

fn synthetic_recovery(t: &mut Tally) {
    let m = generate_synthetic::<f64>(&SynthParams::default(), 2026).expect("synthetic data");
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in ModelKind::ALL {
        let acc = run(&m, kind, FeatureMode::All).accuracy();
        let need = if kind == ModelKind::GaussianNb { 0.90 } else { 0.97 };
        ok &= acc >= need;
        parts.push(format!("{kind} {} (>= {})", pct(acc), pct(need)));
    }
    t.check("5g synthetic recovery", ok, parts.join(", "));
}

fn main() {
    let start = Instant::now();
    let mut t = Tally::default();

    match std::env::var_os("EMGKIT_UCI_DIR") {
        Some(dir) => real_data(&mut t, Path::new(&dir)),
        None => {
            for id in ["1 knn selected-10 accuracy", "2 model ordering", "3 selection keeps knn accuracy", "4 per-gesture f1 >= 0.90"] {
                skip(id, "EMGKIT_UCI_DIR not set");
            }
        }
    }

    t.check_result("5a feature oracle", oracle_batch());
    t.check_result("5b shift and scale laws", invariance_laws());
    t.check_result("5c tree bookkeeping", tree_identities());
    t.check_result("5d knn k=1 memorizes", knn_memorizes());
    t.check_result("5e metric identities", metric_identities());
    t.check_result("5f cli rerun byte-identical", cli_rerun_identical());
    synthetic_recovery(&mut t);
    println!("[N/A ] 6: no quantitative target; not checked");

    let elapsed = start.elapsed();
    t.check("runtime", elapsed <= RUNTIME_BUDGET, format!("{:.1} s (budget {} s)", elapsed.as_secs_f64(), RUNTIME_BUDGET.as_secs()));

    if t.failed.is_empty() {
        println!("acceptance: all checked criteria pass");
    } else {
        println!("acceptance: failed {}", t.failed.join(", "));
        std::process::exit(1);
    }
}
