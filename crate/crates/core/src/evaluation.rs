//! Confusion matrices, the one-vs-rest metric suite, fold construction and
//! the cross-validated pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::class_name;
use crate::error::{EmgError, Result};
use crate::matrix::FeatureMatrix;
use crate::model::{fit_model, ModelKind, ModelSpec, TrainedModel};
use crate::scalar::Scalar;
use crate::selection::{intersection, project, rank_features, select_top_k, FeatureSubset, SelectionProvenance};
use crate::trees::TreeParams;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Class codes, ascending; rows are true labels, columns predictions.
    pub labels: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<usize>) -> Self {
        let l = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; l]; l],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Adds `other` cell-wise; both must share the label order.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.labels != other.labels {
            return Err(EmgError::InvalidParams("confusion matrices have different label sets".into()));
        }
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "true\\pred")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for (l, row) in self.labels.iter().zip(&self.counts) {
            write!(w, "{l}")?;
            for c in row {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Confusion matrix over the union of labels seen in either vector.
pub fn confusion(truth: &[usize], pred: &[usize]) -> Result<ConfusionMatrix> {
    let mut labels: Vec<usize> = truth.iter().chain(pred).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    confusion_with_labels(labels, truth, pred)
}

pub fn confusion_with_labels(labels: Vec<usize>, truth: &[usize], pred: &[usize]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(EmgError::LengthMismatch(truth.len(), pred.len()));
    }
    let mut labels = labels;
    labels.sort_unstable();
    labels.dedup();
    let mut cm = ConfusionMatrix::zeros(labels);
    let pos = |l: usize, cm: &ConfusionMatrix| {
        cm.labels
            .binary_search(&l)
            .map_err(|_| EmgError::InvalidParams(format!("label {l} not in confusion label set")))
    };
    for (&t, &p) in truth.iter().zip(pred) {
        let (i, j) = (pos(t, &cm)?, pos(p, &cm)?);
        cm.counts[i][j] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub name: String,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub specificity: f64,
    /// Metrics whose denominator was zero and were reported as 0.
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub total: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub micro_avg: Averages,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64, undefined: &mut Vec<String>) -> f64 {
    if p + r == 0.0 {
        undefined.push("f1".into());
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsSummary> {
    let total = cm.total();
    if total == 0 {
        return Err(EmgError::EmptyMatrix);
    }
    let l = cm.labels.len();
    let mut per_class = Vec::with_capacity(l);
    let (mut stp, mut sfp, mut sfn, mut stn) = (0, 0, 0, 0);
    for c in 0..l {
        let tp = cm.counts[c][c];
        let row: usize = cm.counts[c].iter().sum();
        let col: usize = (0..l).map(|r| cm.counts[r][c]).sum();
        let (fp, fn_) = (col - tp, row - tp);
        let tn = total - tp - fp - fn_;
        let mut undefined = Vec::new();
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let recall = ratio(tp, tp + fn_, "recall", &mut undefined);
        let specificity = ratio(tn, tn + fp, "specificity", &mut undefined);
        let f1 = f1(precision, recall, &mut undefined);
        per_class.push(ClassMetrics {
            label: cm.labels[c],
            name: class_name(cm.labels[c]),
            support: row,
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            specificity,
            undefined,
        });
        stp += tp;
        sfp += fp;
        sfn += fn_;
        stn += tn;
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / l as f64;
    let macro_avg = Averages {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        specificity: mean(|c| c.specificity),
    };
    let mut scratch = Vec::new();
    let mp = ratio(stp, stp + sfp, "precision", &mut scratch);
    let mr = ratio(stp, stp + sfn, "recall", &mut scratch);
    let micro_avg = Averages {
        precision: mp,
        recall: mr,
        f1: f1(mp, mr, &mut scratch),
        specificity: ratio(stn, stn + sfp, "specificity", &mut scratch),
    };
    Ok(MetricsSummary {
        total,
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
        macro_avg,
        micro_avg,
    })
}

pub type Fold = (Vec<usize>, Vec<usize>);

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    test.iter().for_each(|&i| in_test[i] = true);
    (0..n).filter(|&i| !in_test[i]).collect()
}

/// Stratified k-fold: members of each class are shuffled and dealt
/// round-robin, continuing the deal across classes so fold sizes stay level.
pub fn stratified_kfold<F: Scalar>(m: &FeatureMatrix<F>, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    stratified_kfold_labels(m.labels(), folds, seed)
}

pub fn stratified_kfold_labels(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(EmgError::InvalidParams("folds must be at least 2".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    for (&class, members) in &by_class {
        if members.len() < folds {
            return Err(EmgError::TooFewSamplesPerClass {
                class,
                count: members.len(),
                folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests = vec![Vec::new(); folds];
    let mut offset = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for (i, &idx) in members.iter().enumerate() {
            tests[(offset + i) % folds].push(idx);
        }
        offset = (offset + members.len()) % folds;
    }
    Ok(tests
        .into_iter()
        .map(|mut t| {
            t.sort_unstable();
            (complement(labels.len(), &t), t)
        })
        .collect())
}

/// Leave-subjects-out folds: whole groups are shuffled and dealt round-robin.
pub fn group_kfold(groups: &[u32], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(EmgError::InvalidParams("folds must be at least 2".into()));
    }
    let mut ids: Vec<u32> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < folds {
        return Err(EmgError::InvalidParams(format!(
            "{} subjects cannot fill {folds} folds",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &g)| (g, i % folds)).collect();
    let mut tests = vec![Vec::new(); folds];
    for (i, g) in groups.iter().enumerate() {
        tests[fold_of[g]].push(i);
    }
    Ok(tests
        .into_iter()
        .map(|t| (complement(groups.len(), &t), t))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FeatureMode {
    All,
    Selected { k: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Stratified,
    /// Test folds hold whole subjects.
    SubjectWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub model: ModelSpec,
    pub feature_mode: FeatureMode,
    pub folds: usize,
    pub seed: u64,
    pub split: SplitMode,
    /// Extra-trees settings used for ranking inside each training fold.
    pub selection_trees: TreeParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            model: ModelSpec::default(),
            feature_mode: FeatureMode::Selected { k: crate::selection::DEFAULT_TOP_K },
            folds: DEFAULT_FOLDS,
            seed: DEFAULT_SEED,
            split: SplitMode::Stratified,
            selection_trees: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub selected: Option<Vec<String>>,
    pub knn_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub model: ModelKind,
    pub config: EvalConfig,
    pub n_rows: usize,
    pub n_features: usize,
    pub metrics: MetricsSummary,
    pub confusion: ConfusionMatrix,
    pub folds: Vec<FoldSummary>,
    /// Features chosen in every fold (selected mode only).
    pub selected_intersection: Option<Vec<String>>,
}

impl EvaluationReport {
    pub fn accuracy(&self) -> f64 {
        self.metrics.accuracy
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn class(&self, label: usize) -> Option<&ClassMetrics> {
        self.metrics.per_class.iter().find(|c| c.label == label)
    }
}

/// SplitMix64 step; decorrelates per-fold seeds derived from one run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct FoldOutcome {
    confusion: ConfusionMatrix,
    summary: FoldSummary,
    subset: Option<FeatureSubset>,
}

fn run_fold<F: Scalar>(m: &FeatureMatrix<F>, cfg: &EvalConfig, fold: usize, split: &Fold, labels: &[usize]) -> Result<FoldOutcome> {
    let (train_idx, test_idx) = split;
    let fold_seed = derive_seed(cfg.seed, fold as u64);
    let mut train = m.take_rows(train_idx);
    let mut test = m.take_rows(test_idx);
    let mut subset = None;
    if let FeatureMode::Selected { k } = cfg.feature_mode {
        // Ranking sees the training fold only.
        let ranking = rank_features(&train, &cfg.selection_trees, fold_seed)?;
        let mut s = select_top_k(&ranking, k)?;
        s.provenance = Some(SelectionProvenance {
            seed: fold_seed,
            hyperparams: cfg.selection_trees,
            fold: Some(fold),
        });
        train = project(&train, &s)?;
        test = project(&test, &s)?;
        subset = Some(s);
    }
    let model = fit_model(&cfg.model, &train, fold_seed)?;
    let pred = model.predict(&test)?;
    let confusion = confusion_with_labels(labels.to_vec(), test.labels(), &pred)?;
    let correct = pred.iter().zip(test.labels()).filter(|(a, b)| a == b).count();
    Ok(FoldOutcome {
        summary: FoldSummary {
            fold,
            n_train: train.n_rows(),
            n_test: test.n_rows(),
            accuracy: correct as f64 / test.n_rows().max(1) as f64,
            selected: subset.as_ref().map(|s| s.names.clone()),
            knn_k: match &model {
                TrainedModel::Knn(k) => Some(k.k),
                _ => None,
            },
        },
        confusion,
        subset,
    })
}

/// Cross-validates `cfg.model` on `m`, pooling the fold confusion matrices.
pub fn evaluate_pipeline<F: Scalar>(m: &FeatureMatrix<F>, cfg: &EvalConfig) -> Result<EvaluationReport> {
    m.check_trainable()?;
    let splits = match cfg.split {
        SplitMode::Stratified => stratified_kfold(m, cfg.folds, cfg.seed)?,
        SplitMode::SubjectWise => {
            let groups = m
                .groups()
                .ok_or_else(|| EmgError::InvalidParams("subject-wise split needs subject ids per row".into()))?;
            group_kfold(groups, cfg.folds, cfg.seed)?
        }
    };
    let labels = m.classes();
    let outcomes = splits
        .par_iter()
        .enumerate()
        .map(|(f, split)| {
            run_fold(m, cfg, f, split, &labels).map_err(|e| EmgError::InFold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pooled = ConfusionMatrix::zeros(labels);
    for o in &outcomes {
        pooled.add(&o.confusion)?;
    }
    let subsets: Vec<FeatureSubset> = outcomes.iter().filter_map(|o| o.subset.clone()).collect();
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: crate::VERSION.to_string(),
        config_hash: String::new(),
        seed: cfg.seed,
        model: cfg.model.kind,
        config: cfg.clone(),
        n_rows: m.n_rows(),
        n_features: m.n_cols(),
        metrics: metrics(&pooled)?,
        confusion: pooled,
        folds: outcomes.into_iter().map(|o| o.summary).collect(),
        selected_intersection: (!subsets.is_empty()).then(|| intersection(&subsets)),
    })
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Per-class precision / recall / F1 / specificity in percent, 2 decimals.
pub fn per_class_table(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Gesture | Precision | Recall | F1 | Specificity |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for c in &report.metrics.per_class {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            c.name,
            pct(c.precision),
            pct(c.recall),
            pct(c.f1),
            pct(c.specificity)
        );
    }
    s
}

/// Model-by-model comparison of all-feature and selected-feature runs.
/// Sensitivity and specificity are macro averages of the selected run.
pub fn comparison_table(reports: &[EvaluationReport]) -> String {
    let mut by_model: BTreeMap<ModelKind, (Option<&EvaluationReport>, Option<&EvaluationReport>)> = BTreeMap::new();
    for r in reports {
        let e = by_model.entry(r.model).or_default();
        match r.config.feature_mode {
            FeatureMode::All => e.0 = Some(r),
            FeatureMode::Selected { .. } => e.1 = Some(r),
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "| Model | Feature No. | Accuracy | Selected Feature | Accuracy | Sensitivity | Specificity |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|");
    let na = || "n/a".to_string();
    for kind in ModelKind::ALL {
        let Some((all, sel)) = by_model.get(&kind) else { continue };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            kind.display_name(),
            all.map(|r| r.n_features.to_string()).unwrap_or_else(na),
            all.map(|r| pct(r.accuracy())).unwrap_or_else(na),
            sel.and_then(|r| match r.config.feature_mode {
                FeatureMode::Selected { k } => Some(k.to_string()),
                FeatureMode::All => None,
            })
            .unwrap_or_else(na),
            sel.map(|r| pct(r.accuracy())).unwrap_or_else(na),
            sel.map(|r| pct(r.metrics.macro_avg.recall)).unwrap_or_else(na),
            sel.map(|r| pct(r.metrics.macro_avg.specificity)).unwrap_or_else(na),
        );
    }
    s
}

fn mode_label(m: FeatureMode) -> String {
    match m {
        FeatureMode::All => "all features".into(),
        FeatureMode::Selected { k } => format!("selected {k}"),
    }
}

/// Full markdown document: run list, model comparison, per-gesture tables.
pub fn markdown_report(reports: &[EvaluationReport]) -> String {
    let mut s = String::from("# emgkit evaluation\n\n");
    let _ = writeln!(s, "| Model | Features | Folds | Split | Seed | Rows | Accuracy | Tool | Config hash |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
    for r in reports {
        let split = match r.config.split {
            SplitMode::Stratified => "stratified",
            SplitMode::SubjectWise => "subject-wise",
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.model.display_name(),
            mode_label(r.config.feature_mode),
            r.config.folds,
            split,
            r.seed,
            r.n_rows,
            pct(r.accuracy()),
            r.tool_version,
            if r.config_hash.is_empty() { "n/a" } else { &r.config_hash[..r.config_hash.len().min(12)] },
        );
    }
    s.push_str("\n## Model comparison\n\n");
    s.push_str(&comparison_table(reports));
    s.push_str("\n## Per-gesture metrics\n");
    for r in reports {
        let _ = writeln!(s, "\n### {}, {}\n", r.model.display_name(), mode_label(r.config.feature_mode));
        s.push_str(&per_class_table(r));
        if let Some(common) = &r.selected_intersection {
            let _ = writeln!(s, "\nSelected in every fold: {}", if common.is_empty() { "none".into() } else { common.join(", ") });
        }
    }
    s
}
