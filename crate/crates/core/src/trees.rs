//! CART core shared by the decision tree, random forest and extra-trees
//! ensembles, plus impurity-based feature importances.
//!
//! All three models grow binary trees on Gini impurity with the same routine;
//! they differ in three knobs ([`GrowOptions`]):
//!
//! | kind           | rows per tree        | features per node | threshold                 |
//! |----------------|----------------------|-------------------|---------------------------|
//! | decision tree  | all                  | all               | best midpoint             |
//! | random forest  | bootstrap (n draws)  | `max_features`    | best midpoint             |
//! | extra trees    | all                  | `max_features`    | one uniform draw per feature |
//!
//! A row goes left at a split when `x[feature] < threshold`.
//!
//! Ties between candidate splits with equal impurity decrease go to the lowest
//! threshold within a feature and, across features, to the lowest feature
//! index when all features are scanned. Under feature subsampling the tie goes
//! to the feature drawn first, which keeps importances unbiased by column
//! position. Tree `t` of a forest fitted with
//! seed `s` draws from its own ChaCha stream seeded with `s ^ t`, so fitted
//! forests do not depend on the rayon thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EmgError, Result};
use crate::matrix::FeatureMatrix;
use crate::scalar::{cmp_scalar, Scalar};
use crate::selection::ImportanceRanking;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    DecisionTree,
    RandomForest,
    ExtraTrees,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub n_trees: usize,
    /// `None` grows until purity or `min_samples_split`.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Midpoints between consecutive distinct values; the best one wins.
    Best,
    /// One uniform draw in `[min, max)` of the node's values.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowOptions {
    pub bootstrap: bool,
    pub threshold: ThresholdRule,
    pub max_features: MaxFeatures,
}

impl GrowOptions {
    pub fn for_kind(kind: ForestKind, hp: &TreeParams) -> Self {
        match kind {
            ForestKind::DecisionTree => GrowOptions {
                bootstrap: false,
                threshold: ThresholdRule::Best,
                max_features: MaxFeatures::All,
            },
            ForestKind::RandomForest => GrowOptions {
                bootstrap: true,
                threshold: ThresholdRule::Best,
                max_features: hp.max_features,
            },
            ForestKind::ExtraTrees => GrowOptions {
                bootstrap: false,
                threshold: ThresholdRule::Random,
                max_features: hp.max_features,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode<F> {
    Split {
        feature: usize,
        threshold: F,
        /// Gini impurity of the node before splitting.
        impurity: f64,
        impurity_decrease: f64,
        n_samples: usize,
        left: Box<TreeNode<F>>,
        right: Box<TreeNode<F>>,
    },
    Leaf {
        /// Counts indexed like [`Forest::classes`].
        class_counts: Vec<usize>,
    },
}

impl<F: Scalar> TreeNode<F> {
    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Split { n_samples, .. } => *n_samples,
            TreeNode::Leaf { class_counts } => class_counts.iter().sum(),
        }
    }

    pub fn impurity(&self) -> f64 {
        match self {
            TreeNode::Split { impurity, .. } => *impurity,
            TreeNode::Leaf { class_counts } => gini_impurity(class_counts).unwrap_or(0.0),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
            TreeNode::Leaf { .. } => 1,
        }
    }

    /// Index into the forest's class list of the leaf majority reached by `row`.
    pub fn predict_index(&self, row: &[F]) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] < *threshold { left } else { right },
                TreeNode::Leaf { class_counts } => return argmax_first(class_counts),
            }
        }
    }

    /// Visits every split node depth-first.
    pub fn for_each_split(&self, f: &mut impl FnMut(&TreeNode<F>)) {
        if let TreeNode::Split { left, right, .. } = self {
            f(self);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }
}

/// Index of the first maximum.
pub(crate) fn argmax_first(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// `1 - sum(p_k^2)` over class proportions.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(EmgError::EmptyNode);
    }
    Ok(gini_from_sum_sq(sum_sq(class_counts), total))
}

fn sum_sq(counts: &[usize]) -> f64 {
    counts.iter().map(|&c| (c as f64) * (c as f64)).sum()
}

fn gini_from_sum_sq(sum_sq: f64, n: usize) -> f64 {
    let n = n as f64;
    1.0 - sum_sq / (n * n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<F> {
    pub version: u32,
    pub kind: ForestKind,
    pub hyperparams: TreeParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Sorted class codes; leaf counts and votes are indexed by position here.
    pub classes: Vec<usize>,
    pub trees: Vec<TreeNode<F>>,
}

struct SplitCandidate<F> {
    feature: usize,
    threshold: F,
    decrease: f64,
}

struct Grower<'a, F> {
    m: &'a FeatureMatrix<F>,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    min_samples_split: usize,
    max_features: usize,
    threshold: ThresholdRule,
}

impl<'a, F: Scalar> Grower<'a, F> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn grow(&self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode<F> {
        let counts = self.counts(idx);
        let n = idx.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || n < self.min_samples_split {
            return TreeNode::Leaf { class_counts: counts };
        }
        let parent = gini_from_sum_sq(sum_sq(&counts), n);
        let Some(best) = self.best_split(idx, &counts, parent, rng) else {
            return TreeNode::Leaf { class_counts: counts };
        };

        let mut split_at = 0;
        for j in 0..n {
            if self.m.get(idx[j], best.feature) < best.threshold {
                idx.swap(j, split_at);
                split_at += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split_at);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            impurity: parent,
            impurity_decrease: best.decrease,
            n_samples: n,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(
        &self,
        idx: &[usize],
        counts: &[usize],
        parent: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<SplitCandidate<F>> {
        let d = self.m.n_cols();
        let mut order: Vec<usize> = (0..d).collect();
        if self.max_features < d {
            order.shuffle(rng);
        }
        let mut best: Option<SplitCandidate<F>> = None;
        let mut visited = 0;
        for &f in &order {
            if visited == self.max_features {
                break;
            }
            let (lo, hi) = idx.iter().fold((F::infinity(), F::neg_infinity()), |(lo, hi), &i| {
                let v = self.m.get(i, f);
                (lo.min(v), hi.max(v))
            });
            if !(lo < hi) {
                continue;
            }
            visited += 1;
            let cand = match self.threshold {
                ThresholdRule::Best => self.best_threshold(idx, f, counts, parent),
                ThresholdRule::Random => {
                    let u: f64 = rng.random();
                    let t = lo + (hi - lo) * F::from_f64_lossy(u);
                    self.evaluate_threshold(idx, f, t, parent)
                }
            };
            // Equal decreases keep the earlier candidate: lowest feature index
            // when every feature is scanned, otherwise the earlier draw.
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.decrease > b.decrease) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn decrease(&self, parent: f64, n: usize, nl: usize, sql: f64, sqr: f64) -> f64 {
        let nr = n - nl;
        let gl = gini_from_sum_sq(sql, nl);
        let gr = gini_from_sum_sq(sqr, nr);
        let nf = n as f64;
        (parent - (nl as f64 / nf) * gl - (nr as f64 / nf) * gr).max(0.0)
    }

    fn evaluate_threshold(&self, idx: &[usize], f: usize, t: F, parent: f64) -> Option<SplitCandidate<F>> {
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for &i in idx {
            if self.m.get(i, f) < t {
                left[self.y[i]] += 1;
            } else {
                right[self.y[i]] += 1;
            }
        }
        let nl: usize = left.iter().sum();
        if nl == 0 || nl == idx.len() {
            return None;
        }
        Some(SplitCandidate {
            feature: f,
            threshold: t,
            decrease: self.decrease(parent, idx.len(), nl, sum_sq(&left), sum_sq(&right)),
        })
    }

    fn best_threshold(&self, idx: &[usize], f: usize, counts: &[usize], parent: f64) -> Option<SplitCandidate<F>> {
        let mut pairs: Vec<(F, usize)> = idx.iter().map(|&i| (self.m.get(i, f), self.y[i])).collect();
        pairs.sort_by(|a, b| cmp_scalar(&a.0, &b.0));
        let n = pairs.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = counts.to_vec();
        let mut sql = 0.0;
        let mut sqr = sum_sq(counts);
        let mut best: Option<SplitCandidate<F>> = None;
        for j in 0..n - 1 {
            let c = pairs[j].1;
            sql += 2.0 * left[c] as f64 + 1.0;
            sqr -= 2.0 * right[c] as f64 - 1.0;
            left[c] += 1;
            right[c] -= 1;
            let (a, b) = (pairs[j].0, pairs[j + 1].0);
            if !(a < b) {
                continue;
            }
            let decrease = self.decrease(parent, n, j + 1, sql, sqr);
            if best.as_ref().is_none_or(|bst| decrease > bst.decrease) {
                let two = F::one() + F::one();
                let mut t = a + (b - a) / two;
                if !(t > a) || t > b {
                    t = b;
                }
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: t,
                    decrease,
                });
            }
        }
        best
    }
}

fn class_indices(m: &FeatureMatrix<impl Scalar>, classes: &[usize]) -> Vec<usize> {
    m.labels()
        .iter()
        .map(|l| classes.binary_search(l).expect("label present in class list"))
        .collect()
}

/// Fits a forest of `kind` with explicit growth options. The named `fit_*`
/// functions are the usual entry points; this one exists for reduction tests
/// and ablations.
pub fn fit_forest<F: Scalar>(
    m: &FeatureMatrix<F>,
    kind: ForestKind,
    hp: &TreeParams,
    seed: u64,
    opts: GrowOptions,
) -> Result<Forest<F>> {
    m.check_trainable()?;
    if m.n_rows() < 2 {
        return Err(EmgError::DegenerateData("need at least 2 samples".into()));
    }
    let n_trees = if kind == ForestKind::DecisionTree { 1 } else { hp.n_trees };
    if n_trees == 0 {
        return Err(EmgError::InvalidParams("n_trees must be at least 1".into()));
    }
    let classes = m.classes();
    let y = class_indices(m, &classes);
    let grower = Grower {
        m,
        y: &y,
        n_classes: classes.len(),
        max_depth: hp.max_depth.unwrap_or(usize::MAX),
        min_samples_split: hp.min_samples_split.max(2),
        max_features: opts.max_features.resolve(m.n_cols()),
        threshold: opts.threshold,
    };
    let n = m.n_rows();
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t as u64);
            let mut idx: Vec<usize> = if opts.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grower.grow(&mut idx, 0, &mut rng)
        })
        .collect();
    Ok(Forest {
        version: MODEL_FORMAT_VERSION,
        kind,
        hyperparams: TreeParams { n_trees, ..*hp },
        seed,
        feature_names: m.names().to_vec(),
        classes,
        trees,
    })
}

/// CART over all features with exhaustive threshold search.
pub fn fit_decision_tree<F: Scalar>(m: &FeatureMatrix<F>, hp: &TreeParams) -> Result<Forest<F>> {
    fit_forest(m, ForestKind::DecisionTree, hp, 0, GrowOptions::for_kind(ForestKind::DecisionTree, hp))
}

pub fn fit_extra_trees<F: Scalar>(m: &FeatureMatrix<F>, hp: &TreeParams, seed: u64) -> Result<Forest<F>> {
    fit_forest(m, ForestKind::ExtraTrees, hp, seed, GrowOptions::for_kind(ForestKind::ExtraTrees, hp))
}

pub fn fit_random_forest<F: Scalar>(m: &FeatureMatrix<F>, hp: &TreeParams, seed: u64) -> Result<Forest<F>> {
    fit_forest(m, ForestKind::RandomForest, hp, seed, GrowOptions::for_kind(ForestKind::RandomForest, hp))
}

impl<F: Scalar> Forest<F> {
    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.feature_names.len() {
            return Err(EmgError::WidthMismatch {
                expected: self.feature_names.len(),
                got: width,
            });
        }
        Ok(())
    }

    /// Plurality vote of the trees; ties go to the smallest class code.
    pub fn predict_row(&self, row: &[F]) -> Result<usize> {
        self.check_width(row.len())?;
        let mut votes = vec![0usize; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(row)] += 1;
        }
        Ok(self.classes[argmax_first(&votes)])
    }

    pub fn predict(&self, m: &FeatureMatrix<F>) -> Result<Vec<usize>> {
        self.check_width(m.n_cols())?;
        (0..m.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(m.row(i)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        de.disable_recursion_limit();
        let f = Forest::deserialize(&mut de)?;
        de.end()?;
        Ok(f)
    }
}

/// Per-tree importance vector: sample-weighted impurity decrease per feature,
/// normalized to sum 1 (all zeros when the tree has no informative split).
pub fn tree_importances<F: Scalar>(tree: &TreeNode<F>, n_features: usize) -> Vec<f64> {
    let mut imp = vec![0.0; n_features];
    let total = tree.n_samples() as f64;
    tree.for_each_split(&mut |node| {
        if let TreeNode::Split {
            feature,
            impurity_decrease,
            n_samples,
            ..
        } = node
        {
            imp[*feature] += (*n_samples as f64 / total) * impurity_decrease;
        }
    });
    let s: f64 = imp.iter().sum();
    if s > 0.0 {
        imp.iter_mut().for_each(|v| *v /= s);
    }
    imp
}

/// Mean of the per-tree normalized importances, renormalized to sum 1.
pub fn feature_importances<F: Scalar>(f: &Forest<F>) -> Result<ImportanceRanking> {
    if f.trees.is_empty() {
        return Err(EmgError::UnfittedForest);
    }
    let d = f.feature_names.len();
    let mut mean = vec![0.0; d];
    for t in &f.trees {
        for (m, v) in mean.iter_mut().zip(tree_importances(t, d)) {
            *m += v;
        }
    }
    let s: f64 = mean.iter().sum();
    let empty = s <= 0.0;
    if empty {
        log::warn!("EmptyImportance: no tree in the forest has an informative split");
    } else {
        mean.iter_mut().for_each(|v| *v /= s);
    }
    Ok(ImportanceRanking::new(f.feature_names.clone(), mean, empty))
}
