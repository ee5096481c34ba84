//! Random forest baseline: CART trees with Gini splits, bootstrap
//! resampling, probability outputs and MDI feature importances.
//!
//! Split scores are compared with exact integer arithmetic (cross-multiplied
//! count products), so tie-breaking is bulletproof: the lowest-index feature
//! wins, then the lowest threshold. Per-tree randomness comes from an
//! independent ChaCha8 stream whose seed is drawn from the forest seed, so
//! fitting is reproducible and trees are independent of scheduling.
//!
//! Per-tree RNG stream layout (replayable from `per_tree_seeds`): when
//! bootstrap is on, the first `n` draws are `random_range(0..n)` resample
//! indices; tree building then consumes feature subsets per node, and only
//! when the subset is a proper subset of the feature set.

use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accum::Sum2;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("training requires both classes in the training data")]
    SingleClass,
    #[error("dimension mismatch: forest expects {expected} features, rows have {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed forest file: {message}")]
    MalformedForest { path: PathBuf, message: String },
}

/// One node of a fitted tree. Traversal sends `x[feature_index] <=
/// threshold` to the left child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        /// (n_node/n_root) · Gini decrease of this split; MDI input.
        gini_decrease_weighted: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Training rows that reached the leaf, as (class 0, class 1).
        class_counts: (u64, u64),
    },
}

impl TreeNode {
    /// P(Class 1) for one row: the leaf's class-1 training fraction.
    pub fn predict_row(&self, row: ndarray::ArrayView1<'_, f64>) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature_index] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
                TreeNode::Leaf {
                    class_counts: (c0, c1),
                } => {
                    return *c1 as f64 / (c0 + c1) as f64;
                }
            }
        }
    }

    fn max_feature_index(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Internal {
                feature_index,
                left,
                right,
                ..
            } => Some(
                (*feature_index)
                    .max(left.max_feature_index().unwrap_or(0))
                    .max(right.max_feature_index().unwrap_or(0)),
            ),
        }
    }
}

/// Number of features each split may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    /// floor(sqrt(n_features)), at least 1.
    Sqrt,
    /// A fixed count; must not exceed n_features at fit time.
    Count(usize),
}

impl MaxFeatures {
    fn resolve(&self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor().max(1.0) as usize,
            MaxFeatures::Count(k) => *k,
        }
    }
}

impl Serialize for MaxFeatures {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            MaxFeatures::Sqrt => serializer.serialize_str("sqrt"),
            MaxFeatures::Count(k) => serializer.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for MaxFeatures {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = MaxFeatures;
            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("\"sqrt\" or a feature count")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<MaxFeatures, E> {
                if v == "sqrt" {
                    Ok(MaxFeatures::Sqrt)
                } else {
                    Err(E::invalid_value(serde::de::Unexpected::Str(v), &self))
                }
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<MaxFeatures, E> {
                Ok(MaxFeatures::Count(v as usize))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<MaxFeatures, E> {
                u64::try_from(v)
                    .map(|v| MaxFeatures::Count(v as usize))
                    .map_err(|_| E::invalid_value(serde::de::Unexpected::Signed(v), &self))
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// Forest hyperparameters. Defaults: 100 trees, sqrt feature subsets,
/// min_samples_leaf 1, unlimited depth, bootstrap on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// A fitted forest. Immutable; inference is safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
    pub config: ForestConfig,
    pub per_tree_seeds: Vec<u64>,
}

/// Exact split score: the weighted child Gini impurity as the rational
/// number `numer / denom` (constant factors dropped). Lower is better;
/// comparison cross-multiplies in u128, so ties are detected exactly.
#[derive(Debug, Clone, Copy)]
struct SplitScore {
    numer: u128,
    denom: u128,
}

impl SplitScore {
    fn new(left: (u64, u64), right: (u64, u64)) -> Self {
        let nl = (left.0 + left.1) as u128;
        let nr = (right.0 + right.1) as u128;
        Self {
            numer: (left.0 as u128 * left.1 as u128) * nr
                + (right.0 as u128 * right.1 as u128) * nl,
            denom: nl * nr,
        }
    }

    fn better_than(&self, other: &SplitScore) -> bool {
        self.numer * other.denom < other.numer * self.denom
    }
}

/// (n_node/n_root) · (Gini(node) − weighted child Gini), computed from
/// integer counts; exactly non-negative.
fn weighted_gini_decrease(
    parent: (u64, u64),
    left: (u64, u64),
    right: (u64, u64),
    n_root: u64,
) -> f64 {
    let n = (parent.0 + parent.1) as i128;
    let nl = (left.0 + left.1) as i128;
    let nr = (right.0 + right.1) as i128;
    let bracket = parent.0 as i128 * parent.1 as i128 * nl * nr
        - left.0 as i128 * left.1 as i128 * n * nr
        - right.0 as i128 * right.1 as i128 * n * nl;
    debug_assert!(bracket >= 0, "Gini decrease must be non-negative");
    2.0 * bracket as f64 / (n_root as i128 * n * nl * nr) as f64
}

struct TreeBuilder<'a> {
    rows: ArrayView2<'a, f64>,
    labels: &'a [u8],
    mtry: usize,
    min_samples_leaf: usize,
    max_depth: Option<usize>,
    n_root: u64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: SplitScore,
    left_counts: (u64, u64),
    right_counts: (u64, u64),
}

impl TreeBuilder<'_> {
    fn counts(&self, indices: &[usize]) -> (u64, u64) {
        let c1 = indices.iter().filter(|&&i| self.labels[i] == 1).count() as u64;
        (indices.len() as u64 - c1, c1)
    }

    fn build(&self, indices: &mut Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let node_counts = self.counts(indices);
        let leaf = TreeNode::Leaf {
            class_counts: node_counts,
        };
        if node_counts.0 == 0 || node_counts.1 == 0 {
            return leaf;
        }
        if self.max_depth.is_some_and(|cap| depth >= cap) {
            return leaf;
        }
        if indices.len() < 2 * self.min_samples_leaf {
            return leaf;
        }

        let n_features = self.rows.ncols();
        let features: Vec<usize> = if self.mtry >= n_features {
            // Trivial subset: the RNG stream is not consumed.
            (0..n_features).collect()
        } else {
            let mut sampled: Vec<usize> = rand::seq::index::sample(rng, n_features, self.mtry)
                .into_iter()
                .collect();
            sampled.sort_unstable();
            sampled
        };

        let Some(best) = self.best_split(indices, &features, node_counts) else {
            return leaf;
        };

        // Stable partition keeps a deterministic row order in the children.
        let (mut left_idx, mut right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.rows[[i, best.feature]] <= best.threshold);
        indices.clear();
        indices.shrink_to_fit();

        let decrease = weighted_gini_decrease(
            node_counts,
            best.left_counts,
            best.right_counts,
            self.n_root,
        );
        let left = self.build(&mut left_idx, depth + 1, rng);
        let right = self.build(&mut right_idx, depth + 1, rng);
        TreeNode::Internal {
            feature_index: best.feature,
            threshold: best.threshold,
            gini_decrease_weighted: decrease,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Scans features in ascending index order and thresholds in ascending
    /// value order, keeping only strict improvements: ties resolve to the
    /// lowest feature index, then the lowest threshold.
    fn best_split(
        &self,
        indices: &[usize],
        features: &[usize],
        node_counts: (u64, u64),
    ) -> Option<BestSplit> {
        let msl = self.min_samples_leaf as u64;
        let n = indices.len() as u64;
        let mut best: Option<BestSplit> = None;
        let mut sorted = indices.to_vec();
        for &f in features {
            sorted.sort_unstable_by(|&a, &b| self.rows[[a, f]].total_cmp(&self.rows[[b, f]]));
            let mut c1_left = 0u64;
            for i in 1..sorted.len() {
                c1_left += u64::from(self.labels[sorted[i - 1]] == 1);
                let a = self.rows[[sorted[i - 1], f]];
                let b = self.rows[[sorted[i], f]];
                if a >= b {
                    continue;
                }
                let n_left = i as u64;
                if n_left < msl || n - n_left < msl {
                    continue;
                }
                let left_counts = (n_left - c1_left, c1_left);
                let right_counts = (node_counts.0 - left_counts.0, node_counts.1 - left_counts.1);
                let score = SplitScore::new(left_counts, right_counts);
                if best
                    .as_ref()
                    .is_none_or(|cur| score.better_than(&cur.score))
                {
                    // Midpoints can round up to the larger value for
                    // adjacent floats; fall back to the left value so the
                    // partition stays consistent with `x <= threshold`.
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                        left_counts,
                        right_counts,
                    });
                }
            }
        }
        best
    }
}

pub(crate) fn validate_config(config: &ForestConfig, n_features: usize) -> Result<(), ForestError> {
    if config.n_trees == 0 {
        return Err(ForestError::InvalidConfig(
            "n_trees must be at least 1".into(),
        ));
    }
    if config.min_samples_leaf == 0 {
        return Err(ForestError::InvalidConfig(
            "min_samples_leaf must be at least 1".into(),
        ));
    }
    if let MaxFeatures::Count(k) = config.max_features {
        if k == 0 || k > n_features {
            return Err(ForestError::InvalidConfig(format!(
                "max_features count must lie in [1, {n_features}], got {k}"
            )));
        }
    }
    Ok(())
}

/// Fits a single CART tree on the given rows (no bootstrap).
///
/// Degenerate input (one row, constant features, one class) yields a single
/// leaf. Panics on empty input or misaligned labels.
pub fn fit_tree<'a>(
    rows: ArrayView2<'a, f64>,
    labels: &'a [u8],
    config: &ForestConfig,
    seed: u64,
) -> TreeNode {
    assert!(rows.nrows() > 0, "fit_tree requires at least one row");
    assert_eq!(rows.nrows(), labels.len(), "labels must match rows");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let builder = TreeBuilder {
        rows,
        labels,
        mtry: config.max_features.resolve(rows.ncols()).min(rows.ncols()),
        min_samples_leaf: config.min_samples_leaf.max(1),
        max_depth: config.max_depth,
        n_root: rows.nrows() as u64,
    };
    let mut indices: Vec<usize> = (0..rows.nrows()).collect();
    builder.build(&mut indices, 0, &mut rng)
}

/// Fits `n_trees` trees, each on its own bootstrap resample (when enabled)
/// under its own seed drawn from `config.seed`.
pub fn fit_forest<'a>(
    rows: ArrayView2<'a, f64>,
    labels: &'a [u8],
    config: &ForestConfig,
) -> Result<Forest, ForestError> {
    let n = rows.nrows();
    let n_features = rows.ncols();
    validate_config(config, n_features)?;
    assert_eq!(n, labels.len(), "labels must match rows");
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(ForestError::SingleClass);
    }

    let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
    let per_tree_seeds: Vec<u64> = (0..config.n_trees).map(|_| seeder.next_u64()).collect();

    let mtry = config.max_features.resolve(n_features).min(n_features);
    let trees = per_tree_seeds
        .iter()
        .map(|&tree_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
            let mut indices: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let builder = TreeBuilder {
                rows,
                labels,
                mtry,
                min_samples_leaf: config.min_samples_leaf,
                max_depth: config.max_depth,
                n_root: n as u64,
            };
            builder.build(&mut indices, 0, &mut rng)
        })
        .collect();

    Ok(Forest {
        trees,
        n_features,
        config: config.clone(),
        per_tree_seeds,
    })
}

/// P(Class 1) per row: the mean over trees of the leaf class-1 fraction.
///
/// Per-tree fractions are brought into a canonical (sorted) order before
/// averaging, so the output does not depend on tree order.
pub fn predict_proba_forest(
    forest: &Forest,
    rows: ArrayView2<'_, f64>,
) -> Result<Vec<f64>, ForestError> {
    if rows.ncols() != forest.n_features {
        return Err(ForestError::DimensionMismatch {
            expected: forest.n_features,
            found: rows.ncols(),
        });
    }
    let mut fractions = vec![0.0f64; forest.trees.len()];
    Ok(rows
        .rows()
        .into_iter()
        .map(|row| {
            for (slot, tree) in fractions.iter_mut().zip(&forest.trees) {
                *slot = tree.predict_row(row);
            }
            fractions.sort_unstable_by(f64::total_cmp);
            let mut acc = Sum2::new();
            for &v in &fractions {
                acc.add(v);
            }
            acc.value() / forest.trees.len() as f64
        })
        .collect())
}

/// MDI importances: per-feature sums of weighted Gini decreases, averaged
/// over trees, normalized to sum to 1. A forest with no splits at all
/// yields the zero vector.
pub fn mdi_importances(forest: &Forest) -> Vec<f64> {
    // Per-feature, per-tree totals; sorted before folding so the result is
    // invariant to tree order, matching prediction behavior.
    let mut per_tree = vec![vec![0.0f64; forest.trees.len()]; forest.n_features];
    for (t, tree) in forest.trees.iter().enumerate() {
        let mut stack = vec![tree];
        while let Some(node) = stack.pop() {
            if let TreeNode::Internal {
                feature_index,
                gini_decrease_weighted,
                left,
                right,
                ..
            } = node
            {
                per_tree[*feature_index][t] += gini_decrease_weighted;
                stack.push(left);
                stack.push(right);
            }
        }
    }
    let mut importances: Vec<f64> = per_tree
        .iter_mut()
        .map(|totals| {
            totals.sort_unstable_by(f64::total_cmp);
            let mut acc = Sum2::new();
            for &v in totals.iter() {
                acc.add(v);
            }
            acc.value() / forest.trees.len() as f64
        })
        .collect();
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in importances.iter_mut() {
            *v /= total;
        }
    }
    importances
}

/// Serializes a forest to pretty JSON. Node objects are tagged by `kind`
/// ("internal" with feature_index, threshold, gini_decrease_weighted, left,
/// right; "leaf" with class_counts).
pub fn save_forest(path: &Path, forest: &Forest) -> Result<(), ForestError> {
    let json = serde_json::to_string_pretty(forest).expect("forest serialization is infallible");
    std::fs::write(path, json).map_err(|source| ForestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a forest saved by [`save_forest`], revalidating feature bounds.
pub fn load_forest(path: &Path) -> Result<Forest, ForestError> {
    let json = std::fs::read_to_string(path).map_err(|source| ForestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let forest: Forest = serde_json::from_str(&json).map_err(|e| ForestError::MalformedForest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    for tree in &forest.trees {
        if let Some(max_idx) = tree.max_feature_index() {
            if max_idx >= forest.n_features {
                return Err(ForestError::MalformedForest {
                    path: path.to_path_buf(),
                    message: format!(
                        "tree references feature {max_idx} but n_features is {}",
                        forest.n_features
                    ),
                });
            }
        }
    }
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticParams};
    use ndarray::{array, Array2, Axis};
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn all_features_config(n_features: usize) -> ForestConfig {
        ForestConfig {
            max_features: MaxFeatures::Count(n_features),
            ..ForestConfig::default()
        }
    }

    #[test]
    fn forced_geometry_single_split() {
        let rows = array![[0.0], [1.0]];
        let tree = fit_tree(rows.view(), &[0, 1], &all_features_config(1), 7);
        match &tree {
            TreeNode::Internal {
                feature_index,
                threshold,
                gini_decrease_weighted,
                left,
                right,
            } => {
                assert_eq!(*feature_index, 0);
                assert_eq!(*threshold, 0.5);
                assert_eq!(*gini_decrease_weighted, 0.5);
                assert_eq!(
                    **left,
                    TreeNode::Leaf {
                        class_counts: (1, 0)
                    }
                );
                assert_eq!(
                    **right,
                    TreeNode::Leaf {
                        class_counts: (0, 1)
                    }
                );
            }
            other => panic!("expected internal root, got {other:?}"),
        }
        assert_eq!(tree.predict_row(array![0.2].view()), 0.0);
        assert_eq!(tree.predict_row(array![0.7].view()), 1.0);
    }

    #[test]
    fn pure_input_yields_single_leaf() {
        let rows = array![[0.0, 3.0], [1.0, -1.0], [2.0, 5.0]];
        let tree = fit_tree(rows.view(), &[1, 1, 1], &all_features_config(2), 0);
        assert_eq!(
            tree,
            TreeNode::Leaf {
                class_counts: (0, 3)
            }
        );
    }

    #[test]
    fn min_samples_leaf_blocks_small_children() {
        let rows = array![[0.0], [1.0], [2.0], [3.0]];
        let labels = [0, 0, 0, 1];
        let config = ForestConfig {
            min_samples_leaf: 2,
            ..all_features_config(1)
        };
        let tree = fit_tree(rows.view(), &labels, &config, 0);
        // The only msl-respecting split is at 1.5 (2|2); purity would want
        // 2.5 (3|1) which msl forbids.
        match tree {
            TreeNode::Internal {
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!(threshold, 1.5);
                assert_eq!(
                    *left,
                    TreeNode::Leaf {
                        class_counts: (2, 0)
                    }
                );
                assert_eq!(
                    *right,
                    TreeNode::Leaf {
                        class_counts: (1, 1)
                    }
                );
            }
            other => panic!("expected one split, got {other:?}"),
        }
    }

    #[test]
    fn max_depth_zero_gives_root_leaf() {
        let rows = array![[0.0], [1.0]];
        let config = ForestConfig {
            max_depth: Some(0),
            ..all_features_config(1)
        };
        let tree = fit_tree(rows.view(), &[0, 1], &config, 0);
        assert_eq!(
            tree,
            TreeNode::Leaf {
                class_counts: (1, 1)
            }
        );
    }

    /// Brute-force decision stump: best single split by training accuracy.
    fn best_stump_accuracy(rows: &Array2<f64>, labels: &[u8]) -> f64 {
        let n = rows.nrows();
        let mut best = {
            let ones = labels.iter().filter(|&&y| y == 1).count();
            ones.max(n - ones) as f64 / n as f64
        };
        for f in 0..rows.ncols() {
            let mut vals: Vec<f64> = rows.column(f).to_vec();
            vals.sort_unstable_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = w[0] + (w[1] - w[0]) / 2.0;
                for (lo, hi) in [(0u8, 1u8), (1, 0)] {
                    let correct = (0..n)
                        .filter(|&i| {
                            let pred = if rows[[i, f]] <= thr { lo } else { hi };
                            pred == labels[i]
                        })
                        .count();
                    best = best.max(correct as f64 / n as f64);
                }
            }
        }
        best
    }

    #[test]
    fn tree_beats_or_matches_best_stump() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let rows = Array2::from_shape_fn((50, 2), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..50)
            .map(|i| u8::from(rows[[i, 0]] + 0.3 * rows[[i, 1]] > 0.1) ^ u8::from(i % 11 == 0))
            .collect();
        let tree = fit_tree(rows.view(), &labels, &all_features_config(2), 3);
        let correct = (0..50)
            .filter(|&i| {
                let p = tree.predict_row(rows.row(i));
                u8::from(p >= 0.5) == labels[i]
            })
            .count();
        let tree_acc = correct as f64 / 50.0;
        assert!(tree_acc >= best_stump_accuracy(&rows, &labels));
    }

    #[test]
    fn forest_is_deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = Array2::from_shape_fn((60, 3), |_| rng.random_range(-2.0..2.0));
        let labels: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
        let config = ForestConfig {
            n_trees: 7,
            ..ForestConfig::default()
        };
        let f1 = fit_forest(rows.view(), &labels, &config).unwrap();
        let f2 = fit_forest(rows.view(), &labels, &config).unwrap();
        assert_eq!(f1, f2);
        let p1 = predict_proba_forest(&f1, rows.view()).unwrap();
        let p2 = predict_proba_forest(&f2, rows.view()).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn single_tree_without_bootstrap_equals_fit_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows = Array2::from_shape_fn((40, 4), |_| rng.random_range(0.0..1.0));
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 18)).collect();
        let config = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            seed: 99,
            ..ForestConfig::default()
        };
        let forest = fit_forest(rows.view(), &labels, &config).unwrap();
        let solo = fit_tree(rows.view(), &labels, &config, forest.per_tree_seeds[0]);
        assert_eq!(forest.trees[0], solo);
    }

    #[test]
    fn fit_forest_rejects_bad_inputs() {
        let rows = array![[0.0], [1.0]];
        assert!(matches!(
            fit_forest(rows.view(), &[1, 1], &ForestConfig::default()).unwrap_err(),
            ForestError::SingleClass
        ));
        let config = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(matches!(
            fit_forest(rows.view(), &[0, 1], &config).unwrap_err(),
            ForestError::InvalidConfig(_)
        ));
        let config = ForestConfig {
            max_features: MaxFeatures::Count(5),
            ..ForestConfig::default()
        };
        assert!(matches!(
            fit_forest(rows.view(), &[0, 1], &config).unwrap_err(),
            ForestError::InvalidConfig(_)
        ));
    }

    #[test]
    fn predict_trivial_vote_examples() {
        let pure_one = Forest {
            trees: vec![TreeNode::Leaf {
                class_counts: (0, 5),
            }],
            n_features: 2,
            config: ForestConfig::default(),
            per_tree_seeds: vec![0],
        };
        let rows = array![[0.0, 0.0]];
        assert_eq!(
            predict_proba_forest(&pure_one, rows.view()).unwrap(),
            vec![1.0]
        );

        let split_vote = Forest {
            trees: vec![
                TreeNode::Leaf {
                    class_counts: (0, 3),
                },
                TreeNode::Leaf {
                    class_counts: (4, 0),
                },
            ],
            n_features: 2,
            config: ForestConfig::default(),
            per_tree_seeds: vec![0, 1],
        };
        assert_eq!(
            predict_proba_forest(&split_vote, rows.view()).unwrap(),
            vec![0.5]
        );

        assert!(matches!(
            predict_proba_forest(&pure_one, array![[1.0]].view()).unwrap_err(),
            ForestError::DimensionMismatch {
                expected: 2,
                found: 1
            }
        ));
    }

    /// Independent recursive traversal, plain-average vote.
    fn oracle_predict(forest: &Forest, rows: &Array2<f64>) -> Vec<f64> {
        fn walk(node: &TreeNode, row: ndarray::ArrayView1<'_, f64>) -> f64 {
            match node {
                TreeNode::Leaf {
                    class_counts: (c0, c1),
                } => *c1 as f64 / (*c0 as f64 + *c1 as f64),
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if row[*feature_index] <= *threshold {
                        walk(left, row)
                    } else {
                        walk(right, row)
                    }
                }
            }
        }
        rows.rows()
            .into_iter()
            .map(|row| {
                forest.trees.iter().map(|t| walk(t, row)).sum::<f64>() / forest.trees.len() as f64
            })
            .collect()
    }

    #[test]
    fn predictions_match_traversal_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rows = Array2::from_shape_fn((30, 3), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..30).map(|i| u8::from(rows[[i, 1]] > 0.0)).collect();
        let config = ForestConfig {
            n_trees: 5,
            ..ForestConfig::default()
        };
        let forest = fit_forest(rows.view(), &labels, &config).unwrap();
        let test_rows = Array2::from_shape_fn((10, 3), |_| rng.random_range(-1.0..1.0));
        let got = predict_proba_forest(&forest, test_rows.view()).unwrap();
        let want = oracle_predict(&forest, &test_rows);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
            assert!((0.0..=1.0).contains(g));
        }
    }

    #[test]
    fn predictions_invariant_to_tree_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rows = Array2::from_shape_fn((50, 4), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..50).map(|i| u8::from(rows[[i, 0]] > 0.0)).collect();
        let config = ForestConfig {
            n_trees: 9,
            ..ForestConfig::default()
        };
        let forest = fit_forest(rows.view(), &labels, &config).unwrap();
        let reference = predict_proba_forest(&forest, rows.view()).unwrap();
        let reference_mdi = mdi_importances(&forest);
        let mut shuffled = forest.clone();
        for _ in 0..5 {
            shuffled.trees.shuffle(&mut rng);
            assert_eq!(
                predict_proba_forest(&shuffled, rows.view()).unwrap(),
                reference
            );
            assert_eq!(mdi_importances(&shuffled), reference_mdi);
        }
    }

    #[test]
    fn constant_duplicate_feature_never_changes_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rows = Array2::from_shape_fn((40, 2), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..40)
            .map(|i| u8::from(rows[[i, 0]] + rows[[i, 1]] > 0.0))
            .collect();
        let padded = ndarray::concatenate(
            Axis(1),
            &[rows.view(), Array2::from_elem((40, 1), 7.25).view()],
        )
        .unwrap();

        // Full feature subsets on both sides keep the RNG streams aligned;
        // the constant column offers no candidate splits.
        let base = fit_forest(
            rows.view(),
            &labels,
            &ForestConfig {
                n_trees: 5,
                max_features: MaxFeatures::Count(2),
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let with_const = fit_forest(
            padded.view(),
            &labels,
            &ForestConfig {
                n_trees: 5,
                max_features: MaxFeatures::Count(3),
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let p_base = predict_proba_forest(&base, rows.view()).unwrap();
        let p_padded = predict_proba_forest(&with_const, padded.view()).unwrap();
        assert_eq!(p_base, p_padded);
    }

    #[test]
    fn mdi_one_hot_when_single_feature_splits() {
        // Features 0..3 constant, feature 3 equals the label.
        let n = 20;
        let rows = Array2::from_shape_fn((n, 4), |(i, j)| match j {
            3 => (i % 2) as f64,
            _ => 1.5,
        });
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let config = ForestConfig {
            n_trees: 10,
            max_features: MaxFeatures::Count(4),
            ..ForestConfig::default()
        };
        let forest = fit_forest(rows.view(), &labels, &config).unwrap();
        let mdi = mdi_importances(&forest);
        assert_eq!(mdi, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn mdi_zero_vector_without_splits() {
        let rows = Array2::from_elem((6, 3), 2.0);
        let labels = [0, 1, 0, 1, 0, 1];
        let config = ForestConfig {
            n_trees: 4,
            max_features: MaxFeatures::Count(3),
            ..ForestConfig::default()
        };
        let forest = fit_forest(rows.view(), &labels, &config).unwrap();
        assert_eq!(mdi_importances(&forest), vec![0.0; 3]);
    }

    #[test]
    fn mdi_normalizes_and_stays_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let rows = Array2::from_shape_fn((80, 5), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..80)
            .map(|i| u8::from(rows[[i, 2]] - rows[[i, 4]] > 0.0))
            .collect();
        let forest = fit_forest(rows.view(), &labels, &ForestConfig::default()).unwrap();
        let mdi = mdi_importances(&forest);
        assert_eq!(mdi.len(), 5);
        assert!(mdi.iter().all(|&v| v >= 0.0));
        assert!((mdi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pronoun_ratio_ranks_first_among_aux_importances_on_synthetic_data() {
        let params = SyntheticParams {
            n: 2000,
            d: 8,
            separation: 2.0,
            aux_signal: 2.0,
            class0_fraction: 0.5,
            seed: 5,
        };
        let (dataset, _) = generate_synthetic(&params).unwrap();
        let x = crate::data::concat_features(&dataset);
        let config = ForestConfig {
            n_trees: 40,
            ..ForestConfig::default()
        };
        let forest = fit_forest(x.view(), &dataset.labels, &config).unwrap();
        let mdi = mdi_importances(&forest);
        let aux = &mdi[mdi.len() - 4..];
        let pronoun = aux[2];
        assert!(
            aux.iter().enumerate().all(|(i, &v)| i == 2 || v < pronoun),
            "aux importances {aux:?} should peak at pronoun_ratio"
        );
    }

    #[test]
    fn bootstrap_replay_and_training_accuracy_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let n = 100;
        let rows = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..n)
            .map(|i| u8::from(rows[[i, 0]] * rows[[i, 1]] > 0.0))
            .collect();
        let config = ForestConfig {
            n_trees: 8,
            ..ForestConfig::default()
        };
        let forest = fit_forest(rows.view(), &labels, &config).unwrap();
        for (tree, &tree_seed) in forest.trees.iter().zip(&forest.per_tree_seeds) {
            // Replay the documented per-tree stream prefix.
            let mut tree_rng = ChaCha8Rng::seed_from_u64(tree_seed);
            let boot: Vec<usize> = (0..n).map(|_| tree_rng.random_range(0..n)).collect();
            let ones = boot.iter().filter(|&&i| labels[i] == 1).count();
            let majority = ones.max(n - ones) as f64 / n as f64;
            let correct = boot
                .iter()
                .filter(|&&i| u8::from(tree.predict_row(rows.row(i)) >= 0.5) == labels[i])
                .count();
            assert!(correct as f64 / n as f64 >= majority);
        }
    }

    #[test]
    fn forest_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let rows = Array2::from_shape_fn((30, 2), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<u8> = (0..30).map(|i| u8::from(rows[[i, 1]] > 0.2)).collect();
        let config = ForestConfig {
            n_trees: 3,
            max_features: MaxFeatures::Count(1),
            ..ForestConfig::default()
        };
        let forest = fit_forest(rows.view(), &labels, &config).unwrap();

        let dir = TempDir::new().unwrap();
        let path = dir.path().join("forest.json");
        save_forest(&path, &forest).unwrap();
        let json = std::fs::read_to_string(&path).unwrap();
        assert!(json.contains("\"kind\": \"internal\"") || json.contains("\"kind\": \"leaf\""));
        assert!(json.contains("\"max_features\": 1"));
        let back = load_forest(&path).unwrap();
        assert_eq!(back, forest);

        let sqrt_json = serde_json::to_string(&ForestConfig::default()).unwrap();
        assert!(sqrt_json.contains("\"max_features\":\"sqrt\""));
        let parsed: ForestConfig = serde_json::from_str(&sqrt_json).unwrap();
        assert_eq!(parsed, ForestConfig::default());
    }

    #[test]
    fn load_forest_rejects_out_of_range_features() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.json");
        let forest = Forest {
            trees: vec![TreeNode::Internal {
                feature_index: 9,
                threshold: 0.0,
                gini_decrease_weighted: 0.1,
                left: Box::new(TreeNode::Leaf {
                    class_counts: (1, 0),
                }),
                right: Box::new(TreeNode::Leaf {
                    class_counts: (0, 1),
                }),
            }],
            n_features: 2,
            config: ForestConfig::default(),
            per_tree_seeds: vec![1],
        };
        std::fs::write(&path, serde_json::to_string(&forest).unwrap()).unwrap();
        assert!(matches!(
            load_forest(&path).unwrap_err(),
            ForestError::MalformedForest { .. }
        ));
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(
            load_forest(&path).unwrap_err(),
            ForestError::MalformedForest { .. }
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn forest_probabilities_bounded_and_mdi_normalized(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(10..60);
            let k = rng.random_range(1..5);
            let rows = Array2::from_shape_fn((n, k), |_| rng.random_range(-3.0..3.0));
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let config = ForestConfig {
                n_trees: rng.random_range(1..6),
                seed,
                ..ForestConfig::default()
            };
            let forest = fit_forest(rows.view(), &labels, &config).unwrap();
            let probs = predict_proba_forest(&forest, rows.view()).unwrap();
            prop_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
            let mdi = mdi_importances(&forest);
            prop_assert_eq!(mdi.len(), k);
            prop_assert!(mdi.iter().all(|&v| v >= 0.0));
            let total: f64 = mdi.iter().sum();
            prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
        }
    }
}
