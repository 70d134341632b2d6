//! Tree-based comparison baselines: CART regression trees, bootstrap-
//! aggregated random forests, and least-squares gradient boosting with
//! shrinkage.
//!
//! Trees consume min-max-normalized inputs; targets stay in their original
//! units (tree fitting is target-scale-equivariant, so the stress values
//! are used directly).

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold, Samples};
use crate::error::Error;
use crate::seeds;
use crate::Result;

/// A regression tree: internal nodes route on `x[feature] <= threshold`,
/// leaves predict the mean target of the training rows that reached them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match self {
            TreeNode::Leaf { value } => {
                if !value.is_finite() {
                    return Err(Error::model(path, format!("non-finite leaf value {value}")));
                }
            }
            TreeNode::Internal {
                threshold,
                left,
                right,
                ..
            } => {
                if !threshold.is_finite() {
                    return Err(Error::model(path, format!("non-finite threshold {threshold}")));
                }
                left.validate(&format!("{path}.left"))?;
                right.validate(&format!("{path}.right"))?;
            }
        }
        Ok(())
    }
}

/// Routes one input vector through the tree.
pub fn predict_tree(tree: &TreeNode, x: &[f64]) -> f64 {
    let mut node = tree;
    loop {
        match node {
            TreeNode::Leaf { value } => return *value,
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                node = if x[*feature] <= *threshold { left } else { right };
            }
        }
    }
}

/// Node impurity measure used when scoring splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Reduction in the sum of squared deviations about the node mean.
    VarianceReduction,
    /// Reduction in the sum of absolute deviations about the node
    /// lower-median.
    MaeReduction,
}

/// Hyperparameters shared by the three tree baselines. `n_trees`,
/// `max_features`, `bootstrap` and `shrinkage` only apply to the ensemble
/// variants that use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeHyperParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub criterion: SplitCriterion,
    pub n_trees: usize,
    /// Number of features considered per split (forest).
    pub max_features: usize,
    /// Resample the training rows with replacement per tree (forest).
    pub bootstrap: bool,
    /// Boosting step damping ν in (0, 1].
    pub shrinkage: f64,
}

impl Default for TreeHyperParams {
    fn default() -> Self {
        TreeHyperParams {
            max_depth: 8,
            min_samples_leaf: 1,
            criterion: SplitCriterion::VarianceReduction,
            n_trees: 100,
            max_features: 4,
            bootstrap: true,
            shrinkage: 0.1,
        }
    }
}

impl TreeHyperParams {
    /// Gradient-boosting defaults: shallow trees, 100 rounds, ν = 0.1.
    pub fn boost_default() -> Self {
        TreeHyperParams {
            max_depth: 3,
            ..TreeHyperParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_leaf == 0 || self.n_trees == 0 {
            return Err(Error::config(
                "max_depth, min_samples_leaf and n_trees must all be > 0".to_string(),
            ));
        }
        if self.max_features == 0 {
            return Err(Error::config("max_features must be > 0".to_string()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::config(format!(
                "shrinkage must lie in (0, 1], got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

/// Lower-median(-based) running sum of absolute deviations. Insertion-only:
/// the split sweep feeds samples in feature order from each end.
struct MadAccumulator {
    below: BinaryHeap<OrderedVal>,          // max-heap of the lower half
    above: BinaryHeap<Reverse<OrderedVal>>, // min-heap of the upper half
    sum_below: f64,
    sum_above: f64,
}

#[derive(PartialEq)]
struct OrderedVal(f64);

impl Eq for OrderedVal {}

impl PartialOrd for OrderedVal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedVal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl MadAccumulator {
    fn new() -> Self {
        MadAccumulator {
            below: BinaryHeap::new(),
            above: BinaryHeap::new(),
            sum_below: 0.0,
            sum_above: 0.0,
        }
    }

    fn push(&mut self, y: f64) {
        if self.below.is_empty() || y <= self.below.peek().unwrap().0 {
            self.below.push(OrderedVal(y));
            self.sum_below += y;
        } else {
            self.above.push(Reverse(OrderedVal(y)));
            self.sum_above += y;
        }
        // keep |below| in {|above|, |above| + 1}
        if self.below.len() > self.above.len() + 1 {
            let moved = self.below.pop().unwrap().0;
            self.sum_below -= moved;
            self.sum_above += moved;
            self.above.push(Reverse(OrderedVal(moved)));
        } else if self.above.len() > self.below.len() {
            let Reverse(OrderedVal(moved)) = self.above.pop().unwrap();
            self.sum_above -= moved;
            self.sum_below += moved;
            self.below.push(OrderedVal(moved));
        }
    }

    /// Σ |y − median| with the lower median as the center.
    fn sum_abs_dev(&self) -> f64 {
        match self.below.peek() {
            None => 0.0,
            Some(m) => {
                let m = m.0;
                (self.sum_above - self.above.len() as f64 * m)
                    + (self.below.len() as f64 * m - self.sum_below)
            }
        }
    }
}

/// Node impurity of a target set under the given criterion (sum, not mean).
fn impurity(ys: &[f64], criterion: SplitCriterion) -> f64 {
    match criterion {
        SplitCriterion::VarianceReduction => {
            let n = ys.len() as f64;
            let sum: f64 = ys.iter().sum();
            let sum_sq: f64 = ys.iter().map(|y| y * y).sum();
            sum_sq - sum * sum / n
        }
        SplitCriterion::MaeReduction => {
            let mut acc = MadAccumulator::new();
            for &y in ys {
                acc.push(y);
            }
            acc.sum_abs_dev()
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    reduction: f64,
    /// Count of rows routed left.
    n_left: usize,
}

/// Scans all candidate thresholds (midpoints of consecutive distinct sorted
/// values) of one feature; returns the best admissible split, if any.
fn best_split_for_feature(
    data: &Samples,
    indices: &[usize],
    feature: usize,
    parent_impurity: f64,
    tol: f64,
    hp: &TreeHyperParams,
    sorted: &mut Vec<usize>,
) -> Option<BestSplit> {
    let m = indices.len();
    sorted.clear();
    sorted.extend_from_slice(indices);
    sorted.sort_unstable_by(|&a, &b| {
        data.row(a)[feature]
            .partial_cmp(&data.row(b)[feature])
            .expect("feature values are finite")
    });

    let msl = hp.min_samples_leaf;
    let mut best: Option<BestSplit> = None;
    let consider = |pos: usize, left_imp: f64, right_imp: f64, best: &mut Option<BestSplit>| {
        // split between sorted positions pos and pos+1
        let v_lo = data.row(sorted[pos])[feature];
        let v_hi = data.row(sorted[pos + 1])[feature];
        if v_lo == v_hi {
            return;
        }
        let n_left = pos + 1;
        if n_left < msl || m - n_left < msl {
            return;
        }
        let reduction = parent_impurity - left_imp - right_imp;
        if reduction > tol && best.as_ref().is_none_or(|b| reduction > b.reduction + tol) {
            *best = Some(BestSplit {
                feature,
                threshold: v_lo + 0.5 * (v_hi - v_lo),
                reduction,
                n_left,
            });
        }
    };

    match hp.criterion {
        SplitCriterion::VarianceReduction => {
            let total_sum: f64 = sorted.iter().map(|&i| data.targets[i]).sum();
            let total_sq: f64 = sorted.iter().map(|&i| data.targets[i] * data.targets[i]).sum();
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for (pos, &idx) in sorted[..m - 1].iter().enumerate() {
                let y = data.targets[idx];
                left_sum += y;
                left_sq += y * y;
                let n_l = (pos + 1) as f64;
                let n_r = (m - pos - 1) as f64;
                let left_imp = left_sq - left_sum * left_sum / n_l;
                let right_sum = total_sum - left_sum;
                let right_imp = (total_sq - left_sq) - right_sum * right_sum / n_r;
                consider(pos, left_imp, right_imp, &mut best);
            }
        }
        SplitCriterion::MaeReduction => {
            // two insertion-only sweeps: prefix SADs ascending, suffix SADs
            // descending
            let mut prefix = Vec::with_capacity(m);
            let mut acc = MadAccumulator::new();
            for &i in sorted.iter() {
                acc.push(data.targets[i]);
                prefix.push(acc.sum_abs_dev());
            }
            let mut suffix = vec![0.0; m + 1];
            let mut acc = MadAccumulator::new();
            for (offset, &i) in sorted.iter().rev().enumerate() {
                acc.push(data.targets[i]);
                suffix[m - 1 - offset] = acc.sum_abs_dev();
            }
            for pos in 0..m - 1 {
                consider(pos, prefix[pos], suffix[pos + 1], &mut best);
            }
        }
    }
    best
}

/// Chooses the feature subset considered at one node: all features when
/// `max_features` covers them, otherwise a random draw without replacement.
fn feature_subset(d: usize, hp: &TreeHyperParams, rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
    let k = hp.max_features.min(d);
    if k >= d {
        return (0..d).collect();
    }
    match rng {
        None => (0..d).collect(),
        Some(rng) => {
            let mut pool: Vec<usize> = (0..d).collect();
            for i in 0..k {
                let j = i + rng.random_range(0..pool.len() - i);
                pool.swap(i, j);
            }
            let mut subset = pool[..k].to_vec();
            subset.sort_unstable();
            subset
        }
    }
}

fn leaf_mean(data: &Samples, indices: &[usize]) -> TreeNode {
    let value = indices.iter().map(|&i| data.targets[i]).sum::<f64>() / indices.len() as f64;
    TreeNode::Leaf { value }
}

fn build_node(
    data: &Samples,
    indices: &[usize],
    depth: usize,
    hp: &TreeHyperParams,
    rng: &mut Option<&mut ChaCha8Rng>,
    sorted_scratch: &mut Vec<usize>,
) -> TreeNode {
    let first = data.targets[indices[0]];
    let all_equal = indices.iter().all(|&i| data.targets[i] == first);
    if depth >= hp.max_depth || indices.len() < 2 * hp.min_samples_leaf || all_equal {
        return leaf_mean(data, indices);
    }

    let ys: Vec<f64> = indices.iter().map(|&i| data.targets[i]).collect();
    let parent_impurity = impurity(&ys, hp.criterion);
    // Equal partitions reachable through different features give reductions
    // that only differ by rounding noise; resolve such ties by scan order
    // (lowest feature, then lowest threshold) instead of by noise.
    let tol = 1e-9 * parent_impurity.abs();
    let features = feature_subset(data.dim, hp, rng.as_deref_mut());
    let mut best: Option<BestSplit> = None;
    for f in features {
        if let Some(cand) =
            best_split_for_feature(data, indices, f, parent_impurity, tol, hp, sorted_scratch)
        {
            if best.as_ref().is_none_or(|b| cand.reduction > b.reduction + tol) {
                best = Some(cand);
            }
        }
    }
    let Some(split) = best else {
        return leaf_mean(data, indices);
    };

    let mut left_idx = Vec::with_capacity(split.n_left);
    let mut right_idx = Vec::with_capacity(indices.len() - split.n_left);
    for &i in indices.iter() {
        if data.row(i)[split.feature] <= split.threshold {
            left_idx.push(i);
        } else {
            right_idx.push(i);
        }
    }
    let left = build_node(data, &left_idx, depth + 1, hp, rng, sorted_scratch);
    let right = build_node(data, &right_idx, depth + 1, hp, rng, sorted_scratch);
    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Fits a single CART by greedy top-down splitting: at each node the
/// (feature, threshold) pair with the largest impurity reduction wins, with
/// thresholds drawn from midpoints of consecutive sorted distinct values.
/// Stops on `max_depth`, `min_samples_leaf`, or zero reduction.
pub fn fit_cart(data: &Samples, hp: &TreeHyperParams) -> Result<TreeNode> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot fit a tree on an empty dataset".to_string()));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut scratch = Vec::new();
    Ok(build_node(data, &indices, 0, hp, &mut None, &mut scratch))
}

/// Bootstrap-aggregated forest of CARTs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub hyper_params: TreeHyperParams,
    pub seed: u64,
}

/// Fits `hp.n_trees` CARTs, each on a bootstrap resample (when
/// `hp.bootstrap`) and with `hp.max_features` features considered per node.
/// Deterministic given `seed`; tree fits may run on a worker pool.
pub fn fit_random_forest(data: &Samples, hp: &TreeHyperParams, seed: u64) -> Result<ForestModel> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot fit a forest on an empty dataset".to_string()));
    }
    let n = data.len();
    let trees: Vec<TreeNode> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::derive_rng(seed, &format!("forest-tree-{t}"));
            let indices: Vec<usize> = if hp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut scratch = Vec::new();
            let needs_rng = hp.max_features < data.dim;
            let mut rng_opt = if needs_rng { Some(&mut rng) } else { None };
            build_node(data, &indices, 0, hp, &mut rng_opt, &mut scratch)
        })
        .collect();
    Ok(ForestModel {
        trees,
        hyper_params: hp.clone(),
        seed,
    })
}

impl ForestModel {
    /// Mean of the member tree predictions.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| predict_tree(t, x)).sum();
        sum / self.trees.len() as f64
    }
}

/// Stagewise least-squares boosting model: F(x) = F0 + ν Σ tree_m(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    /// F0, the training-target mean.
    pub initial: f64,
    pub shrinkage: f64,
    pub trees: Vec<TreeNode>,
}

/// Least-squares gradient boosting: each round fits a depth-limited CART to
/// the current residuals under the squared-error criterion (regardless of
/// `hp.criterion`), damped by `hp.shrinkage`.
pub fn fit_gradient_boost(data: &Samples, hp: &TreeHyperParams) -> Result<BoostModel> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot fit a booster on an empty dataset".to_string()));
    }
    let residual_hp = TreeHyperParams {
        criterion: SplitCriterion::VarianceReduction,
        ..hp.clone()
    };
    let n = data.len();
    let initial = data.targets.iter().sum::<f64>() / n as f64;
    let mut predictions = vec![initial; n];
    let mut residual_data = Samples {
        inputs: data.inputs.clone(),
        targets: vec![0.0; n],
        dim: data.dim,
    };
    let mut trees = Vec::with_capacity(hp.n_trees);
    for _ in 0..hp.n_trees {
        for ((r, &y), &p) in residual_data
            .targets
            .iter_mut()
            .zip(&data.targets)
            .zip(&predictions)
        {
            *r = y - p;
        }
        let indices: Vec<usize> = (0..n).collect();
        let mut scratch = Vec::new();
        let tree = build_node(
            &residual_data,
            &indices,
            0,
            &residual_hp,
            &mut None,
            &mut scratch,
        );
        for (i, p) in predictions.iter_mut().enumerate() {
            *p += hp.shrinkage * predict_tree(&tree, data.row(i));
        }
        trees.push(tree);
    }
    Ok(BoostModel {
        initial,
        shrinkage: hp.shrinkage,
        trees,
    })
}

impl BoostModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.initial
            + self.shrinkage
                * self
                    .trees
                    .iter()
                    .map(|t| predict_tree(t, x))
                    .sum::<f64>()
    }
}

/// Which baseline a grid search tunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Cart,
    Forest,
    Boost,
}

/// A fitted baseline of any kind, with one prediction interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeModel {
    Cart(TreeNode),
    Forest(ForestModel),
    Boost(BoostModel),
}

impl TreeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TreeModel::Cart(tree) => predict_tree(tree, x),
            TreeModel::Forest(forest) => forest.predict(x),
            TreeModel::Boost(boost) => boost.predict(x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TreeModel::Cart(tree) => tree.validate("tree"),
            TreeModel::Forest(f) => {
                if f.trees.is_empty() {
                    return Err(Error::model("trees", "forest has no trees".to_string()));
                }
                for (i, t) in f.trees.iter().enumerate() {
                    t.validate(&format!("trees[{i}]"))?;
                }
                Ok(())
            }
            TreeModel::Boost(b) => {
                if !b.initial.is_finite() {
                    return Err(Error::model("initial", "non-finite".to_string()));
                }
                if !(b.shrinkage > 0.0 && b.shrinkage <= 1.0) {
                    return Err(Error::model(
                        "shrinkage",
                        format!("must lie in (0, 1], got {}", b.shrinkage),
                    ));
                }
                for (i, t) in b.trees.iter().enumerate() {
                    t.validate(&format!("trees[{i}]"))?;
                }
                Ok(())
            }
        }
    }
}

/// Fits one baseline of the requested kind.
pub fn fit_baseline(
    kind: BaselineKind,
    data: &Samples,
    hp: &TreeHyperParams,
    seed: u64,
) -> Result<TreeModel> {
    match kind {
        BaselineKind::Cart => Ok(TreeModel::Cart(fit_cart(data, hp)?)),
        BaselineKind::Forest => Ok(TreeModel::Forest(fit_random_forest(data, hp, seed)?)),
        BaselineKind::Boost => Ok(TreeModel::Boost(fit_gradient_boost(data, hp)?)),
    }
}

/// One grid cell's cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub hyper_params: TreeHyperParams,
    /// Mean |(truth − pred) / truth| across held-out folds.
    pub mean_abs_residual: f64,
}

/// Grid search output: the winning cell plus the full CV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: TreeHyperParams,
    pub table: Vec<CvCell>,
}

/// k-fold cross-validated grid search scored by mean absolute relative
/// residual. Ties prefer fewer trees, then shallower depth. Deterministic
/// given `seed`.
pub fn grid_search(
    kind: BaselineKind,
    data: &Samples,
    grid: &[TreeHyperParams],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::config("hyperparameter grid is empty".to_string()));
    }
    for hp in grid {
        hp.validate()?;
    }
    let folds = kfold(data.len(), k, seeds::derive_seed(seed, "grid-folds"))?;
    let mut table = Vec::with_capacity(grid.len());
    for (cell, hp) in grid.iter().enumerate() {
        let mut total = 0.0;
        let mut count = 0usize;
        for fold in 0..k {
            let fit_idx = folds.complement_indices(fold);
            let mut fit_set = Samples::new(data.dim);
            for &i in &fit_idx {
                fit_set.push(data.row(i), data.targets[i]);
            }
            let model = fit_baseline(
                kind,
                &fit_set,
                hp,
                seeds::derive_seed(seed, &format!("grid-cell-{cell}-fold-{fold}")),
            )?;
            for i in folds.fold_indices(fold) {
                let truth = data.targets[i];
                if truth == 0.0 {
                    return Err(Error::domain(format!(
                        "sample {i}: zero target makes the relative residual undefined"
                    )));
                }
                total += ((truth - model.predict(data.row(i))) / truth).abs();
                count += 1;
            }
        }
        table.push(CvCell {
            hyper_params: hp.clone(),
            mean_abs_residual: total / count as f64,
        });
    }
    let mut best = &table[0];
    for cell in &table[1..] {
        let better = cell.mean_abs_residual < best.mean_abs_residual
            || (cell.mean_abs_residual == best.mean_abs_residual
                && (cell.hyper_params.n_trees, cell.hyper_params.max_depth)
                    < (best.hyper_params.n_trees, best.hyper_params.max_depth));
        if better {
            best = cell;
        }
    }
    Ok(GridSearchResult {
        best: best.hyper_params.clone(),
        table,
    })
}

#[derive(Serialize, Deserialize)]
struct TreeModelFile {
    format: String,
    version: u32,
    model: TreeModel,
}

const FORMAT_TAG: &str = "vessel-surrogate/tree-model";
const FORMAT_VERSION: u32 = 1;

/// Writes a fitted baseline as structured JSON text (nested node records).
pub fn save_model(model: &TreeModel, path: &Path) -> Result<()> {
    model.validate()?;
    let file = TreeModelFile {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads and validates a baseline model file.
pub fn load_model(path: &Path) -> Result<TreeModel> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: TreeModelFile = serde_json::from_str(&text)?;
    if file.format != FORMAT_TAG {
        return Err(Error::model(
            "format",
            format!("expected '{FORMAT_TAG}', got '{}'", file.format),
        ));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::model(
            "version",
            format!("unsupported version {}", file.version),
        ));
    }
    file.model.validate()?;
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn one_d(pairs: &[(f64, f64)]) -> Samples {
        let mut s = Samples::new(1);
        for &(x, y) in pairs {
            s.push(&[x], y);
        }
        s
    }

    fn random_samples(n: usize, d: usize, seed: u64) -> Samples {
        let mut rng = seeds::rng_from(seed);
        let mut s = Samples::new(d);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let y = rng.random::<f64>() * 10.0 + 1.0;
            s.push(&x, y);
        }
        s
    }

    fn deep() -> TreeHyperParams {
        TreeHyperParams {
            max_depth: usize::MAX,
            bootstrap: false,
            ..TreeHyperParams::default()
        }
    }

    #[test]
    fn constant_targets_become_a_single_leaf() {
        let data = one_d(&[(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)]);
        let tree = fit_cart(&data, &TreeHyperParams::default()).unwrap();
        assert_eq!(tree, TreeNode::Leaf { value: 5.0 });
    }

    #[test]
    fn single_sample_is_an_exact_leaf() {
        let data = one_d(&[(3.0, 7.25)]);
        let tree = fit_cart(&data, &TreeHyperParams::default()).unwrap();
        assert_eq!(tree, TreeNode::Leaf { value: 7.25 });
    }

    #[test]
    fn hand_checked_stump() {
        // candidates 0.5, 1.5, 2.5; variance reduction is maximal at 1.5
        let data = one_d(&[(0.0, 0.0), (1.0, 0.0), (2.0, 10.0), (3.0, 10.0)]);
        let hp = TreeHyperParams {
            max_depth: 1,
            ..TreeHyperParams::default()
        };
        let tree = fit_cart(&data, &hp).unwrap();
        match &tree {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
                assert_eq!(**left, TreeNode::Leaf { value: 0.0 });
                assert_eq!(**right, TreeNode::Leaf { value: 10.0 });
            }
            other => panic!("expected a stump, got {other:?}"),
        }
        assert_eq!(predict_tree(&tree, &[0.5]), 0.0);
        assert_eq!(predict_tree(&tree, &[2.5]), 10.0);
    }

    #[test]
    fn unlimited_depth_memorizes_distinct_inputs() {
        let data = random_samples(60, 4, 3);
        let tree = fit_cart(&data, &deep()).unwrap();
        for i in 0..data.len() {
            assert_eq!(predict_tree(&tree, data.row(i)), data.targets[i]);
        }
    }

    #[test]
    fn piecewise_constant_prediction_count() {
        let data = random_samples(80, 4, 5);
        let hp = TreeHyperParams {
            max_depth: 4,
            ..TreeHyperParams::default()
        };
        let tree = fit_cart(&data, &hp).unwrap();
        let mut rng = seeds::rng_from(9);
        let mut distinct: Vec<u64> = (0..500)
            .map(|_| {
                let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
                predict_tree(&tree, &x).to_bits()
            })
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() <= tree.leaf_count());
    }

    /// Exhaustive reference: recomputes impurities naively for every
    /// (feature, threshold) candidate at every node.
    mod naive {
        use super::*;

        fn sse(ys: &[f64]) -> f64 {
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            ys.iter().map(|y| (y - mean) * (y - mean)).sum()
        }

        pub fn build(data: &Samples, indices: &[usize], depth: usize, hp: &TreeHyperParams) -> TreeNode {
            let ys: Vec<f64> = indices.iter().map(|&i| data.targets[i]).collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let all_equal = ys.iter().all(|&y| y == ys[0]);
            if depth >= hp.max_depth || indices.len() < 2 * hp.min_samples_leaf || all_equal {
                return TreeNode::Leaf { value: mean };
            }
            let parent = sse(&ys);
            let tol = 1e-9 * parent.abs();
            let mut best: Option<(f64, usize, f64)> = None; // (reduction, feature, threshold)
            for f in 0..data.dim {
                let mut vals: Vec<f64> = indices.iter().map(|&i| data.row(i)[f]).collect();
                vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                vals.dedup();
                for w in vals.windows(2) {
                    let thr = w[0] + 0.5 * (w[1] - w[0]);
                    let left: Vec<f64> = indices
                        .iter()
                        .filter(|&&i| data.row(i)[f] <= thr)
                        .map(|&i| data.targets[i])
                        .collect();
                    let right: Vec<f64> = indices
                        .iter()
                        .filter(|&&i| data.row(i)[f] > thr)
                        .map(|&i| data.targets[i])
                        .collect();
                    if left.len() < hp.min_samples_leaf || right.len() < hp.min_samples_leaf {
                        continue;
                    }
                    let reduction = parent - sse(&left) - sse(&right);
                    if reduction > tol && best.as_ref().is_none_or(|b| reduction > b.0 + tol) {
                        best = Some((reduction, f, thr));
                    }
                }
            }
            let Some((_, feature, threshold)) = best else {
                return TreeNode::Leaf { value: mean };
            };
            let left_idx: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| data.row(i)[feature] <= threshold)
                .collect();
            let right_idx: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| data.row(i)[feature] > threshold)
                .collect();
            TreeNode::Internal {
                feature,
                threshold,
                left: Box::new(build(data, &left_idx, depth + 1, hp)),
                right: Box::new(build(data, &right_idx, depth + 1, hp)),
            }
        }
    }

    #[test]
    fn cart_matches_exhaustive_search_on_small_instances() {
        for seed in 0..50u64 {
            let mut rng = seeds::rng_from(1000 + seed);
            let n = 2 + (rng.random::<f64>() * 11.0) as usize; // 2..=12
            let data = random_samples(n, 1, 2000 + seed);
            let hp = TreeHyperParams {
                max_depth: 3,
                ..TreeHyperParams::default()
            };
            let fast = fit_cart(&data, &hp).unwrap();
            let indices: Vec<usize> = (0..data.len()).collect();
            let reference = naive::build(&data, &indices, 0, &hp);
            assert_eq!(fast, reference, "seed {seed}, n {n}");
        }
    }

    #[test]
    fn mae_criterion_matches_naive_sad_reduction() {
        // reference SAD about the lower median
        fn sad(ys: &mut [f64]) -> f64 {
            ys.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let med = ys[(ys.len() - 1) / 2];
            ys.iter().map(|y| (y - med).abs()).sum()
        }
        for seed in 0..20u64 {
            let data = random_samples(10, 1, 3000 + seed);
            let hp = TreeHyperParams {
                max_depth: 1,
                criterion: SplitCriterion::MaeReduction,
                ..TreeHyperParams::default()
            };
            let tree = fit_cart(&data, &hp).unwrap();
            // find the naive best threshold
            let mut vals: Vec<f64> = (0..data.len()).map(|i| data.row(i)[0]).collect();
            vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            let mut parent: Vec<f64> = data.targets.clone();
            let parent_sad = sad(&mut parent);
            let tol = 1e-9 * parent_sad.abs();
            let mut best: Option<(f64, f64)> = None;
            for w in vals.windows(2) {
                let thr = w[0] + 0.5 * (w[1] - w[0]);
                let mut l: Vec<f64> = (0..data.len())
                    .filter(|&i| data.row(i)[0] <= thr)
                    .map(|i| data.targets[i])
                    .collect();
                let mut r: Vec<f64> = (0..data.len())
                    .filter(|&i| data.row(i)[0] > thr)
                    .map(|i| data.targets[i])
                    .collect();
                let reduction = parent_sad - sad(&mut l) - sad(&mut r);
                if reduction > tol && best.is_none_or(|b| reduction > b.0 + tol) {
                    best = Some((reduction, thr));
                }
            }
            match (&tree, best) {
                (TreeNode::Internal { threshold, .. }, Some((_, thr))) => {
                    assert_eq!(*threshold, thr, "seed {seed}");
                }
                (TreeNode::Leaf { .. }, None) => {}
                (got, want) => panic!("seed {seed}: impl {got:?} vs naive {want:?}"),
            }
        }
    }

    #[test]
    fn forest_degenerates_to_cart() {
        let data = random_samples(60, 4, 8);
        let hp = TreeHyperParams {
            n_trees: 1,
            bootstrap: false,
            max_features: 4,
            ..TreeHyperParams::default()
        };
        let forest = fit_random_forest(&data, &hp, 123).unwrap();
        let cart = fit_cart(&data, &hp).unwrap();
        assert_eq!(forest.trees[0], cart);
        let x = [0.2, 0.4, 0.6, 0.8];
        assert_eq!(forest.predict(&x), predict_tree(&cart, &x));
    }

    #[test]
    fn forest_predicts_constant_for_constant_targets() {
        let mut data = random_samples(40, 4, 10);
        data.targets.iter_mut().for_each(|y| *y = 3.5);
        let forest = fit_random_forest(&data, &TreeHyperParams::default(), 7).unwrap();
        assert_eq!(forest.predict(&[0.1, 0.2, 0.3, 0.4]), 3.5);
    }

    #[test]
    fn forest_prediction_is_exact_tree_mean_and_deterministic() {
        let data = random_samples(80, 4, 11);
        let hp = TreeHyperParams {
            n_trees: 10,
            max_features: 2,
            ..TreeHyperParams::default()
        };
        let a = fit_random_forest(&data, &hp, 99).unwrap();
        let b = fit_random_forest(&data, &hp, 99).unwrap();
        assert_eq!(a, b);
        let x = [0.3, 0.1, 0.7, 0.9];
        let mean = a.trees.iter().map(|t| predict_tree(t, &x)).sum::<f64>() / 10.0;
        assert_eq!(a.predict(&x), mean);
    }

    #[test]
    fn boosting_single_full_round_zeroes_residuals() {
        let data = random_samples(50, 4, 12);
        let hp = TreeHyperParams {
            n_trees: 1,
            shrinkage: 1.0,
            max_depth: usize::MAX,
            ..TreeHyperParams::default()
        };
        let model = fit_gradient_boost(&data, &hp).unwrap();
        for i in 0..data.len() {
            let pred = model.predict(data.row(i));
            assert!(
                (pred - data.targets[i]).abs() < 1e-9,
                "row {i}: {pred} vs {}",
                data.targets[i]
            );
        }
    }

    #[test]
    fn tiny_shrinkage_stays_near_the_mean() {
        let data = random_samples(50, 4, 13);
        let hp = TreeHyperParams {
            n_trees: 5,
            shrinkage: 1e-9,
            ..TreeHyperParams::default()
        };
        let model = fit_gradient_boost(&data, &hp).unwrap();
        let f0 = data.targets.iter().sum::<f64>() / 50.0;
        assert_eq!(model.initial, f0);
        let pred = model.predict(&[0.5; 4]);
        assert!((pred - f0).abs() < 1e-6);

        let zero = TreeHyperParams {
            shrinkage: 0.0,
            ..TreeHyperParams::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn boosting_on_dyadic_constant_targets_needs_only_f0() {
        let mut data = random_samples(32, 4, 14);
        data.targets.iter_mut().for_each(|y| *y = 0.5);
        let model = fit_gradient_boost(&data, &TreeHyperParams::boost_default()).unwrap();
        assert_eq!(model.initial, 0.5);
        for tree in &model.trees {
            assert_eq!(*tree, TreeNode::Leaf { value: 0.0 });
        }
    }

    #[test]
    fn boosting_training_loss_is_non_increasing() {
        let data = random_samples(40, 4, 15);
        let hp = TreeHyperParams {
            n_trees: 6,
            shrinkage: 0.5,
            max_depth: usize::MAX,
            ..TreeHyperParams::default()
        };
        let model = fit_gradient_boost(&data, &hp).unwrap();
        let mut last = f64::INFINITY;
        for m in 0..=hp.n_trees {
            let truncated = BoostModel {
                initial: model.initial,
                shrinkage: model.shrinkage,
                trees: model.trees[..m].to_vec(),
            };
            let sse: f64 = (0..data.len())
                .map(|i| {
                    let r = data.targets[i] - truncated.predict(data.row(i));
                    r * r
                })
                .sum();
            assert!(sse <= last * (1.0 + 1e-12), "round {m}: {sse} > {last}");
            last = sse;
        }
    }

    #[test]
    fn grid_search_picks_the_strong_cell() {
        // oracle-like smooth target on 4 features
        let mut rng = seeds::rng_from(16);
        let mut data = Samples::new(4);
        for _ in 0..300 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let y = 5.0 + 10.0 * x[0] + (6.0 * x[2]).sin() * 3.0 + x[3] * x[0];
            data.push(&x, y);
        }
        let weak = TreeHyperParams {
            max_depth: 1,
            n_trees: 1,
            ..TreeHyperParams::default()
        };
        let strong = TreeHyperParams {
            max_depth: 8,
            n_trees: 100,
            ..TreeHyperParams::default()
        };
        let result = grid_search(
            BaselineKind::Forest,
            &data,
            &[weak.clone(), strong.clone()],
            3,
            77,
        )
        .unwrap();
        assert_eq!(result.best, strong);
        assert_eq!(result.table.len(), 2);

        // singleton grid returns that cell; same seed twice is identical
        let single = grid_search(BaselineKind::Boost, &data, std::slice::from_ref(&weak), 3, 5).unwrap();
        assert_eq!(single.best, weak);
        let again = grid_search(BaselineKind::Boost, &data, &[weak], 3, 5).unwrap();
        assert_eq!(single, again);
    }

    #[test]
    fn tree_model_roundtrip_is_bit_exact() {
        let data = random_samples(60, 4, 17);
        let hp = TreeHyperParams {
            n_trees: 5,
            max_features: 2,
            ..TreeHyperParams::default()
        };
        let dir = tempfile::tempdir().unwrap();
        for model in [
            fit_baseline(BaselineKind::Cart, &data, &hp, 1).unwrap(),
            fit_baseline(BaselineKind::Forest, &data, &hp, 2).unwrap(),
            fit_baseline(BaselineKind::Boost, &data, &TreeHyperParams::boost_default(), 3)
                .unwrap(),
        ] {
            let path = dir.path().join("model.json");
            save_model(&model, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(model, loaded);
            let mut rng = seeds::rng_from(18);
            for _ in 0..100 {
                let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                assert_eq!(model.predict(&x).to_bits(), loaded.predict(&x).to_bits());
            }
        }
    }
}
