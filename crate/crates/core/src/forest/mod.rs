//! CART decision trees and random forests for regression and binary
//! classification, the 324-candidate hyperparameter grid, leave-one-group-out
//! grid search, and the r2 / accuracy / macro-F1 metrics.

use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const TARGET_EPSILON: f64 = 1e-12;

/// Regression target transform: log10((precision + eps)/eps), non-negative
/// for precision >= 0, so it stays valid under the Poisson criterion.
pub fn transform_precision(precision: f64) -> f64 {
    ((precision + TARGET_EPSILON) / TARGET_EPSILON).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaxFeatures {
    Auto,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaxFeatures::Auto => "auto",
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::Log2 => "log2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitCriterion {
    SquaredError,
    AbsoluteError,
    Poisson,
    Gini,
}

impl SplitCriterion {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitCriterion::SquaredError => "squared_error",
            SplitCriterion::AbsoluteError => "absolute_error",
            SplitCriterion::Poisson => "poisson",
            SplitCriterion::Gini => "gini",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    /// None = unbounded depth.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub criterion: SplitCriterion,
}

/// Defaults used for the module-status classifiers.
pub fn classifier_default_params() -> HyperParams {
    HyperParams {
        n_estimators: 100,
        max_features: MaxFeatures::Sqrt,
        max_depth: None,
        min_samples_split: 2,
        criterion: SplitCriterion::Gini,
    }
}

/// The full regression grid, enumerated in field order with the criterion
/// innermost: 3 * 3 * 4 * 3 * 3 = 324 candidates.
pub fn hyper_grid() -> Vec<HyperParams> {
    sub_grid(&[100, 500, 1000], &[Some(4), Some(8), Some(15), None], &[2, 5, 10])
}

/// A restricted grid over the same axes; used by the reduced profile.
pub fn sub_grid(
    n_estimators: &[usize],
    max_depth: &[Option<usize>],
    min_samples_split: &[usize],
) -> Vec<HyperParams> {
    let mut grid = Vec::new();
    for &n in n_estimators {
        for mf in [MaxFeatures::Auto, MaxFeatures::Sqrt, MaxFeatures::Log2] {
            for &depth in max_depth {
                for &mss in min_samples_split {
                    for crit in [
                        SplitCriterion::SquaredError,
                        SplitCriterion::AbsoluteError,
                        SplitCriterion::Poisson,
                    ] {
                        grid.push(HyperParams {
                            n_estimators: n,
                            max_features: mf,
                            max_depth: depth,
                            min_samples_split: mss,
                            criterion: crit,
                        });
                    }
                }
            }
        }
    }
    grid
}

/// Flat node. Internal nodes route `x[feature] <= threshold` left; leaves
/// have `feature = -1` and carry the prediction in `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.feature < 0 {
                return node.value;
            }
            i = if x[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTree>,
    pub task: TaskKind,
    pub params: HyperParams,
    pub seed: u64,
    pub n_features: usize,
    /// Mean training target; kept as metadata for diagnostics.
    pub baseline: f64,
}

impl RandomForestModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.task {
            TaskKind::Regression => {
                self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
            }
            TaskKind::Classification => {
                let mut votes: Vec<(f64, usize)> = Vec::new();
                for t in &self.trees {
                    let label = t.predict(x);
                    match votes.iter_mut().find(|(l, _)| *l == label) {
                        Some((_, c)) => *c += 1,
                        None => votes.push((label, 1)),
                    }
                }
                // Majority with lowest-label tie-break.
                votes
                    .into_iter()
                    .max_by(|a, b| a.1.cmp(&b.1).then(b.0.partial_cmp(&a.0).unwrap()))
                    .unwrap()
                    .0
            }
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(sorted: &mut Vec<f64>) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Node impurity under the given criterion.
fn impurity(values: &[f64], criterion: SplitCriterion) -> f64 {
    let n = values.len() as f64;
    match criterion {
        SplitCriterion::SquaredError => {
            let m = mean(values);
            values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
        }
        SplitCriterion::AbsoluteError => {
            let mut v = values.to_vec();
            let med = median(&mut v);
            values.iter().map(|y| (y - med).abs()).sum::<f64>() / n
        }
        SplitCriterion::Poisson => {
            let m = mean(values);
            if m <= 0.0 {
                return 0.0;
            }
            let dev: f64 = values
                .iter()
                .map(|&y| {
                    let xlog = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
                    xlog - y + m
                })
                .sum();
            2.0 * dev / n
        }
        SplitCriterion::Gini => {
            let mut counts: Vec<(f64, usize)> = Vec::new();
            for &y in values {
                match counts.iter_mut().find(|(l, _)| *l == y) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((y, 1)),
                }
            }
            1.0 - counts
                .iter()
                .map(|&(_, c)| {
                    let p = c as f64 / n;
                    p * p
                })
                .sum::<f64>()
        }
    }
}

fn leaf_value(values: &[f64], criterion: SplitCriterion) -> f64 {
    match criterion {
        SplitCriterion::SquaredError | SplitCriterion::Poisson => mean(values),
        SplitCriterion::AbsoluteError => {
            let mut v = values.to_vec();
            median(&mut v)
        }
        SplitCriterion::Gini => {
            let mut counts: Vec<(f64, usize)> = Vec::new();
            for &y in values {
                match counts.iter_mut().find(|(l, _)| *l == y) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((y, 1)),
                }
            }
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.partial_cmp(&a.0).unwrap()))
                .unwrap()
                .0
        }
    }
}

fn subset_size(max_features: MaxFeatures, n_features: usize, task: TaskKind) -> usize {
    let sqrt = ((n_features as f64).sqrt().floor() as usize).max(1);
    match max_features {
        MaxFeatures::Auto => match task {
            TaskKind::Regression => n_features,
            TaskKind::Classification => sqrt,
        },
        MaxFeatures::Sqrt => sqrt,
        MaxFeatures::Log2 => ((n_features as f64).log2().floor() as usize).max(1),
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a HyperParams,
    task: TaskKind,
    n_features: usize,
    rng: ChaCha12Rng,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Features examined at this node: a uniform subset without replacement,
    /// sorted ascending so ties resolve to the lowest feature index.
    fn feature_subset(&mut self) -> Vec<usize> {
        let k = subset_size(self.params.max_features, self.n_features, self.task);
        if k >= self.n_features {
            return (0..self.n_features).collect();
        }
        let mut pool: Vec<usize> = (0..self.n_features).collect();
        for i in 0..k {
            let j = self.rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> u32 {
        let values: Vec<f64> = rows.iter().map(|&r| self.y[r]).collect();
        let crit = self.params.criterion;
        let node_imp = impurity(&values, crit);
        let make_leaf = rows.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|d| depth >= d)
            || node_imp <= 0.0;
        if !make_leaf {
            if let Some((feat, thr)) = self.best_split(rows, &values, node_imp) {
                let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                for &r in rows {
                    if self.x[r][feat] <= thr {
                        left_rows.push(r);
                    } else {
                        right_rows.push(r);
                    }
                }
                let idx = self.nodes.len();
                self.nodes.push(TreeNode {
                    feature: feat as i32,
                    threshold: thr,
                    left: 0,
                    right: 0,
                    value: leaf_value(&values, crit),
                });
                let left = self.build(&left_rows, depth + 1);
                let right = self.build(&right_rows, depth + 1);
                self.nodes[idx].left = left;
                self.nodes[idx].right = right;
                return idx as u32;
            }
        }
        let idx = self.nodes.len();
        self.nodes.push(TreeNode {
            feature: -1,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: leaf_value(&values, crit),
        });
        idx as u32
    }

    /// Greedy best split over candidate thresholds (midpoints of sorted
    /// unique values) for the node's feature subset. Ties keep the first
    /// candidate examined.
    fn best_split(&mut self, rows: &[usize], values: &[f64], node_imp: f64) -> Option<(usize, f64)> {
        let crit = self.params.criterion;
        let n = rows.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for feat in self.feature_subset() {
            let mut pairs: Vec<(f64, f64)> = rows
                .iter()
                .zip(values)
                .map(|(&r, &v)| (self.x[r][feat], v))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for i in 0..pairs.len() - 1 {
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let thr = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                let left: Vec<f64> = pairs[..=i].iter().map(|p| p.1).collect();
                let right: Vec<f64> = pairs[i + 1..].iter().map(|p| p.1).collect();
                let weighted = (left.len() as f64 * impurity(&left, crit)
                    + right.len() as f64 * impurity(&right, crit))
                    / n;
                let decrease = node_imp - weighted;
                if decrease > 0.0 && best.map_or(true, |(d, _, _)| decrease > d) {
                    best = Some((decrease, feat, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn fit_tree_on(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    params: &HyperParams,
    task: TaskKind,
    seed: u64,
) -> DecisionTree {
    let n_features = x[0].len();
    let mut builder = TreeBuilder {
        x,
        y,
        params,
        task,
        n_features,
        rng: ChaCha12Rng::seed_from_u64(seed),
        nodes: Vec::new(),
    };
    builder.build(rows, 0);
    DecisionTree {
        nodes: builder.nodes,
        n_features,
    }
}

fn validate_training_data(x: &[Vec<f64>], y: &[f64], params: &HyperParams) -> Result<()> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Contract(
            "training data empty or feature/target lengths differ".into(),
        ));
    }
    if let Some((i, &v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Contract(format!("non-finite target {v} at row {i}")));
    }
    if params.criterion == SplitCriterion::Poisson {
        if let Some((i, &v)) = y.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::Contract(format!(
                "poisson criterion requires non-negative targets, row {i} has {v}"
            )));
        }
    }
    Ok(())
}

/// Fits a single CART tree on all rows (no bootstrap).
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[f64],
    params: &HyperParams,
    task: TaskKind,
    seed: u64,
) -> Result<DecisionTree> {
    validate_training_data(x, y, params)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    Ok(fit_tree_on(x, y, &rows, params, task, seed))
}

/// Fits a forest with per-tree bootstrap resampling (sample size n). Tree
/// seeds derive from (forest seed, tree index), so fits parallelize without
/// affecting the result.
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[f64],
    params: &HyperParams,
    task: TaskKind,
    seed: u64,
) -> Result<RandomForestModel> {
    fit_forest_opts(x, y, params, task, seed, true)
}

/// `bootstrap = false` trains every tree on the full dataset (test hook).
pub fn fit_forest_opts(
    x: &[Vec<f64>],
    y: &[f64],
    params: &HyperParams,
    task: TaskKind,
    seed: u64,
    bootstrap: bool,
) -> Result<RandomForestModel> {
    validate_training_data(x, y, params)?;
    let n = x.len();
    let trees: Vec<DecisionTree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed(seed, &format!("tree-{t}"));
            let rows: Vec<usize> = if bootstrap {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(tree_seed, "bootstrap"));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, y, &rows, params, task, tree_seed)
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        task,
        params: *params,
        seed,
        n_features: x[0].len(),
        baseline: mean(y),
    })
}

/// Coefficient of determination, 1 - SS_res/SS_tot.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.len() < 2 {
        return Err(Error::Contract(
            "r2 requires equally sized inputs with at least 2 rows".into(),
        ));
    }
    let m = mean(y_true);
    let ss_tot: f64 = y_true.iter().map(|v| (v - m) * (v - m)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Numerical(
            "r2 undefined: true targets have zero variance".into(),
        ));
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Rows with a group label per row; groups drive the leave-one-group-out
/// folds (one fold per distinct label).
#[derive(Debug, Clone)]
pub struct GroupedDataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub groups: Vec<u32>,
    /// (function_id, instance_id) per row, carried through for reporting.
    pub keys: Vec<(u32, u32)>,
}

impl GroupedDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
        groups: Vec<u32>,
        keys: Vec<(u32, u32)>,
    ) -> Result<Self> {
        let n = features.len();
        if n == 0 || targets.len() != n || groups.len() != n || keys.len() != n {
            return Err(Error::Contract(
                "grouped dataset columns must be non-empty and equally sized".into(),
            ));
        }
        Ok(GroupedDataset {
            features,
            targets,
            groups,
            keys,
        })
    }

    pub fn distinct_groups(&self) -> Vec<u32> {
        let mut g = self.groups.clone();
        g.sort_unstable();
        g.dedup();
        g
    }
}

#[derive(Debug, Clone)]
pub struct FoldModel {
    /// The held-out group; the model was trained on every other group.
    pub group: u32,
    pub model: RandomForestModel,
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub best_index: usize,
    pub best_params: HyperParams,
    /// Mean r2 across folds per candidate; None marks unscoreable candidates.
    pub candidate_scores: Vec<Option<f64>>,
    pub fold_models: Vec<FoldModel>,
}

fn candidate_score(
    data: &GroupedDataset,
    groups: &[u32],
    params: &HyperParams,
    seed: u64,
    ci: usize,
) -> Option<f64> {
    let mut total = 0.0;
    for &g in groups {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        let (mut vx, mut vy) = (Vec::new(), Vec::new());
        for i in 0..data.features.len() {
            if data.groups[i] == g {
                vx.push(data.features[i].clone());
                vy.push(data.targets[i]);
            } else {
                tx.push(data.features[i].clone());
                ty.push(data.targets[i]);
            }
        }
        let fold_seed = derive_seed(seed, &format!("cand-{ci}-fold-{g}"));
        let model = fit_forest(&tx, &ty, params, TaskKind::Regression, fold_seed).ok()?;
        let preds: Vec<f64> = vx.iter().map(|x| model.predict(x)).collect();
        total += r2_score(&vy, &preds).ok()?;
    }
    Some(total / groups.len() as f64)
}

/// Index of the highest score; equal scores keep the earliest index.
fn argmax_scores(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(v) = s {
            if best.map_or(true, |(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Scores every grid candidate by leave-one-group-out mean r2, picks the
/// argmax (ties resolve to the earlier grid index) and refits the winner's
/// per-fold models for downstream attribution.
pub fn logo_grid_search(
    data: &GroupedDataset,
    grid: &[HyperParams],
    seed: u64,
) -> Result<GridSearchOutcome> {
    let groups = data.distinct_groups();
    if groups.len() < 2 {
        return Err(Error::Contract(
            "leave-one-group-out needs at least 2 groups".into(),
        ));
    }
    let scores: Vec<Option<f64>> = grid
        .par_iter()
        .enumerate()
        .map(|(ci, params)| candidate_score(data, &groups, params, seed, ci))
        .collect();
    let best_index = argmax_scores(&scores).ok_or_else(|| {
        Error::Numerical("every grid candidate was unscoreable".into())
    })?;
    let params = grid[best_index];
    let fold_models = groups
        .iter()
        .map(|&g| {
            let (mut tx, mut ty) = (Vec::new(), Vec::new());
            for i in 0..data.features.len() {
                if data.groups[i] != g {
                    tx.push(data.features[i].clone());
                    ty.push(data.targets[i]);
                }
            }
            let fold_seed = derive_seed(seed, &format!("cand-{best_index}-fold-{g}"));
            fit_forest(&tx, &ty, &params, TaskKind::Regression, fold_seed)
                .map(|model| FoldModel { group: g, model })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridSearchOutcome {
        best_index,
        best_params: params,
        candidate_scores: scores,
        fold_models,
    })
}

/// Accuracy and macro-averaged F1 for binary labels.
pub fn classification_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<(f64, f64)> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::Contract(
            "classification metrics need equally sized non-empty inputs".into(),
        ));
    }
    let n = y_true.len() as f64;
    let correct = y_true
        .iter()
        .zip(y_pred)
        .filter(|(t, p)| t == p)
        .count() as f64;
    let accuracy = correct / n;
    let mut labels: Vec<f64> = y_true.iter().chain(y_pred).copied().collect();
    labels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    labels.dedup();
    let mut f1_sum = 0.0;
    for &label in &labels {
        let tp = y_true
            .iter()
            .zip(y_pred)
            .filter(|(t, p)| **t == label && **p == label)
            .count() as f64;
        let fp = y_true
            .iter()
            .zip(y_pred)
            .filter(|(t, p)| **t != label && **p == label)
            .count() as f64;
        let fneg = y_true
            .iter()
            .zip(y_pred)
            .filter(|(t, p)| **t == label && **p != label)
            .count() as f64;
        let denom = 2.0 * tp + fp + fneg;
        f1_sum += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
    }
    Ok((accuracy, f1_sum / labels.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0.0, 0.0, 1.0, 1.0],
        )
    }

    fn params(criterion: SplitCriterion) -> HyperParams {
        HyperParams {
            n_estimators: 1,
            max_features: MaxFeatures::Auto,
            max_depth: None,
            min_samples_split: 2,
            criterion,
        }
    }

    #[test]
    fn grid_enumerates_324_candidates_in_field_order() {
        let grid = hyper_grid();
        assert_eq!(grid.len(), 324);
        assert_eq!(
            grid[0],
            HyperParams {
                n_estimators: 100,
                max_features: MaxFeatures::Auto,
                max_depth: Some(4),
                min_samples_split: 2,
                criterion: SplitCriterion::SquaredError,
            }
        );
        assert_eq!(grid[1].criterion, SplitCriterion::AbsoluteError);
        assert_eq!(grid[3].min_samples_split, 5);
        assert_eq!(grid[9].max_depth, Some(8));
        assert_eq!(grid[36].max_features, MaxFeatures::Sqrt);
        assert_eq!(grid[108].n_estimators, 500);
        assert_eq!(
            grid[323],
            HyperParams {
                n_estimators: 1000,
                max_features: MaxFeatures::Log2,
                max_depth: None,
                min_samples_split: 10,
                criterion: SplitCriterion::Poisson,
            }
        );
        let mut dedup = grid.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 324);
    }

    #[test]
    fn step_data_yields_the_expected_stump() {
        let (x, y) = step_data();
        for depth in [None, Some(1)] {
            let mut p = params(SplitCriterion::SquaredError);
            p.max_depth = depth;
            let tree = fit_tree(&x, &y, &p, TaskKind::Regression, 0).unwrap();
            let root = &tree.nodes[0];
            assert_eq!(root.feature, 0);
            assert!((root.threshold - 1.5).abs() < 1e-12);
            assert_eq!(tree.predict(&[0.5]), 0.0);
            assert_eq!(tree.predict(&[2.5]), 1.0);
            assert_eq!(tree.nodes.len(), 3);
        }
    }

    #[test]
    fn constant_target_collapses_to_one_leaf() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![5.0; 3];
        let tree = fit_tree(&x, &y, &params(SplitCriterion::SquaredError), TaskKind::Regression, 0)
            .unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[7.0]), 5.0);
    }

    #[test]
    fn poisson_rejects_negative_targets_naming_the_row() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![1.0, -0.5];
        let err = fit_tree(&x, &y, &params(SplitCriterion::Poisson), TaskKind::Regression, 0)
            .unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn single_unbootstrapped_tree_memorizes_distinct_rows() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let model = fit_forest_opts(
            &x,
            &y,
            &params(SplitCriterion::SquaredError),
            TaskKind::Regression,
            0,
            false,
        )
        .unwrap();
        let preds: Vec<f64> = x.iter().map(|r| model.predict(r)).collect();
        assert!((r2_score(&y, &preds).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forest_prediction_is_the_tree_mean_and_order_invariant() {
        let leaf = |v: f64| DecisionTree {
            nodes: vec![TreeNode {
                feature: -1,
                threshold: 0.0,
                left: 0,
                right: 0,
                value: v,
            }],
            n_features: 1,
        };
        let mut model = RandomForestModel {
            trees: vec![leaf(1.0), leaf(2.0), leaf(6.0)],
            task: TaskKind::Regression,
            params: params(SplitCriterion::SquaredError),
            seed: 0,
            n_features: 1,
            baseline: 3.0,
        };
        assert_eq!(model.predict(&[0.0]), 3.0);
        model.trees.reverse();
        assert_eq!(model.predict(&[0.0]), 3.0);
    }

    #[test]
    fn same_seed_gives_identical_predictions() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r: &Vec<f64>| r.iter().sum()).collect();
        let mut p = params(SplitCriterion::SquaredError);
        p.n_estimators = 20;
        p.max_features = MaxFeatures::Sqrt;
        let a = fit_forest(&x, &y, &p, TaskKind::Regression, 9).unwrap();
        let b = fit_forest(&x, &y, &p, TaskKind::Regression, 9).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(a.predict(&q), b.predict(&q));
        }
    }

    #[test]
    fn serialization_round_trips_predictions() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] - r[2]).collect();
        let mut p = params(SplitCriterion::AbsoluteError);
        p.n_estimators = 5;
        let model = fit_forest(&x, &y, &p, TaskKind::Regression, 4).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: RandomForestModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (a, b) = (model.predict(&q), back.predict(&q));
            assert!(a == b, "{a} vs {b}");
        }
    }

    #[test]
    fn r2_matches_hand_examples() {
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2_score(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!((r2_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            r2_score(&[2.0, 2.0], &[1.0, 3.0]),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn classification_metrics_match_hand_counts() {
        let (acc, f1) = classification_metrics(&[1.0, 1.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!((acc, f1), (1.0, 1.0));
        let (acc, f1) = classification_metrics(&[1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!((acc, f1), (0.0, 0.0));
        let (acc, f1) = classification_metrics(&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(acc, 0.75);
        assert!((f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
    }

    /// Independent exhaustive oracle: enumerate every (feature, midpoint)
    /// split and return the best impurity decrease.
    fn oracle_best_decrease(x: &[Vec<f64>], y: &[f64], criterion: SplitCriterion) -> f64 {
        fn imp(vals: &[f64], criterion: SplitCriterion) -> f64 {
            let n = vals.len() as f64;
            match criterion {
                SplitCriterion::SquaredError => {
                    let m = vals.iter().sum::<f64>() / n;
                    vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
                }
                SplitCriterion::AbsoluteError => {
                    let mut s = vals.to_vec();
                    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let med = if s.len() % 2 == 1 {
                        s[s.len() / 2]
                    } else {
                        (s[s.len() / 2 - 1] + s[s.len() / 2]) / 2.0
                    };
                    vals.iter().map(|v| (v - med).abs()).sum::<f64>() / n
                }
                SplitCriterion::Poisson => {
                    let m = vals.iter().sum::<f64>() / n;
                    if m <= 0.0 {
                        return 0.0;
                    }
                    2.0 * vals
                        .iter()
                        .map(|&v| if v > 0.0 { v * (v / m).ln() - v + m } else { m })
                        .sum::<f64>()
                        / n
                }
                SplitCriterion::Gini => {
                    let mut labels = vals.to_vec();
                    labels.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    labels.dedup();
                    1.0 - labels
                        .iter()
                        .map(|&l| {
                            let p = vals.iter().filter(|&&v| v == l).count() as f64 / n;
                            p * p
                        })
                        .sum::<f64>()
                }
            }
        }
        let total = imp(y, criterion);
        let n = y.len() as f64;
        let mut best = 0.0f64;
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let l: Vec<f64> = x
                    .iter()
                    .zip(y)
                    .filter(|(r, _)| r[f] <= thr)
                    .map(|(_, &v)| v)
                    .collect();
                let r: Vec<f64> = x
                    .iter()
                    .zip(y)
                    .filter(|(r, _)| r[f] > thr)
                    .map(|(_, &v)| v)
                    .collect();
                let dec =
                    total - (l.len() as f64 * imp(&l, criterion) + r.len() as f64 * imp(&r, criterion)) / n;
                best = best.max(dec);
            }
        }
        best
    }

    #[test]
    fn chosen_split_matches_the_exhaustive_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for criterion in [
            SplitCriterion::SquaredError,
            SplitCriterion::AbsoluteError,
            SplitCriterion::Poisson,
            SplitCriterion::Gini,
        ] {
            for trial in 0..10 {
                let n = rng.random_range(5..=20);
                // Classification restricts auto to sqrt(p) features, so keep
                // p = 1 there to compare against the all-features oracle.
                let p_feat = if criterion == SplitCriterion::Gini { 1 } else { 3 };
                let x: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..p_feat).map(|_| rng.random_range(0.0..4.0)).collect())
                    .collect();
                let y: Vec<f64> = (0..n)
                    .map(|_| {
                        if criterion == SplitCriterion::Gini {
                            rng.random_range(0..2) as f64
                        } else {
                            rng.random_range(0.0..3.0)
                        }
                    })
                    .collect();
                let task = if criterion == SplitCriterion::Gini {
                    TaskKind::Classification
                } else {
                    TaskKind::Regression
                };
                let mut p = params(criterion);
                p.max_depth = Some(1);
                let tree = fit_tree(&x, &y, &p, task, trial).unwrap();
                let oracle = oracle_best_decrease(&x, &y, criterion);
                if tree.nodes.len() == 1 {
                    assert!(oracle <= 1e-12, "{criterion:?} trial {trial}: tree refused a split with oracle decrease {oracle}");
                    continue;
                }
                let root = &tree.nodes[0];
                let feat = root.feature as usize;
                let l: Vec<f64> = x
                    .iter()
                    .zip(&y)
                    .filter(|(r, _)| r[feat] <= root.threshold)
                    .map(|(_, &v)| v)
                    .collect();
                let r: Vec<f64> = x
                    .iter()
                    .zip(&y)
                    .filter(|(r, _)| r[feat] > root.threshold)
                    .map(|(_, &v)| v)
                    .collect();
                let dec = impurity(&y, criterion)
                    - (l.len() as f64 * impurity(&l, criterion)
                        + r.len() as f64 * impurity(&r, criterion))
                        / n as f64;
                assert!(
                    (dec - oracle).abs() < 1e-9,
                    "{criterion:?} trial {trial}: tree decrease {dec} vs oracle {oracle}"
                );
            }
        }
    }

    fn grouped_toy() -> GroupedDataset {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut groups = Vec::new();
        let mut keys = Vec::new();
        for g in 1..=5u32 {
            for f in 0..8u32 {
                let row: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                // Offset keeps targets positive so Poisson candidates stay valid.
                targets.push(4.0 + 2.0 * row[0] + row[1] * row[1] + 0.1 * g as f64);
                features.push(row);
                groups.push(g);
                keys.push((f, g));
            }
        }
        GroupedDataset::new(features, targets, groups, keys).unwrap()
    }

    #[test]
    fn logo_search_scores_folds_and_refits_the_winner() {
        let data = grouped_toy();
        let grid = sub_grid(&[20], &[Some(4), None], &[2]);
        assert_eq!(grid.len(), 18);
        let out = logo_grid_search(&data, &grid, 11).unwrap();
        assert_eq!(out.candidate_scores.len(), 18);
        assert!(out.candidate_scores.iter().all(|s| s.is_some()));
        assert_eq!(out.fold_models.len(), 5);
        let held: Vec<u32> = out.fold_models.iter().map(|f| f.group).collect();
        assert_eq!(held, vec![1, 2, 3, 4, 5]);
        let best = out.candidate_scores[out.best_index].unwrap();
        for s in out.candidate_scores.iter().flatten() {
            assert!(*s <= best);
        }
        assert_eq!(out.best_params, grid[out.best_index]);
    }

    #[test]
    fn score_ties_resolve_to_the_earlier_candidate() {
        assert_eq!(argmax_scores(&[Some(0.4), Some(0.4), Some(0.2)]), Some(0));
        assert_eq!(argmax_scores(&[None, Some(0.1), Some(0.1)]), Some(1));
        assert_eq!(argmax_scores(&[Some(0.1), Some(0.3), Some(0.3)]), Some(1));
        assert_eq!(argmax_scores(&[None, None]), None);
    }
}
