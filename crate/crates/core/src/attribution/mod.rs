//! Exact interventional Shapley attributions for tree ensembles. Absent
//! features are marginalized over a background set (the fold's training
//! rows); per-leaf closed forms make the computation exact without any
//! coalition sampling.

use crate::error::{Error, Result};
use crate::forest::{DecisionTree, RandomForestModel};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Where an attribution vector came from; filled in by the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributionContext {
    pub config_id: String,
    pub dimension: usize,
    pub budget: u64,
    pub function_id: u32,
    pub instance_id: u32,
    pub fold: u32,
}

/// Shapley values plus the background base value; base + sum(phi) equals the
/// model prediction at x (local accuracy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub phi: Vec<f64>,
    pub base: f64,
    pub context: AttributionContext,
}

/// Aggregation across instances for a configuration's representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapMode {
    SignedMean,
    MeanAbs,
}

impl ShapMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShapMode::SignedMean => "signed",
            ShapMode::MeanAbs => "abs",
        }
    }
}

impl FromStr for ShapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(ShapMode::SignedMean),
            "abs" => Ok(ShapMode::MeanAbs),
            other => Err(Error::Registry(format!("unknown shap mode `{other}`"))),
        }
    }
}

/// One configuration as a vector of aggregated Shapley values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRepresentation {
    pub config_id: String,
    pub dimension: usize,
    pub budget: u64,
    pub values: Vec<f64>,
    pub mode: ShapMode,
    /// (axis, value) pairs from the configuration encoding.
    pub module_labels: Vec<(String, String)>,
}

/// Coalition-counting weights for a fixed feature count d. `in_sum[a][b]`
/// weighs a leaf whose path requires `a` features present and `b` absent for
/// a feature inside the required set; `out_sum[a][b]` for one in the absent
/// set. Both sum the Shapley kernel over the c = d-a-b unconstrained
/// features.
struct ShapWeights {
    d: usize,
    in_sum: Vec<Vec<f64>>,
    out_sum: Vec<Vec<f64>>,
}

impl ShapWeights {
    fn new(d: usize) -> Self {
        let mut fact = vec![1.0f64; d + 1];
        for i in 1..=d {
            fact[i] = fact[i - 1] * i as f64;
        }
        let binom = |n: usize, k: usize| fact[n] / (fact[k] * fact[n - k]);
        let mut in_sum = vec![vec![0.0; d + 1]; d + 1];
        let mut out_sum = vec![vec![0.0; d + 1]; d + 1];
        for a in 0..=d {
            for b in 0..=(d - a) {
                let c = d - a - b;
                if a >= 1 {
                    let mut s = 0.0;
                    for t in 0..=c {
                        s += binom(c, t) * fact[a - 1 + t] * fact[d - a - t] / fact[d];
                    }
                    in_sum[a][b] = s;
                }
                if b >= 1 {
                    let mut s = 0.0;
                    for t in 0..=c {
                        s += binom(c, t) * fact[a + t] * fact[d - 1 - a - t] / fact[d];
                    }
                    out_sum[a][b] = s;
                }
            }
        }
        ShapWeights { d, in_sum, out_sum }
    }
}

/// Per-feature tallies of path constraints for the current (x, z) pair.
struct PathState {
    constraints: Vec<u32>,
    x_fail: Vec<u32>,
    z_fail: Vec<u32>,
    touched: Vec<usize>,
}

fn shap_for_background_row(
    tree: &DecisionTree,
    x: &[f64],
    z: &[f64],
    weights: &ShapWeights,
    phi: &mut [f64],
) {
    let mut state = PathState {
        constraints: vec![0; weights.d],
        x_fail: vec![0; weights.d],
        z_fail: vec![0; weights.d],
        touched: Vec::new(),
    };
    descend(tree, 0, x, z, weights, &mut state, phi);
}

fn descend(
    tree: &DecisionTree,
    node: usize,
    x: &[f64],
    z: &[f64],
    weights: &ShapWeights,
    state: &mut PathState,
    phi: &mut [f64],
) {
    let n = &tree.nodes[node];
    if n.feature < 0 {
        // Classify touched features; if any has no satisfying side the leaf
        // is unreachable for every coalition.
        let mut a = 0usize;
        let mut b = 0usize;
        for &f in &state.touched {
            let x_ok = state.x_fail[f] == 0;
            let z_ok = state.z_fail[f] == 0;
            if !x_ok && !z_ok {
                return;
            }
            if x_ok && !z_ok {
                a += 1;
            } else if !x_ok && z_ok {
                b += 1;
            }
        }
        let w_in = weights.in_sum[a][b];
        let w_out = weights.out_sum[a][b];
        for &f in &state.touched {
            let x_ok = state.x_fail[f] == 0;
            let z_ok = state.z_fail[f] == 0;
            if x_ok && !z_ok {
                phi[f] += n.value * w_in;
            } else if !x_ok && z_ok {
                phi[f] -= n.value * w_out;
            }
        }
        return;
    }
    let f = n.feature as usize;
    for (child, left_side) in [(n.left as usize, true), (n.right as usize, false)] {
        let x_ok = (x[f] <= n.threshold) == left_side;
        let z_ok = (z[f] <= n.threshold) == left_side;
        if state.constraints[f] == 0 {
            state.touched.push(f);
        }
        state.constraints[f] += 1;
        if !x_ok {
            state.x_fail[f] += 1;
        }
        if !z_ok {
            state.z_fail[f] += 1;
        }
        // A feature failing for both x and z kills every leaf below.
        if state.x_fail[f] == 0 || state.z_fail[f] == 0 {
            descend(tree, child, x, z, weights, state, phi);
        }
        state.constraints[f] -= 1;
        if !x_ok {
            state.x_fail[f] -= 1;
        }
        if !z_ok {
            state.z_fail[f] -= 1;
        }
        if state.constraints[f] == 0 {
            state.touched.pop();
        }
    }
}

fn tree_shap_weighted(
    tree: &DecisionTree,
    x: &[f64],
    background: &[Vec<f64>],
    weights: &ShapWeights,
) -> (Vec<f64>, f64) {
    let mut phi = vec![0.0; tree.n_features];
    let mut base = 0.0;
    for z in background {
        base += tree.predict(z);
        shap_for_background_row(tree, x, z, weights, &mut phi);
    }
    let m = background.len() as f64;
    for v in phi.iter_mut() {
        *v /= m;
    }
    (phi, base / m)
}

fn validate_inputs(n_features: usize, x: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if background.is_empty() {
        return Err(Error::Contract("background set must be non-empty".into()));
    }
    if x.len() != n_features || background.iter().any(|z| z.len() != n_features) {
        return Err(Error::Contract(format!(
            "attribution inputs must have {n_features} features"
        )));
    }
    Ok(())
}

/// Exact interventional Shapley values of one tree's prediction at x,
/// marginalizing absent features over the background rows.
pub fn tree_shap(
    tree: &DecisionTree,
    x: &[f64],
    background: &[Vec<f64>],
) -> Result<(Vec<f64>, f64)> {
    validate_inputs(tree.n_features, x, background)?;
    let weights = ShapWeights::new(tree.n_features);
    Ok(tree_shap_weighted(tree, x, background, &weights))
}

/// Forest attribution by linearity: mean of tree phi vectors and bases.
pub fn forest_shap(
    model: &RandomForestModel,
    x: &[f64],
    background: &[Vec<f64>],
) -> Result<AttributionVector> {
    validate_inputs(model.n_features, x, background)?;
    let weights = ShapWeights::new(model.n_features);
    let mut phi = vec![0.0; model.n_features];
    let mut base = 0.0;
    for tree in &model.trees {
        let (tp, tb) = tree_shap_weighted(tree, x, background, &weights);
        for (p, t) in phi.iter_mut().zip(tp) {
            *p += t;
        }
        base += tb;
    }
    let k = model.trees.len() as f64;
    for p in phi.iter_mut() {
        *p /= k;
    }
    Ok(AttributionVector {
        phi,
        base: base / k,
        context: AttributionContext::default(),
    })
}

/// Elementwise mean over the four training-fold attributions of an instance.
pub fn aggregate_instance(fold_phis: &[Vec<f64>]) -> Result<Vec<f64>> {
    if fold_phis.len() != 4 {
        return Err(Error::Contract(format!(
            "expected attributions from exactly 4 training folds, got {}",
            fold_phis.len()
        )));
    }
    let len = fold_phis[0].len();
    if fold_phis.iter().any(|v| v.len() != len) {
        return Err(Error::Contract("fold attribution lengths differ".into()));
    }
    let mut out = vec![0.0; len];
    for v in fold_phis {
        for (o, p) in out.iter_mut().zip(v) {
            *o += p;
        }
    }
    for o in out.iter_mut() {
        *o /= 4.0;
    }
    Ok(out)
}

/// Aggregates per-instance vectors across the full instance set. `expected`
/// lists every (function_id, instance_id) that must be present.
pub fn build_representation(
    per_instance: &[((u32, u32), Vec<f64>)],
    expected: &[(u32, u32)],
    mode: ShapMode,
) -> Result<Vec<f64>> {
    let missing: Vec<String> = expected
        .iter()
        .filter(|k| !per_instance.iter().any(|(key, _)| key == *k))
        .map(|(f, i)| format!("f{f}/i{i}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Contract(format!(
            "missing per-instance attributions: {}",
            missing.join(", ")
        )));
    }
    let len = per_instance[0].1.len();
    if per_instance.iter().any(|(_, v)| v.len() != len) {
        return Err(Error::Contract("instance attribution lengths differ".into()));
    }
    let mut out = vec![0.0; len];
    for (_, v) in per_instance {
        for (o, p) in out.iter_mut().zip(v) {
            *o += match mode {
                ShapMode::SignedMean => *p,
                ShapMode::MeanAbs => p.abs(),
            };
        }
    }
    let n = per_instance.len() as f64;
    for o in out.iter_mut() {
        *o /= n;
    }
    Ok(out)
}
