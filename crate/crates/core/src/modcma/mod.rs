//! Modular CMA-ES over seven configuration axes: elitism, mirrored sampling,
//! base sampler, recombination weights, local restarts, bound correction and
//! step-size adaptation. Runs are fixed-budget and record best precision at
//! requested evaluation checkpoints.

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::sampling::{gaussian_block, SamplerKind, UniformSource};
use crate::seeding::derive_seed;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MirroredOption {
    Off,
    Mirrored,
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseSampler {
    Gaussian,
    Sobol,
    Halton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightsOption {
    Default,
    Equal,
    ExpHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalRestart {
    Off,
    Ipop,
    Bipop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundCorrection {
    Off,
    Saturate,
    Mirror,
    Toroidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepSizeAdaptation {
    Csa,
    Psr,
}

/// Axis keys in canonical-string order.
pub const AXIS_NAMES: [&str; 7] = [
    "elitist",
    "mirrored",
    "base_sampler",
    "weights",
    "restart",
    "bounds",
    "ssa",
];

/// One point in the seven-axis configuration space. The canonical string
/// encoding (see `Display`) is the config id used in every CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModuleConfiguration {
    pub elitist: bool,
    pub mirrored: MirroredOption,
    pub base_sampler: BaseSampler,
    pub weights_option: WeightsOption,
    pub local_restart: LocalRestart,
    pub bound_correction: BoundCorrection,
    pub step_size_adaptation: StepSizeAdaptation,
}

impl Default for ModuleConfiguration {
    fn default() -> Self {
        ModuleConfiguration {
            elitist: false,
            mirrored: MirroredOption::Off,
            base_sampler: BaseSampler::Gaussian,
            weights_option: WeightsOption::Default,
            local_restart: LocalRestart::Off,
            bound_correction: BoundCorrection::Saturate,
            step_size_adaptation: StepSizeAdaptation::Csa,
        }
    }
}

impl ModuleConfiguration {
    /// Value of the named axis as it appears in the canonical string.
    pub fn axis_value(&self, axis: &str) -> Result<&'static str> {
        Ok(match axis {
            "elitist" => {
                if self.elitist {
                    "true"
                } else {
                    "false"
                }
            }
            "mirrored" => match self.mirrored {
                MirroredOption::Off => "off",
                MirroredOption::Mirrored => "mirrored",
                MirroredOption::Pairwise => "pairwise",
            },
            "base_sampler" => match self.base_sampler {
                BaseSampler::Gaussian => "gaussian",
                BaseSampler::Sobol => "sobol",
                BaseSampler::Halton => "halton",
            },
            "weights" => match self.weights_option {
                WeightsOption::Default => "default",
                WeightsOption::Equal => "equal",
                WeightsOption::ExpHalf => "exp_half",
            },
            "restart" => match self.local_restart {
                LocalRestart::Off => "off",
                LocalRestart::Ipop => "ipop",
                LocalRestart::Bipop => "bipop",
            },
            "bounds" => match self.bound_correction {
                BoundCorrection::Off => "off",
                BoundCorrection::Saturate => "saturate",
                BoundCorrection::Mirror => "mirror",
                BoundCorrection::Toroidal => "toroidal",
            },
            "ssa" => match self.step_size_adaptation {
                StepSizeAdaptation::Csa => "csa",
                StepSizeAdaptation::Psr => "psr",
            },
            other => {
                return Err(Error::Registry(format!("unknown module axis `{other}`")));
            }
        })
    }

    fn set_axis(&mut self, axis: &str, value: &str) -> Result<()> {
        let bad = || Error::Registry(format!("unknown value `{value}` for axis `{axis}`"));
        match axis {
            "elitist" => {
                self.elitist = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad()),
                }
            }
            "mirrored" => {
                self.mirrored = match value {
                    "off" => MirroredOption::Off,
                    "mirrored" => MirroredOption::Mirrored,
                    "pairwise" => MirroredOption::Pairwise,
                    _ => return Err(bad()),
                }
            }
            "base_sampler" => {
                self.base_sampler = match value {
                    "gaussian" => BaseSampler::Gaussian,
                    "sobol" => BaseSampler::Sobol,
                    "halton" => BaseSampler::Halton,
                    _ => return Err(bad()),
                }
            }
            "weights" => {
                self.weights_option = match value {
                    "default" => WeightsOption::Default,
                    "equal" => WeightsOption::Equal,
                    "exp_half" => WeightsOption::ExpHalf,
                    _ => return Err(bad()),
                }
            }
            "restart" => {
                self.local_restart = match value {
                    "off" => LocalRestart::Off,
                    "ipop" => LocalRestart::Ipop,
                    "bipop" => LocalRestart::Bipop,
                    _ => return Err(bad()),
                }
            }
            "bounds" => {
                self.bound_correction = match value {
                    "off" => BoundCorrection::Off,
                    "saturate" => BoundCorrection::Saturate,
                    "mirror" => BoundCorrection::Mirror,
                    "toroidal" => BoundCorrection::Toroidal,
                    _ => return Err(bad()),
                }
            }
            "ssa" => {
                self.step_size_adaptation = match value {
                    "csa" => StepSizeAdaptation::Csa,
                    "psr" => StepSizeAdaptation::Psr,
                    _ => return Err(bad()),
                }
            }
            other => {
                return Err(Error::Registry(format!("unknown module axis `{other}`")));
            }
        }
        Ok(())
    }

    /// Canonical string id, e.g.
    /// `elitist=true;mirrored=off;base_sampler=gaussian;weights=default;restart=off;bounds=saturate;ssa=csa`.
    pub fn canonical_string(&self) -> String {
        AXIS_NAMES
            .iter()
            .map(|a| format!("{a}={}", self.axis_value(a).unwrap()))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// The single axis on which `self` and `other` differ, if exactly one.
    pub fn differing_axis(&self, other: &ModuleConfiguration) -> Option<&'static str> {
        let mut found = None;
        for axis in AXIS_NAMES {
            if self.axis_value(axis).unwrap() != other.axis_value(axis).unwrap() {
                match found {
                    None => found = Some(axis),
                    Some(_) => return None,
                }
            }
        }
        found
    }
}

impl fmt::Display for ModuleConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_string())
    }
}

impl FromStr for ModuleConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = ModuleConfiguration::default();
        let mut seen = [false; 7];
        for part in s.split(';') {
            let (axis, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Registry(format!("malformed axis assignment `{part}`")))?;
            let idx = AXIS_NAMES
                .iter()
                .position(|&a| a == axis)
                .ok_or_else(|| Error::Registry(format!("unknown module axis `{axis}`")))?;
            if seen[idx] {
                return Err(Error::Registry(format!("duplicate axis `{axis}`")));
            }
            seen[idx] = true;
            cfg.set_axis(axis, value)?;
        }
        if let Some(missing) = AXIS_NAMES.iter().zip(seen).find(|(_, s)| !s) {
            return Err(Error::Registry(format!("missing axis `{}`", missing.0)));
        }
        Ok(cfg)
    }
}

/// Standard default population size: 4 + floor(3 ln D).
pub fn default_population_size(dimension: usize) -> usize {
    4 + (3.0 * (dimension as f64).ln()).floor() as usize
}

/// Recombination weights for the given option; μ = floor(λ/2), normalized to
/// sum 1, non-increasing.
pub fn recombination_weights(option: WeightsOption, lambda: usize) -> Result<Vec<f64>> {
    if lambda < 4 {
        return Err(Error::Contract(format!(
            "population size {lambda} below the minimum of 4"
        )));
    }
    let mu = lambda / 2;
    let mut w: Vec<f64> = match option {
        WeightsOption::Default => {
            let base = (mu as f64 + 0.5).ln();
            (1..=mu).map(|i| base - (i as f64).ln()).collect()
        }
        WeightsOption::Equal => vec![1.0; mu],
        WeightsOption::ExpHalf => (1..=mu).map(|i| 0.5f64.powi(i as i32)).collect(),
    };
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(w)
}

/// Maps one coordinate back into [lb, ub] under the given rule.
pub fn correct_coordinate(value: f64, lb: f64, ub: f64, rule: BoundCorrection) -> f64 {
    let range = ub - lb;
    match rule {
        BoundCorrection::Off => value,
        BoundCorrection::Saturate => value.clamp(lb, ub),
        BoundCorrection::Mirror => {
            if value >= lb && value <= ub {
                return value;
            }
            let mut t = (value - lb).rem_euclid(2.0 * range);
            if t > range {
                t = 2.0 * range - t;
            }
            lb + t
        }
        BoundCorrection::Toroidal => {
            if value >= lb && value < ub {
                return value;
            }
            lb + (value - lb).rem_euclid(range)
        }
    }
}

/// Full optimizer state for one CMA-ES restart. Owned by a single run; moved
/// between workers but never shared.
#[derive(Debug, Clone)]
pub struct CmaState {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    eigen_b: DMatrix<f64>,
    eigen_d: DVector<f64>,
    generation: u64,
    evaluations: u64,
    prev_fitnesses: Option<Vec<f64>>,
    parents: Vec<(DVector<f64>, f64)>,
    source: UniformSource,
}

const COV_EIGEN_FLOOR: f64 = 1e-20;

impl CmaState {
    pub fn new(
        dimension: usize,
        lambda: usize,
        config: &ModuleConfiguration,
        mean: Vec<f64>,
        sigma: f64,
        sampler_seed: u64,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Contract(format!(
                "dimension {dimension} below the minimum of 2"
            )));
        }
        if mean.len() != dimension || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::Contract(
                "initial mean/step size inconsistent with the dimension".into(),
            ));
        }
        let weights = recombination_weights(config.weights_option, lambda)?;
        let mu = lambda / 2;
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let d = dimension as f64;
        let c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (d + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
        let c_1 = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) * (d + 2.0) + mu_eff));
        let chi_n = d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
        let kind = match config.base_sampler {
            BaseSampler::Gaussian => SamplerKind::Gaussian,
            BaseSampler::Sobol => SamplerKind::Sobol,
            BaseSampler::Halton => SamplerKind::Halton,
        };
        Ok(CmaState {
            dim: dimension,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_vec(mean),
            sigma,
            cov: DMatrix::identity(dimension, dimension),
            p_sigma: DVector::zeros(dimension),
            p_c: DVector::zeros(dimension),
            eigen_b: DMatrix::identity(dimension, dimension),
            eigen_d: DVector::from_element(dimension, 1.0),
            generation: 0,
            evaluations: 0,
            prev_fitnesses: None,
            parents: Vec::new(),
            source: UniformSource::new(kind, dimension, sampler_seed)?,
        })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Condition number of C via the cached eigenvalues.
    pub fn condition_number(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &d in self.eigen_d.iter() {
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (hi / lo) * (hi / lo)
    }

    fn is_finite(&self) -> bool {
        self.sigma.is_finite()
            && self.mean.iter().all(|v| v.is_finite())
            && self.cov.iter().all(|v| v.is_finite())
    }

    /// Symmetrizes C, floors its eigenvalues at 1e-20 of the largest and
    /// refreshes the (B, d) cache.
    fn repair_and_refresh(&mut self) -> Result<()> {
        let n = self.dim;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (self.cov[(i, j)] + self.cov[(j, i)]);
                self.cov[(i, j)] = v;
                self.cov[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(self.cov.clone());
        let max_ev = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max_ev.is_finite() || max_ev <= 0.0 {
            return Err(Error::Numerical(
                "covariance matrix lost positive definiteness".into(),
            ));
        }
        let floor = COV_EIGEN_FLOOR * max_ev;
        let mut evs = eig.eigenvalues.clone();
        let mut repaired = false;
        for v in evs.iter_mut() {
            if *v < floor {
                *v = floor;
                repaired = true;
            }
        }
        if repaired {
            let d = DMatrix::from_diagonal(&evs);
            self.cov = &eig.eigenvectors * d * eig.eigenvectors.transpose();
            for i in 0..n {
                for j in 0..i {
                    let v = 0.5 * (self.cov[(i, j)] + self.cov[(j, i)]);
                    self.cov[(i, j)] = v;
                    self.cov[(j, i)] = v;
                }
            }
        }
        self.eigen_b = eig.eigenvectors;
        self.eigen_d = evs.map(|v| v.sqrt());
        Ok(())
    }

    /// λ candidates x = m + σ·B·diag(d)·z with the configured mirroring and
    /// bound correction applied.
    pub fn ask(
        &mut self,
        config: &ModuleConfiguration,
        domain: (f64, f64),
    ) -> Result<Vec<Vec<f64>>> {
        if !self.is_finite() {
            return Err(Error::Numerical(format!(
                "optimizer state corrupt at generation {}: sigma={}",
                self.generation, self.sigma
            )));
        }
        let draws = match config.mirrored {
            MirroredOption::Off => self.lambda,
            _ => self.lambda.div_ceil(2),
        };
        let base = gaussian_block(&mut self.source, self.dim, draws);
        let mut zs: Vec<DVector<f64>> = Vec::with_capacity(self.lambda);
        match config.mirrored {
            MirroredOption::Off => {
                for z in base {
                    zs.push(DVector::from_vec(z));
                }
            }
            MirroredOption::Mirrored | MirroredOption::Pairwise => {
                for z in base {
                    let z = DVector::from_vec(z);
                    if zs.len() < self.lambda {
                        zs.push(z.clone());
                    }
                    if zs.len() < self.lambda {
                        zs.push(-z);
                    }
                }
            }
        }
        let (lb, ub) = domain;
        let mut out = Vec::with_capacity(self.lambda);
        for z in zs {
            let scaled = self.eigen_d.component_mul(&z);
            let x = &self.mean + self.sigma * (&self.eigen_b * scaled);
            let corrected: Vec<f64> = x
                .iter()
                .map(|&v| correct_coordinate(v, lb, ub, config.bound_correction))
                .collect();
            out.push(corrected);
        }
        Ok(out)
    }

    fn psr_statistic(prev: &[f64], curr: &[f64]) -> f64 {
        let lambda = curr.len();
        let mut merged: Vec<(f64, usize)> = prev
            .iter()
            .copied()
            .chain(curr.iter().copied())
            .enumerate()
            .map(|(i, f)| (f, i))
            .collect();
        merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut rank_prev = 0.0;
        let mut rank_curr = 0.0;
        for (rank, &(_, idx)) in merged.iter().enumerate() {
            if idx < prev.len() {
                rank_prev += rank as f64;
            } else {
                rank_curr += rank as f64;
            }
        }
        (rank_prev / prev.len() as f64 - rank_curr / lambda as f64) / lambda as f64
    }

    fn csa_factor(&self, p_norm: f64) -> f64 {
        // Exponent capped at 1: elitist selection can keep stale parents in
        // the pool and drive the path norm into a growth runaway.
        ((self.c_sigma / self.d_sigma) * (p_norm / self.chi_n - 1.0))
            .min(1.0)
            .exp()
    }

    /// Consumes one generation of fitnesses and applies the standard
    /// rank-one + rank-μ update with the configured selection and step-size
    /// rules.
    pub fn tell(
        &mut self,
        config: &ModuleConfiguration,
        candidates: &[Vec<f64>],
        fitnesses: &[f64],
    ) -> Result<()> {
        if candidates.len() != self.lambda || fitnesses.len() != self.lambda {
            return Err(Error::Contract(format!(
                "expected {} candidates and fitnesses, got {} and {}",
                self.lambda,
                candidates.len(),
                fitnesses.len()
            )));
        }
        if fitnesses.iter().any(|f| !f.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite fitness at generation {}",
                self.generation
            )));
        }

        // Pairwise mirroring: only the better member of each ± pair may be
        // recombined. The unpaired trailing candidate (odd λ) stays eligible.
        let mut pool: Vec<(DVector<f64>, f64)> = Vec::new();
        match config.mirrored {
            MirroredOption::Pairwise => {
                let mut i = 0;
                while i + 1 < self.lambda {
                    let pick = if fitnesses[i + 1] < fitnesses[i] { i + 1 } else { i };
                    pool.push((DVector::from_vec(candidates[pick].clone()), fitnesses[pick]));
                    i += 2;
                }
                if i < self.lambda {
                    pool.push((DVector::from_vec(candidates[i].clone()), fitnesses[i]));
                }
            }
            _ => {
                for (x, &f) in candidates.iter().zip(fitnesses) {
                    pool.push((DVector::from_vec(x.clone()), f));
                }
            }
        }
        if config.elitist {
            pool.extend(self.parents.iter().cloned());
        }
        pool.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        pool.truncate(self.mu);

        let old_mean = self.mean.clone();
        let mut new_mean = DVector::zeros(self.dim);
        for (w, (x, _)) in self.weights.iter().zip(&pool) {
            new_mean += *w * x;
        }
        let y_w = (&new_mean - &old_mean) / self.sigma;

        // C^{-1/2} y_w through the eigen cache.
        let inv_d = self.eigen_d.map(|v| 1.0 / v);
        let c_inv_sqrt_yw =
            &self.eigen_b * inv_d.component_mul(&(self.eigen_b.transpose() * &y_w));

        self.p_sigma = (1.0 - self.c_sigma) * &self.p_sigma
            + (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt() * c_inv_sqrt_yw;
        let gen1 = (self.generation + 1) as f64;
        let p_norm = self.p_sigma.norm();
        let hsig = p_norm / (1.0 - (1.0 - self.c_sigma).powf(2.0 * gen1)).sqrt() / self.chi_n
            < 1.4 + 2.0 / (self.dim as f64 + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };
        self.p_c = (1.0 - self.c_c) * &self.p_c
            + hsig_f * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, (x, _)) in self.weights.iter().zip(&pool) {
            let y = (x - &old_mean) / self.sigma;
            rank_mu += *w * (&y * y.transpose());
        }
        let correction = (1.0 - hsig_f) * self.c_c * (2.0 - self.c_c);
        self.cov = (1.0 - self.c_1 - self.c_mu) * &self.cov
            + self.c_1 * ((&self.p_c * self.p_c.transpose()) + correction * &self.cov)
            + self.c_mu * rank_mu;

        match config.step_size_adaptation {
            StepSizeAdaptation::Csa => {
                self.sigma *= self.csa_factor(p_norm);
            }
            StepSizeAdaptation::Psr => {
                if let Some(prev) = &self.prev_fitnesses {
                    let z = Self::psr_statistic(prev, fitnesses);
                    self.sigma *= (((z - 0.25) / self.d_sigma).min(1.0)).exp();
                }
            }
        }
        // With restarts off nothing else bounds the step size, so keep it in
        // a finite band instead of corrupting the state.
        self.sigma = self.sigma.clamp(1e-30, 1e30);

        self.mean = new_mean;
        self.prev_fitnesses = Some(fitnesses.to_vec());
        self.parents = pool;
        self.generation += 1;
        self.evaluations += self.lambda as u64;
        self.repair_and_refresh()
    }
}

/// Fixed-budget result of one run: best precision at every requested
/// checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_id: String,
    pub function_id: u32,
    pub instance_id: u32,
    pub dimension: usize,
    pub seed: u64,
    pub checkpoints: BTreeMap<u64, f64>,
    pub evaluations: u64,
}

const SIGMA_RESTART_FLOOR: f64 = 1e-12;
const CONDITION_RESTART_LIMIT: f64 = 1e14;
const INITIAL_SIGMA: f64 = 2.0;

/// Runs one configuration on one instance until the largest budget is spent,
/// applying the configured restart policy, and records best precision at
/// every checkpoint. Deterministic in (instance, config, budgets, seed).
pub fn run_fixed_budget(
    instance: &ProblemInstance,
    config: &ModuleConfiguration,
    budgets: &[u64],
    seed: u64,
) -> Result<RunRecord> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract(
            "budgets must be non-empty and strictly increasing".into(),
        ));
    }
    let dim = instance.dimension();
    let lambda0 = default_population_size(dim);
    let max_budget = *budgets.last().unwrap();
    if max_budget < lambda0 as u64 {
        return Err(Error::Contract(format!(
            "maximum budget {max_budget} below one population of {lambda0}"
        )));
    }
    let domain = instance.domain();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "modcma-run"));

    let mut best = f64::INFINITY;
    let mut checkpoints: BTreeMap<u64, f64> = BTreeMap::new();
    let mut next_cp = 0usize;
    let mut evals: u64 = 0;

    // BIPOP ledger: evaluations consumed per regime and large-restart count.
    let mut restarts = 0u32;
    let mut n_large = 0u32;
    let mut evals_large = 0u64;
    let mut evals_small = 0u64;

    'restarts: loop {
        let (lambda, sigma0, large_regime) = match config.local_restart {
            LocalRestart::Off => (lambda0, INITIAL_SIGMA, true),
            LocalRestart::Ipop => (lambda0 << restarts.min(32), INITIAL_SIGMA, true),
            LocalRestart::Bipop => {
                if restarts == 0 {
                    (lambda0, INITIAL_SIGMA, true)
                } else if evals_small < evals_large {
                    let u1: f64 = rng.random();
                    let u2: f64 = rng.random();
                    let lam_large = (lambda0 << n_large.min(32)) as f64;
                    let lam = ((lambda0 as f64)
                        * (0.5 * lam_large / lambda0 as f64).powf(u1 * u1))
                    .floor() as usize;
                    (lam.max(4), INITIAL_SIGMA * 10f64.powf(-2.0 * u2), false)
                } else {
                    n_large += 1;
                    ((lambda0 << n_large.min(32)), INITIAL_SIGMA, true)
                }
            }
        };
        let mean: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
        let sampler_seed = derive_seed(seed, &format!("modcma-sampler-{restarts}"));
        let mut state = CmaState::new(dim, lambda, config, mean, sigma0, sampler_seed)?;
        let run_start_evals = evals;
        let mut gens_since_improvement = 0u64;

        loop {
            let candidates = state.ask(config, domain)?;
            let mut fits = Vec::with_capacity(candidates.len());
            for x in &candidates {
                let f = instance.evaluate(x)?;
                fits.push(f);
                evals += 1;
                let prec = instance.precision(f);
                if prec < best {
                    best = prec;
                    gens_since_improvement = 0;
                }
                while next_cp < budgets.len() && evals == budgets[next_cp] {
                    checkpoints.insert(budgets[next_cp], best);
                    next_cp += 1;
                }
                if evals == max_budget {
                    break 'restarts;
                }
            }
            state.tell(config, &candidates, &fits)?;
            gens_since_improvement += 1;

            if config.local_restart != LocalRestart::Off {
                let stagnation_limit = 50 * (1 + state.generation() / state.lambda() as u64);
                if state.sigma() < SIGMA_RESTART_FLOOR
                    || state.condition_number() > CONDITION_RESTART_LIMIT
                    || gens_since_improvement > stagnation_limit
                {
                    let consumed = evals - run_start_evals;
                    if large_regime {
                        evals_large += consumed;
                    } else {
                        evals_small += consumed;
                    }
                    restarts += 1;
                    continue 'restarts;
                }
            }
        }
    }

    Ok(RunRecord {
        config_id: config.canonical_string(),
        function_id: instance.function_id(),
        instance_id: instance.instance_id(),
        dimension: dim,
        seed,
        checkpoints,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_instance() -> ProblemInstance {
        ProblemInstance::untransformed(1, 5).unwrap()
    }

    #[test]
    fn population_size_defaults() {
        assert_eq!(default_population_size(5), 8);
        assert_eq!(default_population_size(30), 14);
        assert_eq!(default_population_size(2), 6);
    }

    #[test]
    fn equal_weights_are_uniform() {
        let w = recombination_weights(WeightsOption::Equal, 8).unwrap();
        assert_eq!(w, vec![0.25; 4]);
    }

    #[test]
    fn exp_half_weights_match_hand_normalization() {
        let w = recombination_weights(WeightsOption::ExpHalf, 8).unwrap();
        let expected = [8.0 / 15.0, 4.0 / 15.0, 2.0 / 15.0, 1.0 / 15.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn default_weights_decrease_and_sum_to_one() {
        let w = recombination_weights(WeightsOption::Default, 8).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
        assert!(w.iter().all(|&v| v > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_population_is_rejected() {
        assert!(matches!(
            recombination_weights(WeightsOption::Default, 3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn canonical_string_round_trips() {
        let s = "elitist=true;mirrored=mirrored;base_sampler=gaussian;weights=default;restart=off;bounds=saturate;ssa=csa";
        let cfg: ModuleConfiguration = s.parse().unwrap();
        assert!(cfg.elitist);
        assert_eq!(cfg.mirrored, MirroredOption::Mirrored);
        assert_eq!(cfg.canonical_string(), s);
    }

    #[test]
    fn malformed_configuration_strings_are_rejected
    () {
        assert!("elitist=true".parse::<ModuleConfiguration>().is_err());
        assert!(
            "elitist=yes;mirrored=off;base_sampler=gaussian;weights=default;restart=off;bounds=off;ssa=csa"
                .parse::<ModuleConfiguration>()
                .is_err()
        );
        assert!(
            "elitist=true;mirrored=off;base_sampler=gaussian;weights=default;restart=off;bounds=off;ssa=csa;extra=1"
                .parse::<ModuleConfiguration>()
                .is_err()
        );
    }

    #[test]
    fn differing_axis_detects_single_axis_pairs() {
        let a: ModuleConfiguration =
            "elitist=false;mirrored=off;base_sampler=sobol;weights=equal;restart=ipop;bounds=mirror;ssa=psr"
                .parse()
                .unwrap();
        let mut b = a;
        b.elitist = true;
        assert_eq!(a.differing_axis(&b), Some("elitist"));
        b.step_size_adaptation = StepSizeAdaptation::Csa;
        assert_eq!(a.differing_axis(&b), None);
        assert_eq!(a.differing_axis(&a), None);
    }

    #[test]
    fn toroidal_wrap_matches_hand_value() {
        assert!((correct_coordinate(5.5, -5.0, 5.0, BoundCorrection::Toroidal) - (-4.5)).abs() < 1e-12);
        assert_eq!(correct_coordinate(3.0, -5.0, 5.0, BoundCorrection::Toroidal), 3.0);
    }

    #[test]
    fn mirror_reflects_into_the_box() {
        assert!((correct_coordinate(5.5, -5.0, 5.0, BoundCorrection::Mirror) - 4.5).abs() < 1e-12);
        assert!((correct_coordinate(-6.0, -5.0, 5.0, BoundCorrection::Mirror) - (-4.0)).abs() < 1e-12);
        let v = correct_coordinate(27.0, -5.0, 5.0, BoundCorrection::Mirror);
        assert!((-5.0..=5.0).contains(&v));
    }

    #[test]
    fn mirrored_pairs_average_to_the_mean() {
        let mut config = ModuleConfiguration::default();
        config.mirrored = MirroredOption::Mirrored;
        config.bound_correction = BoundCorrection::Off;
        let mean = vec![0.3, -0.7, 1.1, 0.0, 2.5];
        let mut state = CmaState::new(5, 8, &config, mean.clone(), 1.5, 7).unwrap();
        let cands = state.ask(&config, (-5.0, 5.0)).unwrap();
        for pair in cands.chunks(2) {
            for j in 0..5 {
                assert!((pair[0][j] + pair[1][j] - 2.0 * mean[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saturate_keeps_candidates_in_domain() {
        let mut config = ModuleConfiguration::default();
        config.bound_correction = BoundCorrection::Saturate;
        let mut state = CmaState::new(5, 8, &config, vec![4.9; 5], 3.0, 11).unwrap();
        for _ in 0..5 {
            let cands = state.ask(&config, (-5.0, 5.0)).unwrap();
            for x in &cands {
                assert!(x.iter().all(|&v| (-5.0..=5.0).contains(&v)));
            }
        }
    }

    #[test]
    fn csa_is_neutral_at_the_expected_path_length() {
        let config = ModuleConfiguration::default();
        let state = CmaState::new(5, 8, &config, vec![0.0; 5], 2.0, 1).unwrap();
        assert_eq!(state.csa_factor(state.chi_n), 1.0);
        assert!(state.csa_factor(state.chi_n * 2.0) > 1.0);
        assert!(state.csa_factor(state.chi_n * 0.5) < 1.0);
    }

    #[test]
    fn psr_statistic_is_one_when_current_dominates() {
        let prev = vec![10.0, 11.0, 12.0, 13.0];
        let curr = vec![1.0, 2.0, 3.0, 4.0];
        let z = CmaState::psr_statistic(&prev, &curr);
        assert!((z - 1.0).abs() < 1e-12);
        let z_rev = CmaState::psr_statistic(&curr, &prev);
        assert!((z_rev + 1.0).abs() < 1e-12);
        // PSR raises σ when z exceeds the 0.25 target.
        let config = ModuleConfiguration::default();
        let state = CmaState::new(5, 8, &config, vec![0.0; 5], 2.0, 1).unwrap();
        assert!(((z - 0.25) / state.d_sigma).exp() > 1.0);
    }

    #[test]
    fn elitist_best_fitness_is_monotone() {
        let instance = sphere_instance();
        let mut config = ModuleConfiguration::default();
        config.elitist = true;
        let mut state = CmaState::new(5, 8, &config, vec![2.0; 5], 2.0, 3).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..40 {
            let cands = state.ask(&config, instance.domain()).unwrap();
            let fits: Vec<f64> = cands.iter().map(|x| instance.evaluate(x).unwrap()).collect();
            state.tell(&config, &cands, &fits).unwrap();
            let parent_best = state.parents.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            assert!(parent_best <= best + 1e-15);
            best = best.min(parent_best);
        }
    }

    #[test]
    fn nan_fitness_aborts_the_generation() {
        let config = ModuleConfiguration::default();
        let mut state = CmaState::new(5, 8, &config, vec![0.0; 5], 2.0, 3).unwrap();
        let cands = state.ask(&config, (-5.0, 5.0)).unwrap();
        let mut fits = vec![1.0; 8];
        fits[3] = f64::NAN;
        assert!(matches!(
            state.tell(&config, &cands, &fits),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn run_record_is_deterministic_and_monotone() {
        let instance = sphere_instance();
        let config = ModuleConfiguration::default();
        let budgets = [500, 2000];
        let a = run_fixed_budget(&instance, &config, &budgets, 42).unwrap();
        let b = run_fixed_budget(&instance, &config, &budgets, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluations, 2000);
        assert_eq!(a.checkpoints.len(), 2);
        assert!(a.checkpoints[&2000] <= a.checkpoints[&500]);
        let c = run_fixed_budget(&instance, &config, &budgets, 43).unwrap();
        assert_ne!(a.checkpoints, c.checkpoints);
    }

    #[test]
    fn sphere_reaches_high_precision_on_most_seeds() {
        let instance = ProblemInstance::new(1, 1, 5).unwrap();
        let config = ModuleConfiguration::default();
        let mut hits = 0;
        for seed in 0..10u64 {
            let rec = run_fixed_budget(&instance, &config, &[10_000], seed).unwrap();
            if rec.checkpoints[&10_000] <= 1e-8 {
                hits += 1;
            }
        }
        assert!(hits >= 8, "only {hits}/10 seeds reached 1e-8");
    }

    #[test]
    fn restart_variants_stay_deterministic_on_a_multimodal_function() {
        let instance = ProblemInstance::new(3, 1, 5).unwrap();
        for restart in [LocalRestart::Ipop, LocalRestart::Bipop] {
            let mut config = ModuleConfiguration::default();
            config.local_restart = restart;
            let a = run_fixed_budget(&instance, &config, &[500, 2000, 5000], 9).unwrap();
            let b = run_fixed_budget(&instance, &config, &[500, 2000, 5000], 9).unwrap();
            assert_eq!(a, b);
            assert!(a.checkpoints[&5000] <= a.checkpoints[&500]);
        }
    }

    #[test]
    fn all_axis_combinations_run_a_short_budget() {
        let instance = sphere_instance();
        for mirrored in [MirroredOption::Off, MirroredOption::Mirrored, MirroredOption::Pairwise] {
            for sampler in [BaseSampler::Gaussian, BaseSampler::Sobol, BaseSampler::Halton] {
                for ssa in [StepSizeAdaptation::Csa, StepSizeAdaptation::Psr] {
                    for bounds in [
                        BoundCorrection::Off,
                        BoundCorrection::Saturate,
                        BoundCorrection::Mirror,
                        BoundCorrection::Toroidal,
                    ] {
                        let config = ModuleConfiguration {
                            elitist: mirrored == MirroredOption::Pairwise,
                            mirrored,
                            base_sampler: sampler,
                            weights_option: WeightsOption::Default,
                            local_restart: LocalRestart::Off,
                            bound_correction: bounds,
                            step_size_adaptation: ssa,
                        };
                        let rec = run_fixed_budget(&instance, &config, &[200], 5).unwrap();
                        assert_eq!(rec.evaluations, 200);
                        assert!(rec.checkpoints[&200].is_finite());
                    }
                }
            }
        }
    }
}
