//! BBOB-style noiseless single-objective problem suite.
//!
//! The suite covers the five classic categories (separable, low/moderate
//! conditioning, high conditioning, multimodal with adequate structure,
//! multimodal with weak structure) with 24 functions. Functions follow the
//! standard benchmark shapes in spirit; every base function is non-negative
//! with its minimum exactly at the origin of the transformed space, so
//! `evaluate(x_opt) == f_opt` holds bit-exactly and `evaluate(x) >= f_opt`
//! holds everywhere (up to floating-point noise in the base formulas).
//!
//! Instance transforms: the optimum is shifted uniformly into [-4,4]^D,
//! rotations come from QR decompositions of seeded Gaussian matrices, and
//! f_opt is drawn uniformly from [-1000, 1000]. All randomness is keyed on
//! (function_id, instance_id, dimension), so instances are bit-reproducible.

use crate::error::{Error, Result};
use crate::seeding::{fnv1a64, splitmix64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const DOMAIN_LB: f64 = -5.0;
pub const DOMAIN_UB: f64 = 5.0;

/// BBOB-style function category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Separable,
    LowModerateConditioning,
    HighConditioning,
    MultimodalAdequate,
    MultimodalWeak,
}

impl Category {
    pub fn label(&self) -> &'static str {
        match self {
            Category::Separable => "separable",
            Category::LowModerateConditioning => "low-moderate-conditioning",
            Category::HighConditioning => "high-conditioning",
            Category::MultimodalAdequate => "multimodal-adequate",
            Category::MultimodalWeak => "multimodal-weak",
        }
    }
}

/// Registry entry for one function.
#[derive(Debug, Clone, Copy)]
pub struct FunctionInfo {
    pub id: u32,
    pub name: &'static str,
    pub category: Category,
    pub multimodal: bool,
    rotations: u8,
}

pub fn registry() -> &'static [FunctionInfo] {
    use Category::*;
    const REG: &[FunctionInfo] = &[
        FunctionInfo { id: 1, name: "sphere", category: Separable, multimodal: false, rotations: 0 },
        FunctionInfo { id: 2, name: "ellipsoid_separable", category: Separable, multimodal: false, rotations: 0 },
        FunctionInfo { id: 3, name: "rastrigin_separable", category: Separable, multimodal: true, rotations: 0 },
        FunctionInfo { id: 4, name: "bueche_rastrigin", category: Separable, multimodal: true, rotations: 0 },
        FunctionInfo { id: 5, name: "abs_slope", category: Separable, multimodal: false, rotations: 0 },
        FunctionInfo { id: 6, name: "attractive_sector", category: LowModerateConditioning, multimodal: false, rotations: 2 },
        FunctionInfo { id: 7, name: "step_ellipsoid", category: LowModerateConditioning, multimodal: false, rotations: 2 },
        FunctionInfo { id: 8, name: "rosenbrock", category: LowModerateConditioning, multimodal: false, rotations: 0 },
        FunctionInfo { id: 9, name: "rosenbrock_rotated", category: LowModerateConditioning, multimodal: false, rotations: 1 },
        FunctionInfo { id: 10, name: "ellipsoid_rotated", category: HighConditioning, multimodal: false, rotations: 1 },
        FunctionInfo { id: 11, name: "discus", category: HighConditioning, multimodal: false, rotations: 1 },
        FunctionInfo { id: 12, name: "bent_cigar", category: HighConditioning, multimodal: false, rotations: 1 },
        FunctionInfo { id: 13, name: "sharp_ridge", category: HighConditioning, multimodal: false, rotations: 2 },
        FunctionInfo { id: 14, name: "different_powers", category: HighConditioning, multimodal: false, rotations: 1 },
        FunctionInfo { id: 15, name: "rastrigin_rotated", category: MultimodalAdequate, multimodal: true, rotations: 2 },
        FunctionInfo { id: 16, name: "weierstrass", category: MultimodalAdequate, multimodal: true, rotations: 2 },
        FunctionInfo { id: 17, name: "schaffers_f7", category: MultimodalAdequate, multimodal: true, rotations: 1 },
        FunctionInfo { id: 18, name: "schaffers_f7_ill", category: MultimodalAdequate, multimodal: true, rotations: 1 },
        FunctionInfo { id: 19, name: "griewank_rosenbrock", category: MultimodalAdequate, multimodal: true, rotations: 1 },
        FunctionInfo { id: 20, name: "ackley", category: MultimodalWeak, multimodal: true, rotations: 0 },
        FunctionInfo { id: 21, name: "gallagher_101", category: MultimodalWeak, multimodal: true, rotations: 1 },
        FunctionInfo { id: 22, name: "gallagher_21", category: MultimodalWeak, multimodal: true, rotations: 1 },
        FunctionInfo { id: 23, name: "katsuura", category: MultimodalWeak, multimodal: true, rotations: 1 },
        FunctionInfo { id: 24, name: "lunacek_bi_rastrigin", category: MultimodalWeak, multimodal: true, rotations: 0 },
    ];
    REG
}

fn info(function_id: u32) -> Result<&'static FunctionInfo> {
    registry().iter().find(|f| f.id == function_id).ok_or_else(|| {
        let ids: Vec<String> = registry().iter().map(|f| f.id.to_string()).collect();
        Error::Registry(format!(
            "unknown function id {function_id}; available: {}",
            ids.join(",")
        ))
    })
}

/// Gallagher peak data, expressed in the shifted space (peak 0 at the origin).
#[derive(Debug, Clone)]
struct GallagherPeaks {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Diagonal of the per-peak quadratic form.
    scales: Vec<Vec<f64>>,
}

/// A transformed benchmark function with known optimum.
///
/// Immutable after construction; safe to share and evaluate concurrently.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    function_id: u32,
    instance_id: u32,
    dimension: usize,
    shift: Vec<f64>,
    rot_r: Option<DMatrix<f64>>,
    rot_q: Option<DMatrix<f64>>,
    f_opt: f64,
    peaks: Option<GallagherPeaks>,
    seed_key: u64,
}

fn random_rotation(rng: &mut ChaCha12Rng, d: usize) -> DMatrix<f64> {
    // QR of a Gaussian matrix with the sign of diag(R) fixed.
    let g = DMatrix::from_fn(d, d, |_, _| {
        crate::sampling::inv_norm_cdf(rng.random::<f64>())
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

impl ProblemInstance {
    pub fn new(function_id: u32, instance_id: u32, dimension: usize) -> Result<Self> {
        let fi = info(function_id)?;
        if dimension < 2 {
            return Err(Error::Contract(format!(
                "dimension must be >= 2, got {dimension}"
            )));
        }
        if instance_id < 1 {
            return Err(Error::Contract("instance_id must be >= 1".into()));
        }
        let seed_key = splitmix64(fnv1a64(
            format!("problem:{function_id}:{instance_id}:{dimension}").as_bytes(),
        ));
        let mut rng = ChaCha12Rng::seed_from_u64(seed_key);
        let shift: Vec<f64> = (0..dimension).map(|_| rng.random_range(-4.0..4.0)).collect();
        let f_opt = rng.random_range(-1000.0..1000.0);
        let rot_r = (fi.rotations >= 1).then(|| random_rotation(&mut rng, dimension));
        let rot_q = (fi.rotations >= 2).then(|| random_rotation(&mut rng, dimension));
        let peaks = match function_id {
            21 => Some(Self::make_peaks(&mut rng, dimension, 101)),
            22 => Some(Self::make_peaks(&mut rng, dimension, 21)),
            _ => None,
        };
        Ok(ProblemInstance {
            function_id,
            instance_id,
            dimension,
            shift,
            rot_r,
            rot_q,
            f_opt,
            peaks,
            seed_key,
        })
    }

    /// Untransformed variant for tests and oracles: zero shift, identity
    /// rotations, `f_opt = 0`.
    pub fn untransformed(function_id: u32, dimension: usize) -> Result<Self> {
        let mut inst = Self::new(function_id, 1, dimension)?;
        inst.shift = vec![0.0; dimension];
        inst.f_opt = 0.0;
        inst.rot_r = inst.rot_r.map(|m| DMatrix::identity(m.nrows(), m.ncols()));
        inst.rot_q = inst.rot_q.map(|m| DMatrix::identity(m.nrows(), m.ncols()));
        Ok(inst)
    }

    fn make_peaks(rng: &mut ChaCha12Rng, d: usize, count: usize) -> GallagherPeaks {
        let mut centers = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let mut scales = Vec::with_capacity(count);
        for p in 0..count {
            if p == 0 {
                centers.push(vec![0.0; d]);
                weights.push(10.0);
            } else {
                centers.push((0..d).map(|_| rng.random_range(-4.5..4.5)).collect());
                weights.push(1.1 + 8.0 * (p as f64 - 1.0) / (count as f64 - 2.0));
            }
            let alpha: f64 = if p == 0 {
                1000.0
            } else {
                10f64.powf(rng.random_range(0.0..3.0))
            };
            let scale: Vec<f64> = (0..d)
                .map(|j| alpha.powf(j as f64 / (d as f64 - 1.0) - 0.5))
                .collect();
            scales.push(scale);
        }
        GallagherPeaks {
            centers,
            weights,
            scales,
        }
    }

    pub fn function_id(&self) -> u32 {
        self.function_id
    }
    pub fn instance_id(&self) -> u32 {
        self.instance_id
    }
    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }
    /// Location of the optimum.
    pub fn x_opt(&self) -> &[f64] {
        &self.shift
    }
    pub fn domain(&self) -> (f64, f64) {
        (DOMAIN_LB, DOMAIN_UB)
    }
    /// Key for deriving instance-scoped deterministic streams.
    pub fn seed_key(&self) -> u64 {
        self.seed_key
    }

    /// Best precision of a function value: max(f - f_opt, 0).
    pub fn precision(&self, f_value: f64) -> f64 {
        (f_value - self.f_opt).max(0.0)
    }

    fn rotate(&self, m: &Option<DMatrix<f64>>, z: Vec<f64>) -> Vec<f64> {
        match m {
            Some(r) => {
                let v = r * DVector::from_vec(z);
                v.data.into()
            }
            None => z,
        }
    }

    /// Evaluate at `x`. Points outside the domain box are evaluated as-is;
    /// all functions are total on R^D.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::Contract(format!(
                "dimension mismatch: expected {}, got {}",
                self.dimension,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite coordinate in x".into()));
        }
        let z: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        Ok(self.base(z) + self.f_opt)
    }

    fn base(&self, z: Vec<f64>) -> f64 {
        let d = self.dimension;
        match self.function_id {
            1 => z.iter().map(|v| v * v).sum(),
            2 => ellipsoid_base(&z, 1e6),
            3 => rastrigin_base(&z),
            4 => {
                // Asymmetric per-coordinate scaling, minimum untouched.
                let w: Vec<f64> = z
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let s = if v > 0.0 && i % 2 == 0 { 10.0 } else { 1.0 };
                        s * v
                    })
                    .collect();
                rastrigin_base(&w)
            }
            5 => z
                .iter()
                .enumerate()
                .map(|(i, &v)| cond_weight(10.0, i, d) * v.abs())
                .sum(),
            6 => {
                let w = self.rotate(&self.rot_q, self.rotate(&self.rot_r, z));
                w.iter()
                    .map(|&v| {
                        let s = if v > 0.0 { 100.0 } else { 1.0 };
                        (s * v).powi(2)
                    })
                    .sum()
            }
            7 => {
                let w = self.rotate(&self.rot_r, z);
                let t: Vec<f64> = w
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| cond_weight(100.0, i, d).sqrt() * v)
                    .collect();
                let hat: Vec<f64> = t
                    .iter()
                    .map(|&v| {
                        if v.abs() > 0.5 {
                            (0.5 + v).floor()
                        } else {
                            (0.5 + 10.0 * v).floor() / 10.0
                        }
                    })
                    .collect();
                let hat = self.rotate(&self.rot_q, hat);
                let s: f64 = hat
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| cond_weight(100.0, i, d) * v * v)
                    .sum();
                0.1 * (t[0].abs() / 1e4).max(s)
            }
            8 => rosenbrock_base(&z),
            9 => rosenbrock_base(&self.rotate(&self.rot_r, z)),
            10 => ellipsoid_base(&self.rotate(&self.rot_r, z), 1e6),
            11 => {
                let w = self.rotate(&self.rot_r, z);
                1e6 * w[0] * w[0] + w[1..].iter().map(|v| v * v).sum::<f64>()
            }
            12 => {
                let w = self.rotate(&self.rot_r, z);
                w[0] * w[0] + 1e6 * w[1..].iter().map(|v| v * v).sum::<f64>()
            }
            13 => {
                let w = self.rotate(&self.rot_q, self.rotate(&self.rot_r, z));
                let tail: f64 = w[1..].iter().map(|v| v * v).sum();
                w[0] * w[0] + 100.0 * tail.sqrt()
            }
            14 => {
                let w = self.rotate(&self.rot_r, z);
                w.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        v.abs()
                            .powf(2.0 + 4.0 * i as f64 / (d as f64 - 1.0))
                    })
                    .sum()
            }
            15 => rastrigin_base(&self.rotate(&self.rot_q, self.rotate(&self.rot_r, z))),
            16 => {
                let w = self.rotate(&self.rot_q, self.rotate(&self.rot_r, z));
                let (a, b) = (0.5f64, 3.0f64);
                let f0: f64 = (0..12).map(|k| a.powi(k) * (std::f64::consts::PI * b.powi(k)).cos()).sum();
                let mean: f64 = w
                    .iter()
                    .map(|&v| {
                        let inner: f64 = (0..12)
                            .map(|k| {
                                a.powi(k)
                                    * (2.0 * std::f64::consts::PI * b.powi(k) * (v + 0.5)).cos()
                            })
                            .sum();
                        inner - f0
                    })
                    .sum::<f64>()
                    / d as f64;
                10.0 * mean.powi(3)
            }
            17 | 18 => {
                let w = self.rotate(&self.rot_r, z);
                let cond: f64 = if self.function_id == 18 { 1000.0 } else { 10.0 };
                let w: Vec<f64> = w
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| cond_weight(cond * cond, i, d).sqrt() * v)
                    .collect();
                let mut acc = 0.0;
                for i in 0..d - 1 {
                    let s = (w[i] * w[i] + w[i + 1] * w[i + 1]).sqrt();
                    acc += s.sqrt() * (1.0 + (50.0 * s.powf(0.2)).sin().powi(2));
                }
                (acc / (d as f64 - 1.0)).powi(2)
            }
            19 => {
                let w = self.rotate(&self.rot_r, z);
                let mut acc = 0.0;
                for i in 0..d - 1 {
                    let a = w[i] + 1.0;
                    let b = w[i + 1] + 1.0;
                    let s = 100.0 * (a * a - b).powi(2) + (a - 1.0).powi(2);
                    acc += s / 4000.0 - s.cos() + 1.0;
                }
                10.0 * acc / (d as f64 - 1.0)
            }
            20 => {
                let ms: f64 = z.iter().map(|v| v * v).sum::<f64>() / d as f64;
                let mean_cos: f64 = z
                    .iter()
                    .map(|&v| (2.0 * std::f64::consts::PI * v).cos())
                    .sum::<f64>()
                    / d as f64;
                20.0 - 20.0 * (-0.2 * ms.sqrt()).exp() + (1.0f64).exp() - mean_cos.exp()
            }
            21 | 22 => {
                let w = self.rotate(&self.rot_r, z);
                let peaks = self.peaks.as_ref().expect("gallagher peaks");
                let mut best = f64::NEG_INFINITY;
                for p in 0..peaks.weights.len() {
                    let q: f64 = w
                        .iter()
                        .zip(&peaks.centers[p])
                        .zip(&peaks.scales[p])
                        .map(|((&wi, &ci), &si)| si * (wi - ci) * (wi - ci))
                        .sum();
                    let v = peaks.weights[p] * (-q / (2.0 * d as f64)).exp();
                    if v > best {
                        best = v;
                    }
                }
                (10.0 - best).powi(2)
            }
            23 => {
                let w = self.rotate(&self.rot_r, z);
                let c = 10.0 / (d as f64).powi(2);
                let e = 10.0 / (d as f64).powf(1.2);
                let mut prod = 1.0;
                for (i, &v) in w.iter().enumerate() {
                    let mut s = 0.0;
                    for j in 1..=32 {
                        let t = 2f64.powi(j) * v;
                        s += (t - t.round()).abs() / 2f64.powi(j);
                    }
                    prod *= (1.0 + (i as f64 + 1.0) * s).powf(e);
                }
                c * prod - c
            }
            24 => {
                let sphere0: f64 = z.iter().map(|v| v * v).sum();
                let sphere1: f64 = z.iter().map(|v| (v - 5.0) * (v - 5.0)).sum();
                let rast: f64 = 10.0
                    * (d as f64
                        - z.iter()
                            .map(|&v| (2.0 * std::f64::consts::PI * v).cos())
                            .sum::<f64>());
                sphere0.min(d as f64 + 0.9 * sphere1) + rast
            }
            _ => unreachable!("registry bounds function ids"),
        }
    }
}

fn cond_weight(cond: f64, i: usize, d: usize) -> f64 {
    cond.powf(i as f64 / (d as f64 - 1.0))
}

fn ellipsoid_base(z: &[f64], cond: f64) -> f64 {
    let d = z.len();
    z.iter()
        .enumerate()
        .map(|(i, &v)| cond_weight(cond, i, d) * v * v)
        .sum()
}

fn rosenbrock_base(z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..z.len() - 1 {
        let a = z[i] + 1.0;
        let b = z[i + 1] + 1.0;
        acc += 100.0 * (a * a - b).powi(2) + (a - 1.0).powi(2);
    }
    acc
}

fn rastrigin_base(z: &[f64]) -> f64 {
    let d = z.len() as f64;
    let cos_sum: f64 = z
        .iter()
        .map(|&v| (2.0 * std::f64::consts::PI * v).cos())
        .sum();
    10.0 * (d - cos_sum) + z.iter().map(|v| v * v).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_instance_optimum_matches_f_opt() {
        let inst = ProblemInstance::new(1, 1, 5).unwrap();
        let t = inst.x_opt().to_vec();
        assert_eq!(inst.evaluate(&t).unwrap(), inst.f_opt());
    }

    #[test]
    fn make_instance_is_deterministic() {
        let a = ProblemInstance::new(1, 1, 5).unwrap();
        let b = ProblemInstance::new(1, 1, 5).unwrap();
        assert_eq!(a.x_opt(), b.x_opt());
        assert_eq!(a.f_opt(), b.f_opt());
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert_eq!(a.evaluate(&x).unwrap(), b.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn rosenbrock_instance_optimum() {
        // Checked against the module's own closed-form optimum: the base
        // Rosenbrock shape has its minimum 0 at the shifted origin.
        let inst = ProblemInstance::new(8, 2, 5).unwrap();
        let x = inst.x_opt().to_vec();
        assert_eq!(inst.evaluate(&x).unwrap(), inst.f_opt());
        let base = ProblemInstance::untransformed(8, 4).unwrap();
        // brute-force the textbook formula at a non-trivial point
        let p = [0.3, -0.7, 1.2, 0.1];
        let w: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        let mut expect = 0.0;
        for i in 0..3 {
            expect += 100.0 * (w[i] * w[i] - w[i + 1]).powi(2) + (w[i] - 1.0).powi(2);
        }
        assert!((base.evaluate(&p).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn sphere_trivial_values() {
        let inst = ProblemInstance::untransformed(1, 4).unwrap();
        assert_eq!(inst.evaluate(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(inst.evaluate(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn ellipsoid_at_ones_is_sum_of_weights() {
        // Direct formula evaluation at a hand-checkable point.
        let z = [1.0; 5];
        let got = ellipsoid_base(&z, 1.0);
        assert_eq!(got, 5.0);
        let got10 = ellipsoid_base(&z, 10.0);
        let expect: f64 = (0..5).map(|i| 10f64.powf(i as f64 / 4.0)).sum();
        assert!((got10 - expect).abs() < 1e-12);
    }

    #[test]
    fn precision_clips_at_zero() {
        let inst = ProblemInstance::new(3, 1, 5).unwrap();
        assert_eq!(inst.precision(inst.f_opt()), 0.0);
        assert!((inst.precision(inst.f_opt() + 1e-3) - 1e-3).abs() < 1e-12);
        assert_eq!(inst.precision(inst.f_opt() - 1e-12), 0.0);
    }

    #[test]
    fn evaluate_contract_errors() {
        let inst = ProblemInstance::new(1, 1, 5).unwrap();
        assert!(inst.evaluate(&[0.0; 4]).is_err());
        assert!(inst.evaluate(&[0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(ProblemInstance::new(99, 1, 5).is_err());
        assert!(ProblemInstance::new(1, 1, 1).is_err());
    }

    #[test]
    fn all_functions_optimum_and_lower_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for fi in registry() {
            for iid in 1..=2 {
                let inst = ProblemInstance::new(fi.id, iid, 5).unwrap();
                let x = inst.x_opt().to_vec();
                let at_opt = inst.evaluate(&x).unwrap();
                assert_eq!(at_opt, inst.f_opt(), "fid {} optimum", fi.id);
                for _ in 0..100 {
                    let p: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
                    let v = inst.evaluate(&p).unwrap();
                    assert!(v.is_finite(), "fid {} non-finite", fi.id);
                    assert!(
                        v >= inst.f_opt() - 1e-9,
                        "fid {} below optimum: {} < {}",
                        fi.id,
                        v,
                        inst.f_opt()
                    );
                }
            }
        }
    }

    #[test]
    fn rotations_are_orthogonal() {
        for fi in registry() {
            let inst = ProblemInstance::new(fi.id, 1, 6).unwrap();
            for m in [&inst.rot_r, &inst.rot_q].into_iter().flatten() {
                let prod = m.transpose() * m;
                let eye = DMatrix::<f64>::identity(6, 6);
                assert!((prod - eye).abs().max() < 1e-10, "fid {}", fi.id);
            }
        }
    }
}
