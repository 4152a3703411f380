//! Exploratory landscape analysis: the 46 "cheap" features in six groups
//! (y-distribution, meta model, dispersion, information content, nearest
//! better clustering, principal component analysis), with median aggregation
//! over independent design repetitions.

mod disp;
mod distr;
mod ic;
mod meta;
mod names;
mod nbc;
mod pca;

pub use names::{feature_index, feature_names, FEATURE_COUNT};

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::sampling;

/// A design sample: points in the domain with their objective values.
#[derive(Debug, Clone)]
pub struct Sample {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Contract("sample X/y length mismatch".into()));
        }
        if x.is_empty() {
            return Err(Error::Contract("empty sample".into()));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::Contract("ragged sample matrix".into()));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite entry in sample".into()));
        }
        Ok(Sample { x, y })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }
    pub fn dimension(&self) -> usize {
        self.x[0].len()
    }
    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// One computed feature value plus a degeneracy flag (set when the input was
/// degenerate and a documented sentinel was substituted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureValue {
    pub value: f64,
    pub degenerate: bool,
}

impl FeatureValue {
    pub fn ok(value: f64) -> Self {
        FeatureValue { value, degenerate: false }
    }
    pub fn flagged(value: f64) -> Self {
        FeatureValue { value, degenerate: true }
    }
}

/// The 46 canonical ELA feature values for one problem instance, in fixed
/// canonical order.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    values: Vec<FeatureValue>,
}

impl FeatureVector {
    fn from_values(values: Vec<FeatureValue>) -> Self {
        assert_eq!(values.len(), FEATURE_COUNT);
        FeatureVector { values }
    }

    pub fn get(&self, name: &str) -> Option<FeatureValue> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, FeatureValue)> + '_ {
        feature_names()
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// All six feature groups on one sample, in canonical order.
pub fn compute_features(sample: &Sample) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    values.extend(distr::distr_features(sample));
    values.extend(meta::meta_model_features(sample)?);
    values.extend(disp::dispersion_features(sample)?);
    values.extend(ic::information_content_features(sample)?);
    values.extend(nbc::nbc_features(sample)?);
    values.extend(pca::pca_features(sample)?);
    Ok(FeatureVector::from_values(values))
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of per-repetition feature vectors. A feature degenerate in more
/// than half of the repetitions keeps its flag.
pub fn aggregate_repetitions(reps: &[FeatureVector]) -> Result<FeatureVector> {
    if reps.is_empty() {
        return Err(Error::Contract("no repetitions to aggregate".into()));
    }
    let mut out = Vec::with_capacity(FEATURE_COUNT);
    for i in 0..FEATURE_COUNT {
        let vals: Vec<f64> = reps.iter().map(|r| r.values[i].value).collect();
        let degenerate_count = reps.iter().filter(|r| r.values[i].degenerate).count();
        out.push(FeatureValue {
            value: median_of(vals),
            degenerate: degenerate_count * 2 > reps.len(),
        });
    }
    Ok(FeatureVector::from_values(out))
}

/// Extract the median-aggregated feature vector for an instance: run the
/// design and all six groups per repetition, then take per-feature medians.
pub fn extract_features(instance: &ProblemInstance, repetitions: u32) -> Result<FeatureVector> {
    extract_features_sized(instance, repetitions, 100 * instance.dimension())
}

/// Same as [`extract_features`] with an explicit design size per repetition.
pub fn extract_features_sized(
    instance: &ProblemInstance,
    repetitions: u32,
    rows: usize,
) -> Result<FeatureVector> {
    if repetitions < 1 {
        return Err(Error::Contract("repetitions must be >= 1".into()));
    }
    use rayon::prelude::*;
    let reps: Result<Vec<FeatureVector>> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let sample = sampling::design_for_ela_sized(instance, rep, rows)?;
            compute_features(&sample)
        })
        .collect();
    aggregate_repetitions(&reps?)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma).powi(2);
        db += (b[i] - mb).powi(2);
    }
    if da <= 0.0 || db <= 0.0 {
        None
    } else {
        Some(num / (da * db).sqrt())
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
