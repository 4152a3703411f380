//! PCA features: explained-variance summaries of covariance/correlation
//! eigenspectra on the design points alone and augmented with the objective.

use super::{FeatureValue, Sample};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Eigenvalues (descending) of the covariance or correlation matrix of the
/// given columns. Returns the eigenvalues and whether zero-variance columns
/// were dropped (correlation scaling only).
fn spectrum(cols: &[Vec<f64>], correlation: bool) -> (Vec<f64>, bool) {
    let n = cols[0].len() as f64;
    let mut active: Vec<&Vec<f64>> = Vec::new();
    let mut dropped = false;
    let mut stds = Vec::new();
    for c in cols {
        let mean = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if correlation && var <= 0.0 {
            dropped = true;
            continue;
        }
        active.push(c);
        stds.push(var.sqrt());
    }
    let p = active.len();
    let means: Vec<f64> = active.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mut m = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut cov = 0.0;
            for i in 0..cols[0].len() {
                cov += (active[a][i] - means[a]) * (active[b][i] - means[b]);
            }
            cov /= n - 1.0;
            if correlation {
                cov /= stds[a] * stds[b];
            }
            m[(a, b)] = cov;
            m[(b, a)] = cov;
        }
    }
    let mut eig: Vec<f64> = m
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (eig, dropped)
}

fn expl_var(eig: &[f64]) -> f64 {
    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for (k, &v) in eig.iter().enumerate() {
        acc += v;
        if acc >= 0.9 * total {
            return (k + 1) as f64 / eig.len() as f64;
        }
    }
    1.0
}

fn pc1_share(eig: &[f64]) -> f64 {
    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    eig[0] / total
}

pub fn pca_features(sample: &Sample) -> Result<Vec<FeatureValue>> {
    let d = sample.dimension();
    let n = sample.rows();
    if n <= d + 1 {
        return Err(Error::Contract("pca needs more rows than columns".into()));
    }
    let x_cols: Vec<Vec<f64>> = (0..d)
        .map(|j| sample.x().iter().map(|r| r[j]).collect())
        .collect();
    let mut init_cols = x_cols.clone();
    init_cols.push(sample.y().to_vec());

    let bases = [
        spectrum(&x_cols, false),    // cov_x
        spectrum(&x_cols, true),     // cor_x
        spectrum(&init_cols, false), // cov_init
        spectrum(&init_cols, true),  // cor_init
    ];
    let mk = |v: f64, flag: bool| if flag { FeatureValue::flagged(v) } else { FeatureValue::ok(v) };
    let mut out = Vec::with_capacity(8);
    for (eig, dropped) in &bases {
        out.push(mk(expl_var(eig), *dropped));
    }
    for (eig, dropped) in &bases {
        out.push(mk(pc1_share(eig), *dropped));
    }
    Ok(out)
}
