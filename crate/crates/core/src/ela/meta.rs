//! Meta-model features: adjusted R² of four least-squares fits (linear,
//! linear + interactions, quadratic, quadratic + interactions) plus summary
//! statistics of the simple linear and quadratic coefficients.

use super::{FeatureValue, Sample};
use crate::error::Result;
use nalgebra::{DMatrix, DVector};

const RATIO_CAP: f64 = 1e12;

struct Fit {
    coefs: Vec<f64>,
    adj_r2: f64,
    degenerate: bool,
}

/// Least squares via normal equations; falls back to an SVD pseudoinverse on
/// rank deficiency (flagged).
fn fit(design: &DMatrix<f64>, y: &DVector<f64>) -> Fit {
    let n = design.nrows() as f64;
    let p = design.ncols() as f64 - 1.0; // predictors excluding intercept
    let xtx = design.transpose() * design;
    let xty = design.transpose() * y;
    let (beta, degenerate) = match xtx.clone().cholesky() {
        Some(ch) => (ch.solve(&xty), false),
        None => {
            let svd = xtx.svd(true, true);
            (svd.solve(&xty, 1e-12).expect("svd solve"), true)
        }
    };
    let resid = y - design * &beta;
    let ss_res: f64 = resid.iter().map(|v| v * v).sum();
    let mean_y = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let (adj_r2, degenerate) = if ss_tot <= 0.0 {
        (1.0, true)
    } else {
        let r2 = 1.0 - ss_res / ss_tot;
        (1.0 - (1.0 - r2) * (n - 1.0) / (n - p - 1.0), degenerate)
    };
    Fit {
        coefs: beta.iter().copied().collect(),
        adj_r2,
        degenerate,
    }
}

fn design_matrix(sample: &Sample, interactions: bool, quadratic: bool) -> DMatrix<f64> {
    let n = sample.rows();
    let d = sample.dimension();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    cols.push(vec![1.0; n]);
    for j in 0..d {
        cols.push(sample.x().iter().map(|r| r[j]).collect());
    }
    if quadratic {
        for j in 0..d {
            cols.push(sample.x().iter().map(|r| r[j] * r[j]).collect());
        }
    }
    if interactions {
        for a in 0..d {
            for b in (a + 1)..d {
                cols.push(sample.x().iter().map(|r| r[a] * r[b]).collect());
            }
        }
    }
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

pub fn meta_model_features(sample: &Sample) -> Result<Vec<FeatureValue>> {
    let d = sample.dimension();
    let y = DVector::from_column_slice(sample.y());

    let lin = fit(&design_matrix(sample, false, false), &y);
    let lin_int = fit(&design_matrix(sample, true, false), &y);
    let quad = fit(&design_matrix(sample, false, true), &y);
    let quad_int = fit(&design_matrix(sample, true, true), &y);

    let slopes: Vec<f64> = lin.coefs[1..=d].iter().map(|c| c.abs()).collect();
    let coef_min = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let coef_max = slopes.iter().cloned().fold(0.0, f64::max);
    let (max_by_min, ratio_degen) = guarded_ratio(coef_max, coef_min);

    // simple quadratic fit: coefficients of the squared terms
    let qcoefs: Vec<f64> = quad.coefs[(1 + d)..(1 + 2 * d)].iter().map(|c| c.abs()).collect();
    let q_min = qcoefs.iter().cloned().fold(f64::INFINITY, f64::min);
    let q_max = qcoefs.iter().cloned().fold(0.0, f64::max);
    let (q_cond, q_degen) = guarded_ratio(q_max, q_min);

    let mk = |v: f64, flag: bool| {
        if flag {
            FeatureValue::flagged(v)
        } else {
            FeatureValue::ok(v)
        }
    };
    Ok(vec![
        mk(lin.adj_r2, lin.degenerate),
        mk(lin.coefs[0], lin.degenerate),
        mk(coef_min, lin.degenerate),
        mk(coef_max, lin.degenerate),
        mk(max_by_min, lin.degenerate || ratio_degen),
        mk(lin_int.adj_r2, lin_int.degenerate),
        mk(quad.adj_r2, quad.degenerate),
        mk(q_cond, quad.degenerate || q_degen),
        mk(quad_int.adj_r2, quad_int.degenerate),
    ])
}

fn guarded_ratio(max: f64, min: f64) -> (f64, bool) {
    if min <= max * 1e-12 {
        if max == 0.0 {
            (1.0, true)
        } else {
            (RATIO_CAP, true)
        }
    } else {
        (max / min, false)
    }
}
