//! Nearest-better-clustering features: statistics of nearest-neighbor versus
//! nearest-strictly-better distances.

use super::{euclid, mean, pearson, std_dev, FeatureValue, Sample};
use crate::error::{Error, Result};

const RATIO_CAP: f64 = 1e12;

pub fn nbc_features(sample: &Sample) -> Result<Vec<FeatureValue>> {
    let n = sample.rows();
    if n < 3 {
        return Err(Error::Contract("nbc needs at least 3 rows".into()));
    }
    let x = sample.x();
    let y = sample.y();

    // "better" is strict on (y, index)
    let better = |a: usize, b: usize| (y[a], a) < (y[b], b);

    let mut d_nn = vec![f64::INFINITY; n];
    let mut d_nb = vec![f64::INFINITY; n];
    let mut nb_target = vec![usize::MAX; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = euclid(&x[i], &x[j]);
            if d < d_nn[i] {
                d_nn[i] = d;
            }
            if better(j, i) && (d < d_nb[i] || (d == d_nb[i] && j < nb_target[i])) {
                d_nb[i] = d;
                nb_target[i] = j;
            }
        }
    }
    // global best has no better point: use the max nearest-better distance of the rest
    let max_nb = d_nb
        .iter()
        .filter(|v| v.is_finite())
        .cloned()
        .fold(0.0, f64::max);
    for v in d_nb.iter_mut() {
        if !v.is_finite() {
            *v = max_nb;
        }
    }

    let sd_nn = std_dev(&d_nn);
    let sd_nb = std_dev(&d_nb);
    let mut flagged = false;
    let sd_ratio = if sd_nb > 0.0 {
        sd_nn / sd_nb
    } else {
        flagged = true;
        0.0
    };
    let mean_nb = mean(&d_nb);
    let mean_ratio = if mean_nb > 0.0 {
        mean(&d_nn) / mean_nb
    } else {
        flagged = true;
        0.0
    };
    let cor = pearson(&d_nn, &d_nb);

    // coefficient of variation of d_nb / d_nn ratios, zero distances guarded
    let ratios: Vec<f64> = d_nn
        .iter()
        .zip(&d_nb)
        .map(|(&nn, &nb)| {
            if nn > 0.0 {
                (nb / nn).min(RATIO_CAP)
            } else if nb == 0.0 {
                1.0
            } else {
                RATIO_CAP
            }
        })
        .collect();
    let ratio_mean = mean(&ratios);
    let mut cv_flag = false;
    let coeff_var = if ratio_mean != 0.0 {
        std_dev(&ratios) / ratio_mean
    } else {
        cv_flag = true;
        0.0
    };

    // correlation of fitness with nearest-better indegree
    let mut indegree = vec![0.0f64; n];
    for &t in nb_target.iter().filter(|&&t| t != usize::MAX) {
        indegree[t] += 1.0;
    }
    let fit_cor = pearson(y, &indegree);

    let mk_cor = |c: Option<f64>| match c {
        Some(v) => FeatureValue::ok(v),
        None => FeatureValue::flagged(0.0),
    };
    let mk = |v: f64, f: bool| if f { FeatureValue::flagged(v) } else { FeatureValue::ok(v) };
    Ok(vec![
        mk(sd_ratio, flagged),
        mk(mean_ratio, flagged),
        mk_cor(cor),
        mk(coeff_var, cv_flag),
        mk_cor(fit_cor),
    ])
}
