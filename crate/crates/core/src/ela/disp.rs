//! Dispersion features: pairwise-distance statistics of the best-q% subset
//! relative to the full sample, for q in {2, 5, 10, 25}.

use super::{euclid, FeatureValue, Sample};
use crate::error::{Error, Result};

const QUANTILES: [f64; 4] = [0.02, 0.05, 0.10, 0.25];

fn mean_median_pairwise(points: &[&[f64]]) -> (f64, f64) {
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            dists.push(euclid(points[i], points[j]));
        }
    }
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    (mean, median)
}

pub fn dispersion_features(sample: &Sample) -> Result<Vec<FeatureValue>> {
    let n = sample.rows();
    if n < 4 {
        return Err(Error::Contract("dispersion needs at least 4 rows".into()));
    }
    // index order by (y, index) — ties broken by index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        sample.y()[a]
            .partial_cmp(&sample.y()[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let all: Vec<&[f64]> = sample.x().iter().map(|r| r.as_slice()).collect();
    let (full_mean, full_median) = mean_median_pairwise(&all);

    let mut ratio_mean = Vec::new();
    let mut ratio_median = Vec::new();
    let mut diff_mean = Vec::new();
    let mut diff_median = Vec::new();
    for &q in &QUANTILES {
        let mut k = (q * n as f64).ceil() as usize;
        let mut flag = false;
        if k < 2 {
            k = 2;
            flag = true;
        }
        let subset: Vec<&[f64]> = order[..k].iter().map(|&i| all[i]).collect();
        let (sub_mean, sub_median) = mean_median_pairwise(&subset);
        let mk = |v: f64| if flag { FeatureValue::flagged(v) } else { FeatureValue::ok(v) };
        ratio_mean.push(mk(sub_mean / full_mean));
        ratio_median.push(mk(sub_median / full_median));
        diff_mean.push(mk(sub_mean - full_mean));
        diff_median.push(mk(sub_median - full_median));
    }
    let mut out = ratio_mean;
    out.extend(ratio_median);
    out.extend(diff_mean);
    out.extend(diff_median);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn constant_y_ratio_near_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let y = vec![1.0; 200];
        let s = Sample::new(x, y).unwrap();
        let f = dispersion_features(&s).unwrap();
        // no structure: subset is just the first rows of an iid cloud
        for v in &f[0..8] {
            assert!(v.value > 0.5 && v.value < 2.0, "ratio {}", v.value);
        }
    }

    #[test]
    fn sphere_like_target_contracts_best_subset() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let x: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
        let s = Sample::new(x, y).unwrap();
        let f = dispersion_features(&s).unwrap();
        assert!(f[0].value < 1.0, "ratio_mean_02 = {}", f[0].value);
    }

    #[test]
    fn four_point_hand_example() {
        // unit square: distances 1,1,1,1,sqrt2,sqrt2
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let s = Sample::new(x, y).unwrap();
        let f = dispersion_features(&s).unwrap();
        let full_mean = (4.0 + 2.0 * 2f64.sqrt()) / 6.0;
        // best-2 subset = points 0,1 → distance 1
        let expect = 1.0 / full_mean;
        assert!((f[0].value - expect).abs() < 1e-12);
        assert!(f[0].degenerate); // promoted to best-2
        // ratio < 1 ⇔ diff < 0 consistency
        for i in 0..4 {
            assert_eq!(f[i].value < 1.0, f[8 + i].value < 0.0);
        }
    }
}
