//! y-distribution features: moment skewness, excess kurtosis, and the number
//! of modes of a Gaussian KDE over the objective values.

use super::{FeatureValue, Sample};

pub fn distr_features(sample: &Sample) -> Vec<FeatureValue> {
    let y = sample.y();
    let n = y.len() as f64;
    let mean = super::mean(y);
    let m2 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if m2 <= 0.0 {
        // constant sample: documented sentinels
        return vec![
            FeatureValue::flagged(0.0),
            FeatureValue::flagged(0.0),
            FeatureValue::flagged(1.0),
        ];
    }
    let m3 = y.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = y.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2) - 3.0;
    vec![
        FeatureValue::ok(skewness),
        FeatureValue::ok(kurtosis),
        FeatureValue::ok(number_of_peaks(y) as f64),
    ]
}

/// Local maxima of a Gaussian KDE (Silverman bandwidth) on a 512-point grid
/// over [min y, max y].
fn number_of_peaks(y: &[f64]) -> usize {
    let n = y.len() as f64;
    let sd = super::std_dev(y);
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let idx = p * (sorted.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (idx - lo as f64)
    };
    let iqr = q(0.75) - q(0.25);
    let mut bw = 0.9 * sd.min(iqr / 1.34) * n.powf(-0.2);
    if bw <= 0.0 {
        bw = 0.9 * sd * n.powf(-0.2);
    }
    if bw <= 0.0 {
        return 1;
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    const GRID: usize = 512;
    let mut density = vec![0.0f64; GRID];
    let step = (hi - lo) / (GRID - 1) as f64;
    for (i, d) in density.iter_mut().enumerate() {
        let g = lo + step * i as f64;
        *d = y
            .iter()
            .map(|&v| (-0.5 * ((g - v) / bw).powi(2)).exp())
            .sum::<f64>();
    }
    let mut peaks = 0;
    for i in 0..GRID {
        let left = if i == 0 { f64::NEG_INFINITY } else { density[i - 1] };
        let right = if i == GRID - 1 { f64::NEG_INFINITY } else { density[i + 1] };
        if density[i] > left && density[i] > right {
            peaks += 1;
        }
    }
    peaks.max(1)
}
