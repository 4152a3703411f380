//! Information content features: entropy of fitness-change symbols along a
//! greedy nearest-neighbor tour, swept over a logarithmic sensitivity grid.

use super::{euclid, FeatureValue, Sample};
use crate::error::{Error, Result};

const EPS_LO: f64 = 1e-5;
const EPS_HI: f64 = 1e15;
const EPS_STEPS: usize = 1000;

/// Greedy nearest-neighbor tour starting from the first sample point,
/// ties broken by index.
fn nn_tour(sample: &Sample) -> Vec<usize> {
    let n = sample.rows();
    let x = sample.x();
    let mut visited = vec![false; n];
    let mut tour = Vec::with_capacity(n);
    let mut current = 0usize;
    visited[0] = true;
    tour.push(0);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, &seen) in visited.iter().enumerate() {
            if seen {
                continue;
            }
            let d = euclid(&x[current], &x[j]);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        visited[best] = true;
        tour.push(best);
        current = best;
    }
    tour
}

/// Fitness-change rates along the tour (difference over step length).
fn rates(sample: &Sample, tour: &[usize]) -> Vec<f64> {
    let x = sample.x();
    let y = sample.y();
    tour.windows(2)
        .map(|w| {
            let dy = y[w[1]] - y[w[0]];
            let dist = euclid(&x[w[0]], &x[w[1]]);
            if dist > 0.0 {
                dy / dist
            } else if dy == 0.0 {
                0.0
            } else {
                dy.signum() * f64::INFINITY
            }
        })
        .collect()
}

fn symbols(rates: &[f64], eps: f64) -> Vec<i8> {
    rates
        .iter()
        .map(|&d| {
            if d > eps {
                1
            } else if d < -eps {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Entropy over the six ordered pairs of distinct consecutive symbols, base 6.
fn entropy(sym: &[i8]) -> f64 {
    if sym.len() < 2 {
        return 0.0;
    }
    let mut counts = [[0usize; 3]; 3];
    for w in sym.windows(2) {
        counts[(w[0] + 1) as usize][(w[1] + 1) as usize] += 1;
    }
    let total = (sym.len() - 1) as f64;
    let mut h = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            if a == b {
                continue;
            }
            let p = counts[a][b] as f64 / total;
            if p > 0.0 {
                h -= p * p.log(6.0);
            }
        }
    }
    h
}

fn eps_grid() -> Vec<f64> {
    let ratio = (EPS_HI / EPS_LO).powf(1.0 / (EPS_STEPS as f64 - 1.0));
    (0..EPS_STEPS).map(|i| EPS_LO * ratio.powi(i as i32)).collect()
}

pub fn information_content_features(sample: &Sample) -> Result<Vec<FeatureValue>> {
    if sample.rows() < 3 {
        return Err(Error::Contract("information content needs >= 3 rows".into()));
    }
    let tour = nn_tour(sample);
    let deltas = rates(sample, &tour);

    let sym0 = symbols(&deltas, 0.0);
    let m0 = if sym0.len() < 2 {
        0.0
    } else {
        sym0.windows(2).filter(|w| w[0] != w[1]).count() as f64 / (sym0.len() - 1) as f64
    };

    if deltas.iter().all(|&d| d == 0.0) {
        // constant fitness: all-zero symbols at every sensitivity
        return Ok(vec![
            FeatureValue::flagged(0.0),
            FeatureValue::flagged(EPS_LO.log10()),
            FeatureValue::flagged(EPS_LO),
            FeatureValue::flagged(EPS_LO.log10()),
            FeatureValue::flagged(0.0),
        ]);
    }

    let grid = eps_grid();
    let mut h_values = Vec::with_capacity(grid.len() + 1);
    h_values.push((0.0, entropy(&sym0)));
    for &eps in &grid {
        h_values.push((eps, entropy(&symbols(&deltas, eps))));
    }

    let (mut h_max, mut eps_max) = (f64::NEG_INFINITY, 0.0);
    for &(eps, h) in &h_values {
        if h > h_max {
            h_max = h;
            eps_max = eps;
        }
    }

    // settling sensitivity: smallest positive eps with H(eps) < 0.05
    let eps_s = grid
        .iter()
        .zip(h_values[1..].iter())
        .find(|(_, (_, h))| *h < 0.05)
        .map(|(&e, _)| e);
    let (eps_s_val, eps_s_flag) = match eps_s {
        Some(e) => (e.log10(), false),
        None => (EPS_HI.log10(), true),
    };
    // half-settling: smallest positive eps with H(eps) < 0.5 * h_max
    let eps_ratio = grid
        .iter()
        .zip(h_values[1..].iter())
        .find(|(_, (_, h))| *h < 0.5 * h_max)
        .map(|(&e, _)| e);
    let (eps_ratio_val, eps_ratio_flag) = match eps_ratio {
        Some(e) => (e.log10(), false),
        None => (EPS_HI.log10(), true),
    };

    let mk = |v: f64, flag: bool| {
        if flag {
            FeatureValue::flagged(v)
        } else {
            FeatureValue::ok(v)
        }
    };
    Ok(vec![
        FeatureValue::ok(h_max),
        mk(eps_s_val, eps_s_flag),
        FeatureValue::ok(eps_max),
        mk(eps_ratio_val, eps_ratio_flag),
        FeatureValue::ok(m0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_sample(y: Vec<f64>) -> Sample {
        // points on a line, unit spacing: the tour is the identity order
        let x: Vec<Vec<f64>> = (0..y.len()).map(|i| vec![i as f64, 0.0]).collect();
        Sample::new(x, y).unwrap()
    }

    #[test]
    fn monotone_tour_has_zero_entropy_and_m0() {
        let s = line_sample((0..50).map(|i| i as f64).collect());
        let sym = symbols(&rates(&s, &nn_tour(&s)), 0.0);
        assert!(sym.iter().all(|&v| v == 1));
        assert_eq!(entropy(&sym), 0.0);
        let f = information_content_features(&s).unwrap();
        assert_eq!(f[4].value, 0.0); // m0
    }

    #[test]
    fn alternating_changes_every_step() {
        let s = line_sample((0..50).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect());
        let f = information_content_features(&s).unwrap();
        assert_eq!(f[4].value, 1.0); // m0
    }

    #[test]
    fn hand_built_tour_entropy_by_enumeration() {
        // 10 points on a line; rate sequence: +1 +1 -2 +1 -2 +1 +1 +1 -2
        let y = vec![0.0, 1.0, 2.0, 0.0, 1.0, -1.0, 0.0, 1.0, 2.0, 0.0];
        let s = line_sample(y);
        let tour = nn_tour(&s);
        let deltas = rates(&s, &tour);
        // eps = 0: symbols +,+,-,+,-,+,+,+,-; consecutive pairs:
        // (+,+)x3 (+,-)x3 (-,+)x2 over 8 pairs
        let h0 = entropy(&symbols(&deltas, 0.0));
        let expect0 = -(3.0 / 8.0) * (3.0f64 / 8.0).log(6.0) - (2.0 / 8.0) * (2.0f64 / 8.0).log(6.0);
        assert!((h0 - expect0).abs() < 1e-12);
        // eps = 1.5: only |rate| > 1.5 keeps a sign → 0,0,-,0,-,0,0,0,-
        // pairs: (0,0)x3 (0,-)x3 (-,0)x2 → distinct-symbol pairs 5 of 8
        let h15 = entropy(&symbols(&deltas, 1.5));
        let expect15 =
            -(3.0 / 8.0) * (3.0f64 / 8.0).log(6.0) - (2.0 / 8.0) * (2.0f64 / 8.0).log(6.0);
        assert!((h15 - expect15).abs() < 1e-12);
    }

    #[test]
    fn constant_fitness_is_flagged() {
        let s = line_sample(vec![3.0; 20]);
        let f = information_content_features(&s).unwrap();
        assert_eq!(f[0].value, 0.0);
        assert_eq!(f[4].value, 0.0);
        assert!(f.iter().all(|v| v.degenerate));
    }
}
