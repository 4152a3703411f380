//! Microbenchmarks for the pipeline's hot paths: low-discrepancy sampling,
//! landscape feature extraction, tree fitting, and attribution.

use cma_explain::attribution::tree_shap;
use cma_explain::ela::extract_features;
use cma_explain::forest::{
    fit_tree, HyperParams, MaxFeatures, SplitCriterion, TaskKind,
};
use cma_explain::problems::ProblemInstance;
use cma_explain::sampling::{SamplerKind, UniformSource};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn sobol_generation(c: &mut Criterion) {
    c.bench_function("sobol 1024 points in 5d", |b| {
        b.iter(|| {
            let mut source = UniformSource::new(SamplerKind::Sobol, 5, 7).unwrap();
            let mut point = [0.0; 5];
            let mut acc = 0.0;
            for _ in 0..1024 {
                source.next_point(&mut point);
                acc += point[0];
            }
            black_box(acc)
        })
    });
}

fn ela_extraction(c: &mut Criterion) {
    let instance = ProblemInstance::untransformed(8, 5).unwrap();
    c.bench_function("ela features, one repetition, 5d rosenbrock", |b| {
        b.iter(|| black_box(extract_features(&instance, 1).unwrap()))
    });
}

fn tree_fitting(c: &mut Criterion) {
    let n = 120;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..46)
                .map(|f| ((i * 31 + f * 17) % 101) as f64 / 101.0)
                .collect()
        })
        .collect();
    let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>().sin()).collect();
    let params = HyperParams {
        n_estimators: 1,
        max_features: MaxFeatures::Auto,
        max_depth: Some(8),
        min_samples_split: 2,
        criterion: SplitCriterion::SquaredError,
    };
    c.bench_function("cart fit, 120 rows x 46 features, depth 8", |b| {
        b.iter(|| black_box(fit_tree(&x, &y, &params, TaskKind::Regression, 0).unwrap()))
    });

    let tree = fit_tree(&x, &y, &params, TaskKind::Regression, 0).unwrap();
    let background: Vec<Vec<f64>> = x.iter().take(40).cloned().collect();
    c.bench_function("tree attribution against 40 background rows", |b| {
        b.iter(|| black_box(tree_shap(&tree, &x[0], &background).unwrap()))
    });
}

criterion_group!(benches, sobol_generation, ela_extraction, tree_fitting);
criterion_main!(benches);
