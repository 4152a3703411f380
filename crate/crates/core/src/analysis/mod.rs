//! Downstream analysis of Shapley representations: mining configuration
//! pairs that differ on a single module axis, top-k feature-frequency
//! tables, and binary classification of a module's status from the
//! representations.

use crate::attribution::ConfigRepresentation;
use crate::error::{Error, Result};
use crate::forest::{classification_metrics, classifier_default_params, fit_forest, TaskKind};
use crate::modcma::{ModuleConfiguration, AXIS_NAMES};
use crate::seeding::derive_seed;
use serde::{Deserialize, Serialize};

/// Two configurations identical on every axis except the one under study.
/// `a` precedes `b` lexicographically by canonical encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigPair {
    pub axis: String,
    pub a: ModuleConfiguration,
    pub b: ModuleConfiguration,
    pub id: String,
}

/// All unordered pairs of `configs` differing exactly on `axis`, in
/// lexicographic order of their canonical encodings.
pub fn find_pairs(configs: &[ModuleConfiguration], axis: &str) -> Result<Vec<ConfigPair>> {
    if !AXIS_NAMES.contains(&axis) {
        return Err(Error::Registry(format!(
            "unknown module axis `{axis}`; known axes: {}",
            AXIS_NAMES.join(", ")
        )));
    }
    for (i, c) in configs.iter().enumerate() {
        if configs[..i].contains(c) {
            return Err(Error::Contract(format!(
                "duplicate configuration `{}`",
                c.canonical_string()
            )));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..configs.len() {
        for j in i + 1..configs.len() {
            if configs[i].differing_axis(&configs[j]) == Some(axis) {
                let (sa, sb) = (
                    configs[i].canonical_string(),
                    configs[j].canonical_string(),
                );
                let (a, b) = if sa <= sb {
                    (configs[i], configs[j])
                } else {
                    (configs[j], configs[i])
                };
                let id = format!("{}|{}", a.canonical_string(), b.canonical_string());
                pairs.push(ConfigPair {
                    axis: axis.to_string(),
                    a,
                    b,
                    id,
                });
            }
        }
    }
    pairs.sort_by(|p, q| p.id.cmp(&q.id));
    Ok(pairs)
}

/// Per (dimension, budget, module value): how many pair members with that
/// module value rank each feature in their top k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCell {
    pub dimension: usize,
    pub budget: u64,
    pub module_value: String,
    /// Count per feature, indexed in canonical feature order.
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub axis: String,
    pub k: usize,
    pub pair_count: usize,
    pub cells: Vec<FrequencyCell>,
}

/// Feature indices of the k largest values; ties resolve to the earlier
/// (canonical-order) feature.
pub fn topk_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap().then(i.cmp(&j)));
    order.truncate(k.min(values.len()));
    order
}

/// Builds the frequency table over every (dimension, budget) cell present in
/// `representations`. Each pair member must have a representation in each
/// cell.
pub fn topk_frequency(
    representations: &[ConfigRepresentation],
    pairs: &[ConfigPair],
    k: usize,
) -> Result<FrequencyTable> {
    if pairs.is_empty() {
        return Err(Error::Contract("no configuration pairs supplied".into()));
    }
    let axis = pairs[0].axis.clone();
    if pairs.iter().any(|p| p.axis != axis) {
        return Err(Error::Contract("pairs mix module axes".into()));
    }
    let n_features = representations
        .first()
        .map(|r| r.values.len())
        .ok_or_else(|| Error::MissingInput("no representations supplied".into()))?;
    let mut cells_keys: Vec<(usize, u64)> = representations
        .iter()
        .map(|r| (r.dimension, r.budget))
        .collect();
    cells_keys.sort_unstable();
    cells_keys.dedup();

    let lookup = |config: &ModuleConfiguration, dim: usize, budget: u64| {
        let id = config.canonical_string();
        representations
            .iter()
            .find(|r| r.config_id == id && r.dimension == dim && r.budget == budget)
            .ok_or_else(|| {
                Error::MissingInput(format!(
                    "no representation for config `{id}` at dimension {dim}, budget {budget}"
                ))
            })
    };

    let mut cells: Vec<FrequencyCell> = Vec::new();
    for (dim, budget) in cells_keys {
        for pair in pairs {
            for config in [&pair.a, &pair.b] {
                let rep = lookup(config, dim, budget)?;
                let module_value = config.axis_value(&axis)?.to_string();
                let cell = match cells.iter_mut().find(|c| {
                    c.dimension == dim && c.budget == budget && c.module_value == module_value
                }) {
                    Some(c) => c,
                    None => {
                        cells.push(FrequencyCell {
                            dimension: dim,
                            budget,
                            module_value,
                            counts: vec![0; n_features],
                        });
                        cells.last_mut().unwrap()
                    }
                };
                for idx in topk_indices(&rep.values, k) {
                    cell.counts[idx] += 1;
                }
            }
        }
    }
    cells.sort_by(|a, b| {
        (a.dimension, a.budget, &a.module_value).cmp(&(b.dimension, b.budget, &b.module_value))
    });
    Ok(FrequencyTable {
        axis,
        k,
        pair_count: pairs.len(),
        cells,
    })
}

/// Result of the module-status classification experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub axis: String,
    pub rows: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub per_fold_accuracy: Vec<f64>,
}

/// Predicts a module's value from the representation vectors with the
/// default forest classifier under deterministic stratified 5-fold CV.
/// Accuracy and macro F1 are pooled over the folds.
pub fn classify_module_status(
    representations: &[ConfigRepresentation],
    axis: &str,
    seed: u64,
) -> Result<ClassificationReport> {
    if !AXIS_NAMES.contains(&axis) {
        return Err(Error::Registry(format!(
            "unknown module axis `{axis}`; known axes: {}",
            AXIS_NAMES.join(", ")
        )));
    }
    let mut rows: Vec<(&ConfigRepresentation, String)> = representations
        .iter()
        .map(|r| {
            let config: ModuleConfiguration = r.config_id.parse()?;
            Ok((r, config.axis_value(axis)?.to_string()))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| (&a.0.config_id, a.0.budget).cmp(&(&b.0.config_id, b.0.budget)));

    let mut classes: Vec<String> = rows.iter().map(|(_, l)| l.clone()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Contract(format!(
            "classification needs two classes, found only `{}`",
            classes.first().map(String::as_str).unwrap_or("none")
        )));
    }

    // Stratified fold assignment: within each class, rows (in sorted order)
    // go round-robin to folds 0..4.
    const FOLDS: usize = 5;
    let mut fold_of = vec![0usize; rows.len()];
    for class in &classes {
        let mut counter = 0usize;
        for (i, (_, label)) in rows.iter().enumerate() {
            if label == class {
                fold_of[i] = counter % FOLDS;
                counter += 1;
            }
        }
    }

    let label_code = |label: &str| classes.iter().position(|c| c == label).unwrap() as f64;
    let mut pooled_true = Vec::new();
    let mut pooled_pred = Vec::new();
    let mut per_fold_accuracy = Vec::new();
    let params = classifier_default_params();
    for fold in 0..FOLDS {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        let (mut vx, mut vy) = (Vec::new(), Vec::new());
        for (i, (rep, label)) in rows.iter().enumerate() {
            if fold_of[i] == fold {
                vx.push(rep.values.clone());
                vy.push(label_code(label));
            } else {
                tx.push(rep.values.clone());
                ty.push(label_code(label));
            }
        }
        if vx.is_empty() {
            per_fold_accuracy.push(f64::NAN);
            continue;
        }
        let model = fit_forest(
            &tx,
            &ty,
            &params,
            TaskKind::Classification,
            derive_seed(seed, &format!("clf-fold-{fold}")),
        )?;
        let preds: Vec<f64> = vx.iter().map(|x| model.predict(x)).collect();
        let correct = preds.iter().zip(&vy).filter(|(p, t)| p == t).count();
        per_fold_accuracy.push(correct as f64 / vy.len() as f64);
        pooled_true.extend(vy);
        pooled_pred.extend(preds);
    }
    let (accuracy, f1) = classification_metrics(&pooled_true, &pooled_pred)?;
    Ok(ClassificationReport {
        axis: axis.to_string(),
        rows: rows.len(),
        accuracy,
        f1,
        per_fold_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::ShapMode;

    fn config(s: &str) -> ModuleConfiguration {
        s.parse().unwrap()
    }

    fn table2_rows() -> (ModuleConfiguration, ModuleConfiguration) {
        (
            config("elitist=false;mirrored=off;base_sampler=gaussian;weights=default;restart=off;bounds=saturate;ssa=csa"),
            config("elitist=true;mirrored=off;base_sampler=gaussian;weights=default;restart=off;bounds=saturate;ssa=csa"),
        )
    }

    fn rep(config: &ModuleConfiguration, budget: u64, values: Vec<f64>) -> ConfigRepresentation {
        ConfigRepresentation {
            config_id: config.canonical_string(),
            dimension: 5,
            budget,
            values,
            mode: ShapMode::MeanAbs,
            module_labels: Vec::new(),
        }
    }

    #[test]
    fn elitist_pair_is_found_and_mirrored_is_not() {
        let (a, b) = table2_rows();
        let pairs = find_pairs(&[a, b], "elitist").unwrap();
        assert_eq!(pairs.len(), 1);
        assert!(!pairs[0].a.elitist && pairs[0].b.elitist);
        assert!(find_pairs(&[a, b], "mirrored").unwrap().is_empty());
    }

    #[test]
    fn four_configs_give_two_pairs_matching_brute_force() {
        let (a, b) = table2_rows();
        let mut c = a;
        c.base_sampler = crate::modcma::BaseSampler::Sobol;
        let mut d = c;
        d.elitist = true;
        let configs = [a, b, c, d];
        let pairs = find_pairs(&configs, "elitist").unwrap();
        assert_eq!(pairs.len(), 2);
        // Brute force over all 6 unordered pairs.
        let mut brute = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                if configs[i].differing_axis(&configs[j]) == Some("elitist") {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 2);
        // Symmetry: input order does not change the result.
        let reversed = find_pairs(&[d, c, b, a], "elitist").unwrap();
        assert_eq!(pairs, reversed);
    }

    #[test]
    fn unknown_axis_error_lists_the_axes() {
        let (a, b) = table2_rows();
        let err = find_pairs(&[a, b], "sampler").unwrap_err();
        assert!(err.to_string().contains("base_sampler"), "{err}");
    }

    #[test]
    fn duplicate_configs_are_rejected() {
        let (a, _) = table2_rows();
        assert!(matches!(find_pairs(&[a, a], "elitist"), Err(Error::Contract(_))));
    }

    #[test]
    fn topk_counts_match_construction() {
        let (a, b) = table2_rows();
        let pairs = find_pairs(&[a, b], "elitist").unwrap();
        // Feature 0 dominates for the elitist config, feature 2 for the
        // non-elitist one.
        let reps = vec![
            rep(&a, 500, vec![0.1, 0.2, 5.0, 0.0]),
            rep(&b, 500, vec![9.0, 0.3, 0.1, 0.0]),
        ];
        let table = topk_frequency(&reps, &pairs, 2).unwrap();
        assert_eq!(table.cells.len(), 2);
        let on = table.cells.iter().find(|c| c.module_value == "true").unwrap();
        let off = table.cells.iter().find(|c| c.module_value == "false").unwrap();
        assert_eq!(on.counts, vec![1, 1, 0, 0]);
        assert_eq!(off.counts, vec![0, 1, 1, 0]);
        // k = all features: every count equals the member count per value.
        let full = topk_frequency(&reps, &pairs, 4).unwrap();
        for cell in &full.cells {
            assert!(cell.counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn ranking_ties_resolve_to_canonical_order() {
        assert_eq!(topk_indices(&[1.0, 1.0, 1.0, 1.0], 2), vec![0, 1]);
        assert_eq!(topk_indices(&[0.0, 2.0, 2.0, -1.0], 2), vec![1, 2]);
    }

    #[test]
    fn counts_are_invariant_under_monotone_rescaling() {
        let (a, b) = table2_rows();
        let pairs = find_pairs(&[a, b], "elitist").unwrap();
        let reps = vec![
            rep(&a, 500, vec![0.4, 0.1, 0.9, 0.2]),
            rep(&b, 500, vec![0.7, 0.6, 0.0, 0.3]),
        ];
        let base = topk_frequency(&reps, &pairs, 2).unwrap();
        let mut scaled = reps.clone();
        for v in scaled[0].values.iter_mut() {
            *v *= 3.7;
        }
        let rescaled = topk_frequency(&scaled, &pairs, 2).unwrap();
        assert_eq!(base, rescaled);
    }

    #[test]
    fn missing_representation_is_named() {
        let (a, b) = table2_rows();
        let pairs = find_pairs(&[a, b], "elitist").unwrap();
        let reps = vec![rep(&a, 500, vec![1.0, 0.0])];
        let err = topk_frequency(&reps, &pairs, 1).unwrap_err();
        assert!(err.to_string().contains("elitist=true"), "{err}");
        assert!(err.to_string().contains("budget 500"), "{err}");
    }

    #[test]
    fn separable_labels_classify_perfectly() {
        let (a, b) = table2_rows();
        let mut reps = Vec::new();
        for budget in [500u64, 2000, 5000, 10000, 50000] {
            for copy in 0..4u64 {
                // Feature 0 encodes the elitist label exactly; the rest is
                // deterministic filler.
                let noise = (budget as f64).ln() + copy as f64;
                reps.push(rep(&a, budget * 10 + copy, vec![0.0, noise, 1.0]));
                reps.push(rep(&b, budget * 10 + copy, vec![1.0, noise * 0.5, 1.0]));
            }
        }
        let report = classify_module_status(&reps, "elitist", 7).unwrap();
        assert_eq!(report.rows, 40);
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.f1, 1.0);
        let again = classify_module_status(&reps, "elitist", 7).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let (a, _) = table2_rows();
        let reps = vec![rep(&a, 500, vec![1.0]), rep(&a, 2000, vec![0.0])];
        assert!(matches!(
            classify_module_status(&reps, "elitist", 0),
            Err(Error::Contract(_))
        ));
    }
}
