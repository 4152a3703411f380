//! Pipeline orchestration: runs the benchmark, feature extraction, model
//! training, attribution, and reporting stages over an `ExperimentSpec`,
//! writing one CSV per stage plus persisted models and SVG heatmaps. All
//! task seeds derive from the master seed and the task key, so outputs are
//! byte-identical regardless of worker count.

mod spec;

pub use spec::{
    default_config_list, desk_config_list, desk_spec, full_spec, ExperimentSpec,
    DEFAULT_BUDGETS, DEFAULT_ELA_REPETITIONS, DEFAULT_RUNS, DEFAULT_TOPK,
};

use crate::analysis::{classify_module_status, find_pairs, topk_frequency, FrequencyTable};
use crate::attribution::{
    aggregate_instance, build_representation, forest_shap, ConfigRepresentation, ShapMode,
};
use crate::ela::{extract_features, feature_index, feature_names, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::forest::{
    hyper_grid, logo_grid_search, sub_grid, transform_precision, GroupedDataset, HyperParams,
    RandomForestModel,
};
use crate::modcma::{run_fixed_budget, ModuleConfiguration};
use crate::problems::ProblemInstance;
use crate::seeding::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const RUNS_CSV: &str = "runs.csv";
pub const FEATURES_CSV: &str = "features.csv";
pub const GRID_CSV: &str = "grid_results.csv";
pub const SHAP_CSV: &str = "shap.csv";
pub const REPRESENTATIONS_CSV: &str = "representations.csv";
pub const FREQUENCY_CSV: &str = "frequency.csv";
pub const CLASSIFICATION_CSV: &str = "classification.csv";
pub const MODELS_DIR: &str = "models";

const RUNS_HEADER: &str = "config_id,function_id,instance_id,dimension,seed,budget,precision,status";
const FEATURES_HEADER: &str = "function_id,instance_id,dimension,feature_name,value,degenerate_flag";
const GRID_HEADER: &str = "config_id,dimension,budget,candidate_index,n_estimators,max_features,max_depth,min_samples_split,criterion,mean_r2,selected";
const SHAP_HEADER: &str = "config_id,dimension,budget,function_id,instance_id,feature_name,phi";
const REPRESENTATIONS_HEADER: &str = "config_id,dimension,budget,feature_name,aggregated_phi,mode";
const FREQUENCY_HEADER: &str = "axis,dimension,budget,module_value,feature_name,count,k";
const CLASSIFICATION_HEADER: &str = "axis,dimension,rows,accuracy,f1,seed";

/// Persisted fold model plus enough metadata to recompute it in isolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub config_id: String,
    pub config_index: usize,
    pub dimension: usize,
    pub budget: u64,
    pub held_out_group: u32,
    pub target_transform: String,
    pub model: RandomForestModel,
}

pub fn model_file_name(config_index: usize, dimension: usize, budget: u64, fold: u32) -> String {
    format!("model_c{config_index}_D{dimension}_B{budget}_f{fold}.json")
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}

fn read_csv(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|_| {
        Error::MissingInput(format!("required input `{}` is absent", path.display()))
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        _ => {
            return Err(Error::MissingInput(format!(
                "`{}` does not carry the expected header",
                path.display()
            )));
        }
    }
    Ok(lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Numerical(format!("unparsable number `{field}` in {context}")))
}

fn grid_for(spec: &ExperimentSpec) -> Vec<HyperParams> {
    if spec.grid_restricted {
        sub_grid(&[100], &[Some(4), Some(15)], &[2, 5])
    } else {
        hyper_grid()
    }
}

/// One benchmark task and the evaluation seed recorded in its rows.
struct RunTask {
    config_index: usize,
    function_id: u32,
    instance_id: u32,
    dimension: usize,
    seed: u64,
}

/// Stage 1: fixed-budget runs. One row per (config, function, instance,
/// dimension, seed, budget); resumable by row key, so a rerun over complete
/// output rewrites the same bytes without recomputation.
pub fn cmd_benchmark(spec: &ExperimentSpec) -> Result<PathBuf> {
    let path = spec.out_dir.join(RUNS_CSV);
    let config_ids: Vec<String> = spec.configs.iter().map(|c| c.canonical_string()).collect();

    let mut existing: BTreeMap<(String, u32, u32, usize, u64, u64), String> = BTreeMap::new();
    if path.exists() {
        for row in read_csv(&path, RUNS_HEADER)? {
            if row.len() != 8 {
                continue;
            }
            let key = (
                row[0].clone(),
                row[1].parse().unwrap_or(0),
                row[2].parse().unwrap_or(0),
                row[3].parse().unwrap_or(0),
                row[4].parse().unwrap_or(0),
                row[5].parse().unwrap_or(0),
            );
            existing.insert(key, row.join(","));
        }
    }

    let mut tasks = Vec::new();
    for (ci, _) in spec.configs.iter().enumerate() {
        for &f in &spec.function_ids {
            for &inst in &spec.instance_ids {
                for &dim in &spec.dimensions {
                    for seed in 0..spec.runs as u64 {
                        let complete = spec.budgets.iter().all(|&b| {
                            existing.contains_key(&(
                                config_ids[ci].clone(),
                                f,
                                inst,
                                dim,
                                seed,
                                b,
                            ))
                        });
                        if !complete {
                            tasks.push(RunTask {
                                config_index: ci,
                                function_id: f,
                                instance_id: inst,
                                dimension: dim,
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }

    let computed: Vec<Vec<((String, u32, u32, usize, u64, u64), String)>> = tasks
        .par_iter()
        .map(|t| {
            let cfg = &spec.configs[t.config_index];
            let cfg_id = &config_ids[t.config_index];
            let run_seed = derive_seed(
                spec.master_seed,
                &format!(
                    "run:{cfg_id}:{}:{}:{}:{}",
                    t.function_id, t.instance_id, t.dimension, t.seed
                ),
            );
            let outcome = ProblemInstance::new(t.function_id, t.instance_id, t.dimension)
                .and_then(|inst| run_fixed_budget(&inst, cfg, &spec.budgets, run_seed));
            spec.budgets
                .iter()
                .map(|&b| {
                    let key = (
                        cfg_id.clone(),
                        t.function_id,
                        t.instance_id,
                        t.dimension,
                        t.seed,
                        b,
                    );
                    let line = match &outcome {
                        Ok(rec) => format!(
                            "{cfg_id},{},{},{},{},{b},{},ok",
                            t.function_id, t.instance_id, t.dimension, t.seed, rec.checkpoints[&b]
                        ),
                        Err(_) => format!(
                            "{cfg_id},{},{},{},{},{b},,failed",
                            t.function_id, t.instance_id, t.dimension, t.seed
                        ),
                    };
                    (key, line)
                })
                .collect()
        })
        .collect();
    for rows in computed {
        for (key, line) in rows {
            existing.insert(key, line);
        }
    }

    let mut out = String::with_capacity(existing.len() * 64);
    out.push_str(RUNS_HEADER);
    out.push('\n');
    for (ci, _) in spec.configs.iter().enumerate() {
        for &f in &spec.function_ids {
            for &inst in &spec.instance_ids {
                for &dim in &spec.dimensions {
                    for seed in 0..spec.runs as u64 {
                        for &b in &spec.budgets {
                            let key = (config_ids[ci].clone(), f, inst, dim, seed, b);
                            out.push_str(&existing[&key]);
                            out.push('\n');
                        }
                    }
                }
            }
        }
    }
    write_file(&path, &out)?;
    Ok(path)
}

/// Stage 2: ELA features, one row per (function, instance, dimension,
/// feature).
pub fn cmd_features(spec: &ExperimentSpec) -> Result<PathBuf> {
    let path = spec.out_dir.join(FEATURES_CSV);
    let mut cells = Vec::new();
    for &f in &spec.function_ids {
        for &inst in &spec.instance_ids {
            for &dim in &spec.dimensions {
                cells.push((f, inst, dim));
            }
        }
    }
    let blocks: Vec<Result<String>> = cells
        .par_iter()
        .map(|&(f, inst, dim)| {
            let instance = ProblemInstance::new(f, inst, dim)?;
            let features = extract_features(&instance, spec.ela_repetitions)?;
            let mut block = String::new();
            for (name, fv) in features.iter() {
                let _ = writeln!(
                    block,
                    "{f},{inst},{dim},{name},{},{}",
                    fv.value,
                    if fv.degenerate { 1 } else { 0 }
                );
            }
            Ok(block)
        })
        .collect();
    let mut out = String::from(FEATURES_HEADER);
    out.push('\n');
    for block in blocks {
        out.push_str(&block?);
    }
    write_file(&path, &out)?;
    Ok(path)
}

/// Feature vectors keyed by (function, instance, dimension), read back from
/// features.csv.
fn load_feature_table(
    spec: &ExperimentSpec,
) -> Result<BTreeMap<(u32, u32, usize), Vec<f64>>> {
    let rows = read_csv(&spec.out_dir.join(FEATURES_CSV), FEATURES_HEADER)?;
    let mut table: BTreeMap<(u32, u32, usize), Vec<f64>> = BTreeMap::new();
    for row in rows {
        if row.len() != 6 {
            continue;
        }
        let key = (
            row[0].parse().map_err(|_| Error::MissingInput("bad features.csv row".into()))?,
            row[1].parse().map_err(|_| Error::MissingInput("bad features.csv row".into()))?,
            row[2].parse().map_err(|_| Error::MissingInput("bad features.csv row".into()))?,
        );
        let idx = feature_index(&row[3]).ok_or_else(|| {
            Error::MissingInput(format!("unknown feature `{}` in features.csv", row[3]))
        })?;
        let entry = table.entry(key).or_insert_with(|| vec![f64::NAN; FEATURE_COUNT]);
        entry[idx] = parse_f64(&row[4], "features.csv")?;
    }
    let mut missing = Vec::new();
    for &f in &spec.function_ids {
        for &inst in &spec.instance_ids {
            for &dim in &spec.dimensions {
                match table.get(&(f, inst, dim)) {
                    Some(v) if v.iter().all(|x| x.is_finite()) => {}
                    _ => missing.push(format!("f{f}/i{inst}/D{dim}")),
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingInput(format!(
            "features.csv lacks complete rows for: {}",
            missing.join(", ")
        )));
    }
    Ok(table)
}

/// Mean best precision over the run seeds, keyed by (config_id, function,
/// instance, dimension, budget).
fn load_precision_table(
    spec: &ExperimentSpec,
) -> Result<BTreeMap<(String, u32, u32, usize, u64), f64>> {
    let rows = read_csv(&spec.out_dir.join(RUNS_CSV), RUNS_HEADER)?;
    let mut sums: BTreeMap<(String, u32, u32, usize, u64), (f64, usize)> = BTreeMap::new();
    for row in rows {
        if row.len() != 8 || row[7] != "ok" {
            continue;
        }
        let key = (
            row[0].clone(),
            row[1].parse().map_err(|_| Error::MissingInput("bad runs.csv row".into()))?,
            row[2].parse().map_err(|_| Error::MissingInput("bad runs.csv row".into()))?,
            row[3].parse().map_err(|_| Error::MissingInput("bad runs.csv row".into()))?,
            row[5].parse().map_err(|_| Error::MissingInput("bad runs.csv row".into()))?,
        );
        let entry = sums.entry(key).or_insert((0.0, 0));
        entry.0 += parse_f64(&row[6], "runs.csv")?;
        entry.1 += 1;
    }
    let mut table = BTreeMap::new();
    let mut missing = Vec::new();
    for cfg in &spec.configs {
        let id = cfg.canonical_string();
        for &f in &spec.function_ids {
            for &inst in &spec.instance_ids {
                for &dim in &spec.dimensions {
                    for &b in &spec.budgets {
                        let key = (id.clone(), f, inst, dim, b);
                        match sums.get(&key) {
                            Some(&(total, n)) if n == spec.runs => {
                                table.insert(key, total / n as f64);
                            }
                            _ => missing.push(format!("{id} f{f}/i{inst}/D{dim}/B{b}")),
                        }
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        missing.truncate(10);
        return Err(Error::MissingInput(format!(
            "runs.csv lacks complete seed sets for: {}",
            missing.join("; ")
        )));
    }
    Ok(table)
}

fn build_dataset(
    spec: &ExperimentSpec,
    features: &BTreeMap<(u32, u32, usize), Vec<f64>>,
    precisions: &BTreeMap<(String, u32, u32, usize, u64), f64>,
    config_id: &str,
    dim: usize,
    budget: u64,
) -> Result<GroupedDataset> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut groups = Vec::new();
    let mut keys = Vec::new();
    for &f in &spec.function_ids {
        for &inst in &spec.instance_ids {
            xs.push(features[&(f, inst, dim)].clone());
            ys.push(transform_precision(
                precisions[&(config_id.to_string(), f, inst, dim, budget)],
            ));
            groups.push(inst);
            keys.push((f, inst));
        }
    }
    GroupedDataset::new(xs, ys, groups, keys)
}

/// Stage 3: per (config, dimension, budget) leave-one-group-out grid search;
/// writes grid_results.csv and persists the winner's five fold models.
pub fn cmd_train(spec: &ExperimentSpec) -> Result<PathBuf> {
    let features = load_feature_table(spec)?;
    let precisions = load_precision_table(spec)?;
    let grid = grid_for(spec);
    let models_dir = spec.out_dir.join(MODELS_DIR);
    fs::create_dir_all(&models_dir)?;

    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for (ci, cfg) in spec.configs.iter().enumerate() {
        let id = cfg.canonical_string();
        for &dim in &spec.dimensions {
            for &budget in &spec.budgets {
                let data = build_dataset(spec, &features, &precisions, &id, dim, budget)?;
                let seed = derive_seed(spec.master_seed, &format!("train:{id}:{dim}:{budget}"));
                let outcome = logo_grid_search(&data, &grid, seed)?;
                for (cand, (params, score)) in
                    grid.iter().zip(&outcome.candidate_scores).enumerate()
                {
                    let depth = params
                        .max_depth
                        .map(|d| d.to_string())
                        .unwrap_or_else(|| "none".into());
                    let score_s = score.map(|s| s.to_string()).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{id},{dim},{budget},{cand},{},{},{depth},{},{},{score_s},{}",
                        params.n_estimators,
                        params.max_features.as_str(),
                        params.min_samples_split,
                        params.criterion.as_str(),
                        if cand == outcome.best_index { 1 } else { 0 }
                    );
                }
                for fold in &outcome.fold_models {
                    let file = ModelFile {
                        config_id: id.clone(),
                        config_index: ci,
                        dimension: dim,
                        budget,
                        held_out_group: fold.group,
                        target_transform: "log10((precision+1e-12)/1e-12)".into(),
                        model: fold.model.clone(),
                    };
                    let name = model_file_name(ci, dim, budget, fold.group);
                    write_file(&models_dir.join(name), &serde_json::to_string(&file).unwrap())?;
                }
            }
        }
    }
    let ids: Vec<String> = spec.configs.iter().map(|c| c.canonical_string()).collect();
    write_file(
        &models_dir.join("configs.json"),
        &serde_json::to_string_pretty(&ids).unwrap(),
    )?;
    let path = spec.out_dir.join(GRID_CSV);
    write_file(&path, &out)?;
    Ok(path)
}

fn load_model(spec: &ExperimentSpec, ci: usize, dim: usize, budget: u64, fold: u32) -> Result<ModelFile> {
    let path = spec
        .out_dir
        .join(MODELS_DIR)
        .join(model_file_name(ci, dim, budget, fold));
    let text = fs::read_to_string(&path).map_err(|_| {
        Error::MissingInput(format!("model file `{}` is absent", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::MissingInput(format!("model file `{}` unreadable: {e}", path.display())))
}

/// Stage 4: per-instance 4-fold-mean attributions and per-config
/// 46-dimensional representations in both aggregation modes.
pub fn cmd_explain(spec: &ExperimentSpec) -> Result<PathBuf> {
    let features = load_feature_table(spec)?;
    let names = feature_names();

    let mut shap_out = String::from(SHAP_HEADER);
    shap_out.push('\n');
    let mut rep_out = String::from(REPRESENTATIONS_HEADER);
    rep_out.push('\n');

    for (ci, cfg) in spec.configs.iter().enumerate() {
        let id = cfg.canonical_string();
        for &dim in &spec.dimensions {
            for &budget in &spec.budgets {
                let folds: Vec<ModelFile> = spec
                    .instance_ids
                    .iter()
                    .map(|&g| load_model(spec, ci, dim, budget, g))
                    .collect::<Result<_>>()?;
                // Background per fold: its training rows.
                let backgrounds: Vec<Vec<Vec<f64>>> = folds
                    .iter()
                    .map(|fold| {
                        let mut rows = Vec::new();
                        for &f in &spec.function_ids {
                            for &inst in &spec.instance_ids {
                                if inst != fold.held_out_group {
                                    rows.push(features[&(f, inst, dim)].clone());
                                }
                            }
                        }
                        rows
                    })
                    .collect();

                let mut cells = Vec::new();
                for &f in &spec.function_ids {
                    for &inst in &spec.instance_ids {
                        cells.push((f, inst));
                    }
                }
                let per_instance: Vec<Result<((u32, u32), Vec<f64>)>> = cells
                    .par_iter()
                    .map(|&(f, inst)| {
                        let x = &features[&(f, inst, dim)];
                        let mut fold_phis = Vec::with_capacity(4);
                        for (fi, fold) in folds.iter().enumerate() {
                            if fold.held_out_group == inst {
                                continue;
                            }
                            let att = forest_shap(&fold.model, x, &backgrounds[fi])?;
                            fold_phis.push(att.phi);
                        }
                        Ok(((f, inst), aggregate_instance(&fold_phis)?))
                    })
                    .collect();
                let per_instance: Vec<((u32, u32), Vec<f64>)> =
                    per_instance.into_iter().collect::<Result<_>>()?;

                for ((f, inst), phi) in &per_instance {
                    for (name, v) in names.iter().zip(phi) {
                        let _ = writeln!(shap_out, "{id},{dim},{budget},{f},{inst},{name},{v}");
                    }
                }
                let expected: Vec<(u32, u32)> = cells;
                for mode in [ShapMode::SignedMean, ShapMode::MeanAbs] {
                    let rep = build_representation(&per_instance, &expected, mode)?;
                    for (name, v) in names.iter().zip(&rep) {
                        let _ = writeln!(
                            rep_out,
                            "{id},{dim},{budget},{name},{v},{}",
                            mode.as_str()
                        );
                    }
                }
            }
        }
    }
    write_file(&spec.out_dir.join(SHAP_CSV), &shap_out)?;
    let path = spec.out_dir.join(REPRESENTATIONS_CSV);
    write_file(&path, &rep_out)?;
    Ok(path)
}

fn load_representations(spec: &ExperimentSpec, mode: ShapMode) -> Result<Vec<ConfigRepresentation>> {
    let rows = read_csv(&spec.out_dir.join(REPRESENTATIONS_CSV), REPRESENTATIONS_HEADER)?;
    let mut map: BTreeMap<(String, usize, u64), Vec<f64>> = BTreeMap::new();
    for row in rows {
        if row.len() != 6 || row[5] != mode.as_str() {
            continue;
        }
        let key = (
            row[0].clone(),
            row[1].parse().map_err(|_| Error::MissingInput("bad representations.csv row".into()))?,
            row[2].parse().map_err(|_| Error::MissingInput("bad representations.csv row".into()))?,
        );
        let idx = feature_index(&row[3]).ok_or_else(|| {
            Error::MissingInput(format!("unknown feature `{}` in representations.csv", row[3]))
        })?;
        map.entry(key).or_insert_with(|| vec![f64::NAN; FEATURE_COUNT])[idx] =
            parse_f64(&row[4], "representations.csv")?;
    }
    let mut reps = Vec::new();
    for ((config_id, dimension, budget), values) in map {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MissingInput(format!(
                "incomplete representation for `{config_id}` D{dimension}/B{budget}"
            )));
        }
        let config: ModuleConfiguration = config_id.parse()?;
        let module_labels = crate::modcma::AXIS_NAMES
            .iter()
            .map(|&a| (a.to_string(), config.axis_value(a).unwrap().to_string()))
            .collect();
        reps.push(ConfigRepresentation {
            config_id,
            dimension,
            budget,
            values,
            mode,
            module_labels,
        });
    }
    Ok(reps)
}

/// Grayscale SVG heatmap: features on rows, (budget, module value) cells on
/// columns, shade proportional to count / pair count.
pub fn heatmap_svg(table: &FrequencyTable, title: &str) -> String {
    let names = feature_names();
    let cell_w = 46;
    let cell_h = 13;
    let left = 260;
    let top = 80;
    let cols = table.cells.len();
    let width = left + cols * cell_w + 20;
    let height = top + names.len() * cell_h + 20;
    let max = table.pair_count.max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"monospace\" font-size=\"10\">"
    );
    let _ = writeln!(svg, "<text x=\"10\" y=\"20\" font-size=\"14\">{title}</text>");
    for (c, cell) in table.cells.iter().enumerate() {
        let x = left + c * cell_w + cell_w / 2;
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">B{}</text>",
            top - 26,
            cell.budget
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            top - 12,
            cell.module_value
        );
    }
    for (r, name) in names.iter().enumerate() {
        let y = top + r * cell_h + cell_h - 3;
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{name}</text>", left - 6);
        for (c, cell) in table.cells.iter().enumerate() {
            let count = cell.counts[r];
            // 0 = white, pair_count = near-black.
            let shade = 255 - ((count as f64 / max) * 225.0).round() as u32;
            let x = left + c * cell_w;
            let y0 = top + r * cell_h;
            let _ = writeln!(
                svg,
                "<rect x=\"{x}\" y=\"{y0}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"rgb({shade},{shade},{shade})\" stroke=\"#999\"><title>{name} B{} {}: {count}</title></rect>",
                cell.budget, cell.module_value
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Stage 5: frequency tables, module-status classification, and SVG
/// heatmaps from the stored representations.
pub fn cmd_report(spec: &ExperimentSpec) -> Result<()> {
    let ranking_reps = load_representations(spec, spec.shap_mode)?;
    let classify_reps = load_representations(spec, ShapMode::SignedMean)?;

    let mut freq_out = String::from(FREQUENCY_HEADER);
    freq_out.push('\n');
    let mut class_out = String::from(CLASSIFICATION_HEADER);
    class_out.push('\n');
    let names = feature_names();

    for axis in &spec.axes {
        let pairs = find_pairs(&spec.configs, axis)?;
        if pairs.is_empty() {
            continue;
        }
        for &dim in &spec.dimensions {
            let dim_reps: Vec<_> = ranking_reps
                .iter()
                .filter(|r| r.dimension == dim)
                .cloned()
                .collect();
            for &k in &spec.topk {
                let table = topk_frequency(&dim_reps, &pairs, k)?;
                for cell in &table.cells {
                    for (name, count) in names.iter().zip(&cell.counts) {
                        let _ = writeln!(
                            freq_out,
                            "{axis},{dim},{},{},{name},{count},{k}",
                            cell.budget, cell.module_value
                        );
                    }
                }
                let svg = heatmap_svg(
                    &table,
                    &format!("top-{k} frequency, axis {axis}, D{dim} ({} pairs)", table.pair_count),
                );
                write_file(
                    &spec.out_dir.join(format!("heatmap_{axis}_D{dim}_k{k}.svg")),
                    &svg,
                )?;
            }

            let class_dim_reps: Vec<_> = classify_reps
                .iter()
                .filter(|r| r.dimension == dim)
                .cloned()
                .collect();
            let report = classify_module_status(
                &class_dim_reps,
                axis,
                derive_seed(spec.master_seed, &format!("classify:{axis}:{dim}")),
            )?;
            let _ = writeln!(
                class_out,
                "{axis},{dim},{},{},{},{}",
                report.rows, report.accuracy, report.f1, spec.master_seed
            );
        }
    }
    write_file(&spec.out_dir.join(FREQUENCY_CSV), &freq_out)?;
    write_file(&spec.out_dir.join(CLASSIFICATION_CSV), &class_out)?;
    Ok(())
}

/// All five stages in order.
pub fn cmd_all(spec: &ExperimentSpec) -> Result<()> {
    cmd_benchmark(spec)?;
    cmd_features(spec)?;
    cmd_train(spec)?;
    cmd_explain(spec)?;
    cmd_report(spec)
}
