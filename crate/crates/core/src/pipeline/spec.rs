//! Experiment specification: the flat key-value spec file format and the
//! two built-in profiles.

use crate::attribution::ShapMode;
use crate::error::{Error, Result};
use crate::modcma::{
    BaseSampler, BoundCorrection, LocalRestart, MirroredOption, ModuleConfiguration,
    StepSizeAdaptation, WeightsOption, AXIS_NAMES,
};
use crate::problems;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub const DEFAULT_BUDGETS: [u64; 5] = [500, 2000, 5000, 10000, 50000];
pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_ELA_REPETITIONS: u32 = 100;
pub const DEFAULT_TOPK: [usize; 2] = [10, 20];

/// Everything a pipeline invocation needs. Round-trips through the spec
/// file format (`Display` emits it, `parse` reads it).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub configs: Vec<ModuleConfiguration>,
    pub function_ids: Vec<u32>,
    pub instance_ids: Vec<u32>,
    pub dimensions: Vec<usize>,
    pub budgets: Vec<u64>,
    pub runs: usize,
    pub ela_repetitions: u32,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub topk: Vec<usize>,
    pub axes: Vec<String>,
    /// Restricts the grid search to the 36-candidate CI grid.
    pub grid_restricted: bool,
    /// Aggregation used when ranking features for frequency tables.
    pub shap_mode: ShapMode,
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for ExperimentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed = {}", self.master_seed)?;
        writeln!(f, "out = {}", self.out_dir.display())?;
        writeln!(f, "functions = {}", join(&self.function_ids))?;
        writeln!(f, "instances = {}", join(&self.instance_ids))?;
        writeln!(f, "dimensions = {}", join(&self.dimensions))?;
        writeln!(f, "budgets = {}", join(&self.budgets))?;
        writeln!(f, "runs = {}", self.runs)?;
        writeln!(f, "ela_repetitions = {}", self.ela_repetitions)?;
        writeln!(f, "topk = {}", join(&self.topk))?;
        writeln!(f, "axes = {}", self.axes.join(","))?;
        writeln!(
            f,
            "grid = {}",
            if self.grid_restricted { "restricted" } else { "full" }
        )?;
        writeln!(f, "shap_mode = {}", self.shap_mode.as_str())?;
        for c in &self.configs {
            writeln!(f, "config = {}", c.canonical_string())?;
        }
        Ok(())
    }
}

fn parse_list<T: FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| Error::Spec(format!("bad value `{v}` in list `{key}`")))
        })
        .collect()
}

impl ExperimentSpec {
    /// Parses the flat key-value spec format: one `key = value` per line,
    /// `#` comments, comma-separated lists, one `config =` line per
    /// configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec {
            configs: Vec::new(),
            function_ids: Vec::new(),
            instance_ids: Vec::new(),
            dimensions: Vec::new(),
            budgets: DEFAULT_BUDGETS.to_vec(),
            runs: DEFAULT_RUNS,
            ela_repetitions: DEFAULT_ELA_REPETITIONS,
            master_seed: 0,
            out_dir: PathBuf::from("out"),
            topk: DEFAULT_TOPK.to_vec(),
            axes: Vec::new(),
            grid_restricted: false,
            shap_mode: ShapMode::MeanAbs,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => {
                    spec.master_seed = value
                        .parse()
                        .map_err(|_| Error::Spec(format!("bad seed `{value}`")))?
                }
                "out" => spec.out_dir = PathBuf::from(value),
                "functions" => spec.function_ids = parse_list(value, key)?,
                "instances" => spec.instance_ids = parse_list(value, key)?,
                "dimensions" => spec.dimensions = parse_list(value, key)?,
                "budgets" => spec.budgets = parse_list(value, key)?,
                "runs" => {
                    spec.runs = value
                        .parse()
                        .map_err(|_| Error::Spec(format!("bad runs `{value}`")))?
                }
                "ela_repetitions" => {
                    spec.ela_repetitions = value
                        .parse()
                        .map_err(|_| Error::Spec(format!("bad ela_repetitions `{value}`")))?
                }
                "topk" => spec.topk = parse_list(value, key)?,
                "axes" => {
                    spec.axes = value.split(',').map(|a| a.trim().to_string()).collect()
                }
                "grid" => {
                    spec.grid_restricted = match value {
                        "restricted" => true,
                        "full" => false,
                        other => {
                            return Err(Error::Spec(format!("bad grid mode `{other}`")));
                        }
                    }
                }
                "shap_mode" => {
                    spec.shap_mode = value
                        .parse()
                        .map_err(|_| Error::Spec(format!("bad shap_mode `{value}`")))?
                }
                "config" => spec.configs.push(
                    value
                        .parse()
                        .map_err(|e| Error::Spec(format!("bad config line: {e}")))?,
                ),
                other => return Err(Error::Spec(format!("unknown spec key `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::Spec("spec lists no configurations".into()));
        }
        for (i, c) in self.configs.iter().enumerate() {
            if self.configs[..i].contains(c) {
                return Err(Error::Spec(format!(
                    "duplicate configuration `{}`",
                    c.canonical_string()
                )));
            }
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Spec("budgets must be strictly ascending".into()));
        }
        let known: Vec<u32> = problems::registry().iter().map(|f| f.id).collect();
        for f in &self.function_ids {
            if !known.contains(f) {
                return Err(Error::Spec(format!("unknown function id {f}")));
            }
        }
        if self.function_ids.is_empty()
            || self.instance_ids.is_empty()
            || self.dimensions.is_empty()
        {
            return Err(Error::Spec(
                "functions, instances, and dimensions must be non-empty".into(),
            ));
        }
        if self.instance_ids.contains(&0) {
            return Err(Error::Spec("instance ids start at 1".into()));
        }
        if self.dimensions.iter().any(|&d| d < 2) {
            return Err(Error::Spec("dimensions must be at least 2".into()));
        }
        if self.runs == 0 || self.ela_repetitions == 0 {
            return Err(Error::Spec("runs and ela_repetitions must be positive".into()));
        }
        if self.topk.is_empty() || self.topk.iter().any(|&k| k == 0) {
            return Err(Error::Spec("topk values must be positive".into()));
        }
        for axis in &self.axes {
            if !AXIS_NAMES.contains(&axis.as_str()) {
                return Err(Error::Spec(format!(
                    "unknown analysis axis `{axis}`; known axes: {}",
                    AXIS_NAMES.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Base tuples (mirrored, sampler, weights, restart, bounds) that the
/// default list crosses with the elitist and step-size axes: 10 x 2 x 2 =
/// 40 configurations, giving 20 single-axis pairs for each of the two
/// studied axes.
fn base_tuples() -> [(MirroredOption, BaseSampler, WeightsOption, LocalRestart, BoundCorrection);
    10] {
    use BaseSampler::{Gaussian, Halton, Sobol};
    use BoundCorrection::{Mirror, Saturate};
    use LocalRestart::{Bipop, Ipop};
    use MirroredOption::{Mirrored, Pairwise};
    use WeightsOption::{Default, Equal, ExpHalf};
    let m_off = MirroredOption::Off;
    let r_off = LocalRestart::Off;
    [
        (m_off, Gaussian, Default, r_off, Saturate),
        (Mirrored, Gaussian, Default, r_off, Saturate),
        (Pairwise, Gaussian, Default, r_off, Saturate),
        (m_off, Sobol, Default, r_off, Saturate),
        (m_off, Halton, Default, r_off, Saturate),
        (m_off, Gaussian, Equal, r_off, Saturate),
        (m_off, Gaussian, ExpHalf, r_off, Saturate),
        (m_off, Gaussian, Default, Ipop, Saturate),
        (m_off, Gaussian, Default, Bipop, Saturate),
        (m_off, Gaussian, Default, r_off, Mirror),
    ]
}

fn config_from_base(
    base: (MirroredOption, BaseSampler, WeightsOption, LocalRestart, BoundCorrection),
    elitist: bool,
    ssa: StepSizeAdaptation,
) -> ModuleConfiguration {
    ModuleConfiguration {
        elitist,
        mirrored: base.0,
        base_sampler: base.1,
        weights_option: base.2,
        local_restart: base.3,
        bound_correction: base.4,
        step_size_adaptation: ssa,
    }
}

/// The default 40-configuration list.
pub fn default_config_list() -> Vec<ModuleConfiguration> {
    let mut out = Vec::with_capacity(40);
    for base in base_tuples() {
        for ssa in [StepSizeAdaptation::Csa, StepSizeAdaptation::Psr] {
            for elitist in [false, true] {
                out.push(config_from_base(base, elitist, ssa));
            }
        }
    }
    out
}

/// 8 configurations forming 4 elitism pairs, used by the reduced profile.
pub fn desk_config_list() -> Vec<ModuleConfiguration> {
    let bases = base_tuples();
    let mut out = Vec::with_capacity(8);
    for &bi in &[0usize, 1, 3, 7] {
        for elitist in [false, true] {
            out.push(config_from_base(bases[bi], elitist, StepSizeAdaptation::Csa));
        }
    }
    out
}

/// Full-scale profile matching the studied protocol.
pub fn full_spec() -> ExperimentSpec {
    ExperimentSpec {
        configs: default_config_list(),
        function_ids: (1..=24).collect(),
        instance_ids: (1..=5).collect(),
        dimensions: vec![5, 30],
        budgets: DEFAULT_BUDGETS.to_vec(),
        runs: DEFAULT_RUNS,
        ela_repetitions: DEFAULT_ELA_REPETITIONS,
        master_seed: 0,
        out_dir: PathBuf::from("out"),
        topk: DEFAULT_TOPK.to_vec(),
        axes: vec!["elitist".into(), "ssa".into()],
        grid_restricted: false,
        shap_mode: ShapMode::MeanAbs,
    }
}

/// Reduced profile: 8 configurations, 12 functions covering all five
/// categories, D = 5, budgets {500, 2000}, 5 seeds, 5 ELA repetitions,
/// 36-candidate grid.
pub fn desk_spec() -> ExperimentSpec {
    ExperimentSpec {
        configs: desk_config_list(),
        function_ids: vec![1, 2, 3, 6, 8, 10, 12, 15, 17, 20, 21, 23],
        instance_ids: (1..=5).collect(),
        dimensions: vec![5],
        budgets: vec![500, 2000],
        runs: 5,
        ela_repetitions: 5,
        master_seed: 0,
        out_dir: PathBuf::from("out"),
        topk: vec![10, 20],
        axes: vec!["elitist".into()],
        grid_restricted: true,
        shap_mode: ShapMode::MeanAbs,
    }
}
