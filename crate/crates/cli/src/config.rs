//! Experiment configuration: a JSON document validated against a closed
//! schema before any computation starts. Unknown keys are rejected so a
//! typo cannot silently change an experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rle_core::{Error, ModelParams, Prior, Result, SamplingPlan};

/// Which experiment a config describes. The chosen subcommand must agree,
/// so a config cannot be run as something it was not written for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Verify,
    Sweep,
    Scaling,
    Path,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Verify => "verify",
            TaskKind::Sweep => "sweep",
            TaskKind::Scaling => "scaling",
            TaskKind::Path => "path",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    /// Where the output files go; `--out` overrides it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub prior: PriorConfig,
    pub model: ModelConfig,
    pub plan: PlanConfig,
    /// Testing hook: shifts the left-hand mean of every gated relation by
    /// this offset, so the failure exit path can be exercised end to end.
    #[serde(default)]
    pub fault_offset: Option<f64>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub path: PathConfig,
}

/// Discrete section prior: `atoms[k]` is the k-th support point in `R^B`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub l: usize,
    pub b: usize,
    pub m: usize,
    pub delta: f64,
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub h: f64,
    /// Exponent behind the default sub-group size; `None` keeps the library
    /// default.
    #[serde(default)]
    pub u: Option<f64>,
    /// Explicit sub-group size override.
    #[serde(default)]
    pub sub_set_size: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub n_samples: usize,
    pub base_seed: u64,
    /// Cap on the worker count; the default is every available core.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Central finite-difference step in `1/delta` for the canonical
    /// information-derivative check.
    pub fd_step_delta: f64,
    /// Central finite-difference step in `t` for the derivative cross-check.
    pub fd_step_t: f64,
    /// Highest moment order for the signal-projection envelope check.
    pub max_moment_power: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { fd_step_delta: 0.02, fd_step_t: 0.05, max_moment_power: 2 }
    }
}

/// Grids for the sweep task; an absent grid pins that parameter at the
/// model value. At least one grid must be present.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub delta: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    /// Strictly increasing section counts; each runs at `M = N`.
    pub l_grid: Vec<usize>,
    /// Which size-decay checks to run, by report name.
    pub checks: Vec<String>,
    /// Row increment for the measurement-count derivative checks.
    pub dm: usize,
    pub fd_step_delta: f64,
    /// Side-channel window `[a, eps]` for the concentration scan.
    pub h_window: [f64; 2],
    pub h_points: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            l_grid: Vec::new(),
            checks: Vec::new(),
            dm: 1,
            fd_step_delta: 0.02,
            h_window: [0.05, 0.5],
            h_points: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    /// Uniform grid size over `[0, 1]` when no explicit grid is given.
    pub t_points: usize,
    pub t_grid: Option<Vec<f64>>,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { t_points: 11, t_grid: None }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

/// A config with every override applied and every derived object built.
/// `config` is the resolved echo that goes into the manifest; re-running it
/// reproduces the results exactly.
#[derive(Debug)]
pub struct ResolvedRun {
    pub config: ExperimentConfig,
    pub prior: Prior,
    pub params: ModelParams,
    pub plan: SamplingPlan,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub fault_offset: f64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }
}

pub fn resolve(
    mut config: ExperimentConfig,
    expected: TaskKind,
    overrides: Overrides,
    enum_budget: Option<u64>,
) -> Result<ResolvedRun> {
    if config.task != expected {
        return Err(Error::InvalidArgument(format!(
            "config task '{}' does not match the '{}' subcommand",
            config.task.name(),
            expected.name()
        )));
    }
    if let Some(seed) = overrides.seed {
        config.plan.base_seed = seed;
    }
    let workers = match overrides.workers {
        Some(w) => w,
        None => {
            let available = std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1);
            config.plan.workers.map_or(available, |cap| available.min(cap))
        }
    };
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be at least 1".into()));
    }
    config.plan.workers = Some(workers);
    if let Some(out) = overrides.out {
        config.output_dir = Some(out);
    }
    let out_dir = config.output_dir.clone().ok_or_else(|| {
        Error::InvalidArgument("no output directory: set output_dir or pass --out".into())
    })?;

    let prior = Prior::new(config.prior.atoms.clone(), config.prior.weights.clone())?;
    let mc = &config.model;
    let mut params = ModelParams::new(mc.l, mc.b, mc.m, mc.delta).with_t(mc.t).with_h(mc.h);
    if let Some(u) = mc.u {
        params = params.with_u(u);
    }
    if let Some(s) = mc.sub_set_size {
        params = params.with_sub_set_size(s);
    }
    if let Some(budget) = enum_budget {
        params = params.with_enum_budget(budget);
    }
    params.validate()?;
    if prior.b() != params.b {
        return Err(Error::InvalidParams(format!(
            "prior atoms have dimension {} but the model declares b = {}",
            prior.b(),
            params.b
        )));
    }
    let plan = SamplingPlan::new(config.plan.n_samples, config.plan.base_seed, expected.name());
    plan.validate()?;
    let fault_offset = config.fault_offset.unwrap_or(0.0);
    Ok(ResolvedRun { config, prior, params, plan, out_dir, workers, fault_offset })
}
