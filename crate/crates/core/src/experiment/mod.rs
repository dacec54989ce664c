//! Hyperparameter studies: initialization grids over kernels, both training methods, the
//! synthetic dataset and result emission.

mod grid;
mod slice;
mod synthetic;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffusion::{
    loss_from_predictions, select_top_diagonals, sensor_staggered_md, sensor_true_md, LossReport, LossSettings,
    SensorField,
};
use crate::error::{Error, Result};
use crate::gpr::{fit_with_escalation, GpModel, NOISELESS_JITTER};
use crate::kernels::{Hyperparams, KernelKind, KernelSpec};
use crate::mesh::{build_staggered_mesh, load_mesh_csv, normalize_mesh, NormalizationRecord, StructuredMesh};
use crate::optimize::{
    minimize_dfo, minimize_quasi_newton, ConvergenceHistory, Evaluation, Method, OptimizerConfig, Termination,
};

pub use grid::{plan_runs, run_grid, write_run_artifacts, write_summary_csv, RunPlan};
pub use slice::{sign_alternations, slice_predictions, SliceTable};
pub use synthetic::{generate_synthetic_dataset, SyntheticField};

pub const SPEC_VERSION: u32 = 1;
pub const DEFAULT_SIGMA: f64 = 0.15;
pub const DEFAULT_LENGTHSCALE_INITS: [f64; 6] = [0.01, 0.1, 0.5, 1.0, 5.0, 10.0];
/// The initialization list exactly as printed in the source study, 0.01 twice.
pub const LITERAL_LENGTHSCALE_INITS: [f64; 6] = [0.01, 0.01, 0.5, 1.0, 5.0, 10.0];
pub const DEFAULT_ALPHA_INITS: [f64; 6] = [0.005, 0.05, 0.5, 5.0, 10.0, 50.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMethod {
    /// Maximize the log marginal likelihood.
    Lml,
    /// Minimize training RMSE plus diffusion-sensor RMSE.
    Diffusion,
}

impl std::fmt::Display for TrainingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainingMethod::Lml => "lml",
            TrainingMethod::Diffusion => "diffusion",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic { shape: Vec<usize>, seed: u64 },
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    /// Raw coordinate of every held axis, keyed by zero-based axis index.
    pub fixed: BTreeMap<usize, f64>,
    #[serde(default = "default_dense_factor")]
    pub dense_factor: usize,
}

fn default_dense_factor() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    pub dataset: DatasetSource,
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelKind>,
    #[serde(default = "default_lengthscale_inits")]
    pub lengthscale_inits: Vec<f64>,
    #[serde(default = "default_alpha_inits")]
    pub alpha_inits: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<TrainingMethod>,
    #[serde(default)]
    pub loss: LossSettings,
    /// One lengthscale shared by all axes instead of one per axis.
    #[serde(default)]
    pub tied_lengthscales: bool,
    #[serde(default = "default_value_floor")]
    pub value_floor: f64,
    /// Box on every trained parameter, in raw units.
    #[serde(default = "default_param_bounds")]
    pub param_bounds: (f64, f64),
    #[serde(default = "default_lml_optimizer")]
    pub lml_optimizer: OptimizerConfig,
    #[serde(default = "default_diffusion_optimizer")]
    pub diffusion_optimizer: OptimizerConfig,
    #[serde(default)]
    pub slice: Option<SliceConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_kernels() -> Vec<KernelKind> {
    vec![KernelKind::SE, KernelKind::RQ]
}
fn default_lengthscale_inits() -> Vec<f64> {
    DEFAULT_LENGTHSCALE_INITS.to_vec()
}
fn default_alpha_inits() -> Vec<f64> {
    DEFAULT_ALPHA_INITS.to_vec()
}
fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}
fn default_noise() -> f64 {
    NOISELESS_JITTER
}
fn default_methods() -> Vec<TrainingMethod> {
    vec![TrainingMethod::Lml, TrainingMethod::Diffusion]
}
fn default_value_floor() -> f64 {
    crate::mesh::DEFAULT_VALUE_FLOOR
}
fn default_param_bounds() -> (f64, f64) {
    (1e-6, 1e6)
}
fn default_lml_optimizer() -> OptimizerConfig {
    OptimizerConfig::quasi_newton()
}
fn default_diffusion_optimizer() -> OptimizerConfig {
    OptimizerConfig {
        tol_step: 1e-6,
        ..OptimizerConfig::dfo()
    }
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// Full default study on the seeded 19 x 15 x 5 synthetic dataset.
    pub fn synthetic(seed: u64) -> Self {
        Self {
            spec_version: SPEC_VERSION,
            dataset: DatasetSource::Synthetic {
                shape: vec![19, 15, 5],
                seed,
            },
            kernels: default_kernels(),
            lengthscale_inits: default_lengthscale_inits(),
            alpha_inits: default_alpha_inits(),
            sigma: DEFAULT_SIGMA,
            noise: NOISELESS_JITTER,
            methods: default_methods(),
            loss: LossSettings::default(),
            tied_lengthscales: false,
            value_floor: default_value_floor(),
            param_bounds: default_param_bounds(),
            lml_optimizer: default_lml_optimizer(),
            diffusion_optimizer: default_diffusion_optimizer(),
            slice: Some(SliceConfig {
                fixed: BTreeMap::from([(0, 14.0), (2, 0.7)]),
                dense_factor: 10,
            }),
            output_dir: default_output_dir(),
        }
    }

    /// Parses JSON, reporting the failing location as a JSON pointer.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                pointer: pointer_from_path(&path),
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |pointer: &str, message: String| {
            Err(Error::Config {
                pointer: pointer.to_string(),
                message,
            })
        };
        if self.spec_version != SPEC_VERSION {
            return bad("/spec_version", format!("unsupported version {}, expected {SPEC_VERSION}", self.spec_version));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("/sigma", format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("/noise", format!("noise must be non-negative, got {}", self.noise));
        }
        if self.lengthscale_inits.is_empty() {
            return bad("/lengthscale_inits", "at least one lengthscale init is required".into());
        }
        for (i, &l) in self.lengthscale_inits.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return bad(&format!("/lengthscale_inits/{i}"), format!("init must be positive, got {l}"));
            }
        }
        if self.kernels.contains(&KernelKind::RQ) && self.alpha_inits.is_empty() {
            return bad("/alpha_inits", "RQ runs need at least one alpha init".into());
        }
        for (i, &a) in self.alpha_inits.iter().enumerate() {
            if !(a > 0.0 && a.is_finite()) {
                return bad(&format!("/alpha_inits/{i}"), format!("init must be positive, got {a}"));
            }
        }
        let (lo, hi) = self.param_bounds;
        if !(lo > 0.0 && lo < hi) {
            return bad("/param_bounds", format!("need 0 < lower < upper, got ({lo}, {hi})"));
        }
        if !(self.loss.beta1 >= 0.0 && self.loss.beta2 >= 0.0) {
            return bad("/loss", "loss weights must be non-negative".into());
        }
        if let DatasetSource::Synthetic { shape, .. } = &self.dataset {
            if shape.is_empty() || shape.iter().any(|&n| n < 3) {
                return bad("/dataset/synthetic/shape", "every axis requires at least 3 points".into());
            }
        }
        if let Some(s) = &self.slice {
            if s.dense_factor == 0 {
                return bad("/slice/dense_factor", "must be at least 1".into());
            }
        }
        for (name, opt) in [("lml_optimizer", &self.lml_optimizer), ("diffusion_optimizer", &self.diffusion_optimizer)] {
            opt.validate().or_else(|e| bad(&format!("/{name}"), e.to_string()))?;
        }
        Ok(())
    }

    /// Number of runs `run_grid` will execute.
    pub fn run_count(&self) -> usize {
        let per_method: usize = self
            .kernels
            .iter()
            .map(|k| match k {
                KernelKind::SE => self.lengthscale_inits.len(),
                KernelKind::RQ => self.lengthscale_inits.len() * self.alpha_inits.len(),
            })
            .sum();
        per_method * self.methods.len()
    }
}

fn pointer_from_path(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for seg in path.split('.') {
        // serde_path_to_error renders sequence indices as `name[3]`
        let mut rest = seg;
        while let Some(open) = rest.find('[') {
            let (head, tail) = rest.split_at(open);
            if !head.is_empty() {
                out.push('/');
                out.push_str(head);
            }
            let close = tail.find(']').unwrap_or(tail.len());
            out.push('/');
            out.push_str(&tail[1..close]);
            rest = tail.get(close + 1..).unwrap_or("");
        }
        if !rest.is_empty() {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

/// Everything shared by the runs of one study: the normalized mesh, its staggered mesh and
/// the true-label sensors, restricted to the diagonals in use.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: StructuredMesh,
    pub normalization: NormalizationRecord,
    pub loss: LossSettings,
    pub true_label: SensorField,
    points: Vec<f64>,
    stag_points: Vec<f64>,
}

impl Problem {
    /// Normalizes `raw` and precomputes the true label.
    pub fn new(raw: &StructuredMesh, value_floor: f64, loss: LossSettings) -> Result<Self> {
        let (mesh, normalization) = normalize_mesh(raw, value_floor)?;
        let stag = build_staggered_mesh(&mesh)?;
        let full = sensor_true_md(&mesh, &loss.sensor)?;
        let true_label = match loss.top_diagonals {
            Some(count) => full.restrict(&select_top_diagonals(&full, count)?)?,
            None => full,
        };
        Ok(Self {
            points: mesh.points(),
            stag_points: stag.points().to_vec(),
            mesh,
            normalization,
            loss,
            true_label,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let raw = match &cfg.dataset {
            DatasetSource::Synthetic { shape, seed } => generate_synthetic_dataset(shape, *seed)?.0,
            DatasetSource::Csv { path } => load_mesh_csv(path)?,
        };
        Self::new(&raw, cfg.value_floor, cfg.loss.clone())
    }

    pub fn fit(&self, spec: &KernelSpec, noise: f64) -> Result<GpModel> {
        fit_with_escalation(&self.points, self.mesh.values(), spec, noise)
    }

    pub fn loss(&self, model: &GpModel) -> Result<LossReport> {
        let (mesh_preds, stag_preds) = self.predictions(model)?;
        loss_from_predictions(
            &self.mesh,
            &mesh_preds,
            &stag_preds,
            &self.true_label,
            self.loss.beta1,
            self.loss.beta2,
            &self.loss.sensor,
        )
    }

    /// Staggered-mesh sensors of the model's predictions, on the diagonals in use.
    pub fn model_sensors(&self, model: &GpModel) -> Result<SensorField> {
        let (mesh_preds, stag_preds) = self.predictions(model)?;
        let full = sensor_staggered_md(self.mesh.shape(), &mesh_preds, &stag_preds, &self.loss.sensor)?;
        full.restrict(self.true_label.diagonals())
    }

    fn predictions(&self, model: &GpModel) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((model.predict_mean(&self.points)?, model.predict_mean(&self.stag_points)?))
    }

    /// Converts a slice request in raw coordinates to mesh coordinates.
    pub fn slice(&self, model: &GpModel, cfg: &SliceConfig) -> Result<SliceTable> {
        let mut fixed = BTreeMap::new();
        for (&axis, &raw) in &cfg.fixed {
            let map = self.normalization.axes.get(axis).ok_or_else(|| {
                Error::InvalidParameter(format!("fixed axis {axis} out of range for {} dimensions", self.mesh.dims()))
            })?;
            let (lo, hi) = (map.raw[0], map.raw[map.raw.len() - 1]);
            if !(raw >= lo && raw <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "fixed coordinate {raw} outside [{lo}, {hi}] on axis {axis}"
                )));
            }
            fixed.insert(axis, map.to_index(raw));
        }
        slice_predictions(model, &self.mesh, &fixed, cfg.dense_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The optimizer could not evaluate its starting point.
    Aborted,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub id: String,
    pub method: TrainingMethod,
    pub kernel: KernelKind,
    pub initial: Hyperparams,
    #[serde(rename = "final")]
    pub final_params: Hyperparams,
    pub final_lml: Option<f64>,
    pub loss: Option<LossReport>,
    pub termination: Option<Termination>,
    pub evals: usize,
    /// Jitter escalations needed to factorize the final model.
    pub escalations: usize,
    pub wall_time_s: f64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip)]
    pub history: ConvergenceHistory,
}

impl RunResult {
    fn failed(id: &str, method: TrainingMethod, spec: &KernelSpec, err: &Error, history: ConvergenceHistory, t0: Instant) -> Self {
        Self {
            id: id.to_string(),
            method,
            kernel: spec.kind,
            initial: spec.params.clone(),
            final_params: spec.params.clone(),
            final_lml: None,
            loss: None,
            termination: None,
            evals: history.len(),
            escalations: 0,
            wall_time_s: t0.elapsed().as_secs_f64(),
            status: RunStatus::Failed,
            message: Some(err.to_string()),
            history,
        }
    }
}

/// Kernel with the study's fixed amplitude and one init value on every lengthscale.
pub fn initial_spec(kind: KernelKind, dims: usize, sigma: f64, lengthscale: f64, alpha: Option<f64>, tied: bool) -> Result<KernelSpec> {
    let mut spec = match kind {
        KernelKind::SE => KernelSpec::se(sigma, vec![lengthscale; dims])?,
        KernelKind::RQ => KernelSpec::rq(
            sigma,
            vec![lengthscale; dims],
            alpha.ok_or_else(|| Error::InvalidParameter("RQ kernel requires alpha".into()))?,
        )?,
    };
    spec.tied_lengthscales = tied;
    Ok(spec)
}

fn bounded(opt: &OptimizerConfig, n: usize, lo: f64, hi: f64, log: bool) -> OptimizerConfig {
    let map = |v: f64| if log { v.ln() } else { v };
    let mut opt = opt.clone();
    if opt.lower_bounds.is_empty() {
        opt.lower_bounds = vec![map(lo); n];
    } else if log {
        opt.lower_bounds.iter_mut().for_each(|v| *v = v.ln());
    }
    if opt.upper_bounds.is_empty() {
        opt.upper_bounds = vec![map(hi); n];
    } else if log {
        opt.upper_bounds.iter_mut().for_each(|v| *v = v.ln());
    }
    opt
}

fn minimize<F: FnMut(&[f64]) -> Evaluation>(f: F, x0: &[f64], opt: &OptimizerConfig) -> Result<crate::optimize::OptimResult> {
    match opt.method {
        Method::QuasiNewton => minimize_quasi_newton(f, x0, opt),
        Method::Dfo => minimize_dfo(f, x0, opt),
    }
}

/// Maximizes the log marginal likelihood over the trainable parameters in log space, then
/// records the diffusion loss of the result for comparison.
pub fn run_lml_training(problem: &Problem, spec: &KernelSpec, cfg: &ExperimentConfig, id: &str) -> RunResult {
    let t0 = Instant::now();
    let method = TrainingMethod::Lml;
    let setup = || -> Result<(Vec<f64>, OptimizerConfig)> {
        let x0 = spec.pack_log()?;
        let (lo, hi) = cfg.param_bounds;
        Ok((x0.clone(), bounded(&cfg.lml_optimizer, x0.len(), lo, hi, true)))
    };
    let (x0, opt) = match setup() {
        Ok(v) => v,
        Err(e) => return RunResult::failed(id, method, spec, &e, ConvergenceHistory::default(), t0),
    };
    let objective = |theta: &[f64]| -> Evaluation {
        let eval = || -> Result<Evaluation> {
            let s = spec.unpack_log(theta)?;
            let model = problem.fit(&s, cfg.noise)?;
            let lml = model.log_marginal_likelihood();
            let grad = model.lml_gradient()?;
            Ok(Evaluation::with_gradient(-lml, grad.into_iter().map(|g| -g).collect()))
        };
        eval().unwrap_or_else(|e| {
            log::debug!("{id}: evaluation failed: {e}");
            Evaluation::failed()
        })
    };
    let res = match minimize(objective, &x0, &opt) {
        Ok(r) => r,
        Err(e) => return RunResult::failed(id, method, spec, &e, ConvergenceHistory::default(), t0),
    };
    finish(problem, spec, cfg, id, method, res, true, t0)
}

/// Minimizes the training-plus-diffusion loss with the derivative-free method in raw
/// parameter space, then records the log marginal likelihood of the result.
pub fn run_diffusion_training(problem: &Problem, spec: &KernelSpec, cfg: &ExperimentConfig, id: &str) -> RunResult {
    let t0 = Instant::now();
    let method = TrainingMethod::Diffusion;
    let x0 = spec.pack_raw();
    let (lo, hi) = cfg.param_bounds;
    let opt = bounded(&cfg.diffusion_optimizer, x0.len(), lo, hi, false);
    let objective = |p: &[f64]| -> Evaluation {
        let eval = || -> Result<Evaluation> {
            let s = spec.unpack_raw(p)?;
            let model = problem.fit(&s, cfg.noise)?;
            let report = problem.loss(&model)?;
            Ok(Evaluation {
                value: report.total,
                gradient: Vec::new(),
                components: Some((report.rmse_training, report.rmse_diffusion)),
            })
        };
        eval().unwrap_or_else(|e| {
            log::debug!("{id}: evaluation failed: {e}");
            Evaluation::failed()
        })
    };
    let res = match minimize(objective, &x0, &opt) {
        Ok(r) => r,
        Err(e) => return RunResult::failed(id, method, spec, &e, ConvergenceHistory::default(), t0),
    };
    finish(problem, spec, cfg, id, method, res, false, t0)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &Problem,
    spec: &KernelSpec,
    cfg: &ExperimentConfig,
    id: &str,
    method: TrainingMethod,
    res: crate::optimize::OptimResult,
    log_space: bool,
    t0: Instant,
) -> RunResult {
    let unpack = if log_space { spec.unpack_log(&res.x) } else { spec.unpack_raw(&res.x) };
    let final_spec = match unpack {
        Ok(s) => s,
        Err(e) => return RunResult::failed(id, method, spec, &e, res.history, t0),
    };
    let (loss, lml, escalations) = match problem.fit(&final_spec, cfg.noise) {
        Ok(model) => (problem.loss(&model).ok(), Some(model.log_marginal_likelihood()), model.escalations()),
        Err(e) => return RunResult::failed(id, method, spec, &e, res.history, t0),
    };
    let status = if res.termination == Termination::Aborted { RunStatus::Aborted } else { RunStatus::Ok };
    log::info!(
        "{id}: {:?} after {} evals, lengthscales {:?}",
        res.termination,
        res.evals(),
        final_spec.params.lengthscales
    );
    RunResult {
        id: id.to_string(),
        method,
        kernel: spec.kind,
        initial: spec.params.clone(),
        final_params: final_spec.params,
        final_lml: lml,
        loss,
        termination: Some(res.termination),
        evals: res.evals(),
        escalations,
        wall_time_s: t0.elapsed().as_secs_f64(),
        status,
        message: None,
        history: res.history,
    }
}

/// Refits a run's final parameters.
pub fn refit(problem: &Problem, result: &RunResult, cfg: &ExperimentConfig) -> Result<GpModel> {
    let mut spec = KernelSpec::new(result.kernel, result.final_params.clone())?;
    spec.tied_lengthscales = cfg.tied_lengthscales;
    problem.fit(&spec, cfg.noise)
}
