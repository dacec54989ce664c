use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use diffloss::diffusion::{sensor_true_md, LossSettings, SensorConfig, SensorField, SensorScaling};
use diffloss::experiment::{
    generate_synthetic_dataset, initial_spec, refit, run_diffusion_training, run_grid, run_lml_training,
    write_run_artifacts, DatasetSource, ExperimentConfig, Problem, RunResult, RunStatus, SliceConfig, TrainingMethod,
};
use diffloss::kernels::KernelKind;
use diffloss::mesh::{load_mesh_csv, normalize_mesh, write_mesh_csv};

use crate::{FitArgs, Failure, GridArgs, Kernel, Method, Scaling, SensorArgs, SensorsArgs, SliceArgs, SynthArgs};

/// Environment override for the grid output directory.
pub const OUTPUT_DIR_ENV: &str = "DIFFLOSS_OUTPUT_DIR";

pub(crate) fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("input file not found: {}", path.display())))
    }
}

pub(crate) fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn sensor_config(a: &SensorArgs) -> Result<SensorConfig, Failure> {
    if !(a.spacing > 0.0 && a.spacing.is_finite()) {
        return Err(Failure::Validation(format!("--spacing must be positive, got {}", a.spacing)));
    }
    if !(a.floor > 0.0 && a.floor < 1.0) {
        return Err(Failure::Validation(format!("--floor must lie in (0, 1), got {}", a.floor)));
    }
    Ok(SensorConfig {
        spacing: a.spacing,
        scaling: match a.scaling {
            Scaling::Equation => SensorScaling::Equation,
            Scaling::Appendix => SensorScaling::Appendix,
        },
    })
}

/// `data.csv` gets its ground truth in `data.truth.json`.
fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

pub fn synth(a: SynthArgs) -> Result<(), Failure> {
    if let Some((axis, n)) = a.shape.0.iter().enumerate().find(|(_, &n)| n < 3) {
        let msg = format!("axis requires ≥ 3 points for sensors (axis {axis} has {n})");
        if !a.force {
            return Err(Failure::Validation(format!("{msg}; pass --force to write the dataset anyway")));
        }
        log::warn!("{msg}");
    }
    let (mesh, field) = generate_synthetic_dataset(&a.shape.0, a.seed)?;
    let mut csv = Vec::new();
    write_mesh_csv(&mesh, &mut csv)?;
    write_output(&a.out, &csv)?;
    let mut truth = serde_json::to_vec_pretty(&field).map_err(|e| Failure::Runtime(e.to_string()))?;
    truth.push(b'\n');
    let sidecar = sidecar_path(&a.out);
    write_output(&sidecar, &truth)?;
    println!("wrote {} rows to {} and ground truth to {}", mesh.len(), a.out.display(), sidecar.display());
    Ok(())
}

struct DiagonalStats {
    label: String,
    min: f64,
    max: f64,
    mean: f64,
    argmax: Vec<usize>,
}

fn stats(label: String, values: &[f64], interior: &[usize]) -> DiagonalStats {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    // node index of the interior point, matching the i-columns of the sensor CSV
    let mut rem = best;
    let mut argmax = vec![0; interior.len()];
    for k in (0..interior.len()).rev() {
        argmax[k] = rem % interior[k] + 1;
        rem /= interior[k];
    }
    DiagonalStats {
        label,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values[best],
        mean: values.iter().sum::<f64>() / values.len() as f64,
        argmax,
    }
}

fn summarize(field: &SensorField) -> Vec<DiagonalStats> {
    let shape = field.interior_shape();
    let mut rows: Vec<DiagonalStats> = field
        .diagonals()
        .iter()
        .zip(field.per_diagonal())
        .map(|(g, v)| stats(format!("diag_{g}"), v, shape))
        .collect();
    rows.push(stats("total".into(), field.total(), shape));
    rows
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.csv")
}

pub fn sensors(a: SensorsArgs) -> Result<(), Failure> {
    require_file(&a.data)?;
    let cfg = sensor_config(&a.sensor)?;
    let raw = load_mesh_csv(&a.data)?;
    let (mesh, _) = normalize_mesh(&raw, a.sensor.floor)?;
    let field = sensor_true_md(&mesh, &cfg)?;

    let mut csv = Vec::new();
    field.write_csv(&mut csv)?;
    write_output(&a.out, &csv)?;

    let rows = summarize(&field);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Runtime(e.to_string());
    w.write_record(["diagonal", "min", "max", "mean", "argmax"]).map_err(io)?;
    for r in &rows {
        let at: Vec<String> = r.argmax.iter().map(|i| i.to_string()).collect();
        w.write_record([r.label.clone(), format!("{:e}", r.min), format!("{:e}", r.max), format!("{:e}", r.mean), at.join(";")])
            .map_err(io)?;
        println!("{:<16} min {:.4e}  max {:.4e}  mean {:.4e}  argmax [{}]", r.label, r.min, r.max, r.mean, at.join(", "));
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    write_output(&summary_path(&a.out), &bytes)?;
    Ok(())
}

pub fn fit(a: FitArgs) -> Result<(), Failure> {
    require_file(&a.data)?;
    let sensor = sensor_config(&a.sensor)?;
    let kind = match a.kernel {
        Kernel::Se => KernelKind::SE,
        Kernel::Rq => KernelKind::RQ,
    };
    let method = match a.method {
        Method::Lml => TrainingMethod::Lml,
        Method::Diffusion => TrainingMethod::Diffusion,
    };
    let alpha = (kind == KernelKind::RQ).then_some(a.alpha);
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Csv { path: a.data.clone() },
        kernels: vec![kind],
        lengthscale_inits: vec![a.lengthscale],
        alpha_inits: vec![a.alpha],
        sigma: a.sigma,
        methods: vec![method],
        loss: LossSettings {
            sensor,
            ..LossSettings::default()
        },
        value_floor: a.sensor.floor,
        slice: None,
        ..ExperimentConfig::synthetic(0)
    };
    cfg.validate()?;
    let problem = Problem::from_config(&cfg)?;
    let spec = initial_spec(kind, problem.mesh.dims(), a.sigma, a.lengthscale, alpha, false)?;
    let id = format!("fit-{method}-{}", kind.to_string().to_lowercase());
    let result = match method {
        TrainingMethod::Lml => run_lml_training(&problem, &spec, &cfg, &id),
        TrainingMethod::Diffusion => run_diffusion_training(&problem, &spec, &cfg, &id),
    };
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_run_artifacts(dir, &problem, &cfg, &result)?;
    }
    let text = serde_json::to_string_pretty(&result).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{text}");
    match result.status {
        RunStatus::Ok => Ok(()),
        s => Err(Failure::Runtime(format!(
            "run ended with status {s:?}: {}",
            result.message.as_deref().unwrap_or("optimizer could not start")
        ))),
    }
}

/// Output directory precedence: `--out`, then the environment, then the config.
fn output_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone())
}

pub fn grid(a: GridArgs) -> Result<(), Failure> {
    require_file(&a.config)?;
    if a.jobs == 0 {
        return Err(Failure::Validation("--jobs must be at least 1".into()));
    }
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let DatasetSource::Csv { path } = &mut cfg.dataset {
        // relative dataset paths are taken from the config's directory
        if path.is_relative() {
            if let Some(parent) = a.config.parent() {
                *path = parent.join(&*path);
            }
        }
        require_file(path)?;
    }
    let out = output_dir(a.out, &cfg);
    cfg.output_dir = out.clone();
    log::info!("{} runs into {}", cfg.run_count(), out.display());

    let results = run_grid(&cfg, a.jobs, Some(&out))?;
    for r in &results {
        let diff = r.loss.map_or(String::from("-"), |l| format!("{:.4e}", l.rmse_diffusion));
        println!("{:<32} {:<8} rmse_diffusion {diff}", r.id, format!("{:?}", r.status).to_lowercase());
    }
    let bad = results.iter().filter(|r| r.status != RunStatus::Ok).count();
    println!("{} runs, summary in {}", results.len(), out.join("summary.csv").display());
    if bad > 0 {
        return Err(Failure::Runtime(format!("{bad} of {} runs did not finish ok", results.len())));
    }
    Ok(())
}

pub(crate) fn load_run(results: &Path, run: &str) -> Result<RunResult, Failure> {
    let path = results.join(run).join("result.json");
    require_file(&path)?;
    let text = fs::read_to_string(&path).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

pub fn slice(a: SliceArgs) -> Result<(), Failure> {
    let cfg_path = a.results.join("config.json");
    require_file(&cfg_path)?;
    let cfg = ExperimentConfig::load(&cfg_path)?;
    let result = load_run(&a.results, &a.run)?;
    let mut slice_cfg = if a.fixed.is_empty() {
        cfg.slice.clone().ok_or_else(|| Failure::Validation("no --fix given and the config defines no slice".into()))?
    } else {
        SliceConfig {
            fixed: a.fixed.iter().copied().collect::<BTreeMap<_, _>>(),
            dense_factor: cfg.slice.as_ref().map_or(10, |s| s.dense_factor),
        }
    };
    if let Some(f) = a.dense_factor {
        slice_cfg.dense_factor = f;
    }
    let problem = Problem::from_config(&cfg)?;
    let model = refit(&problem, &result, &cfg)?;
    let table = problem.slice(&model, &slice_cfg)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    write_output(&a.out, &csv)?;
    println!(
        "{} points along x{}, {} curvature sign changes, written to {}",
        table.coords.len(),
        table.free_axis + 1,
        table.sign_alternations(),
        a.out.display()
    );
    Ok(())
}
