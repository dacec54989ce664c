use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use super::{initial_spec, refit, run_diffusion_training, run_lml_training, ExperimentConfig, Problem, RunResult, TrainingMethod};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};

/// One cell of the study grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub index: usize,
    pub id: String,
    pub method: TrainingMethod,
    pub spec: KernelSpec,
}

/// Expands the config into runs ordered kernel, lengthscale init, alpha init, method.
pub fn plan_runs(cfg: &ExperimentConfig, dims: usize) -> Result<Vec<RunPlan>> {
    let mut plans = Vec::new();
    for &kind in &cfg.kernels {
        let alphas: Vec<Option<f64>> = match kind {
            KernelKind::SE => vec![None],
            KernelKind::RQ => cfg.alpha_inits.iter().copied().map(Some).collect(),
        };
        for &l in &cfg.lengthscale_inits {
            for &a in &alphas {
                let spec = initial_spec(kind, dims, cfg.sigma, l, a, cfg.tied_lengthscales)?;
                for &method in &cfg.methods {
                    let index = plans.len();
                    let mut id = format!("{index:03}-{method}-{}-l{l}", kind.to_string().to_lowercase());
                    if let Some(a) = a {
                        id.push_str(&format!("-a{a}"));
                    }
                    plans.push(RunPlan {
                        index,
                        id,
                        method,
                        spec: spec.clone(),
                    });
                }
            }
        }
    }
    Ok(plans)
}

fn execute(problem: &Problem, cfg: &ExperimentConfig, plan: &RunPlan) -> RunResult {
    match plan.method {
        TrainingMethod::Lml => run_lml_training(problem, &plan.spec, cfg, &plan.id),
        TrainingMethod::Diffusion => run_diffusion_training(problem, &plan.spec, cfg, &plan.id),
    }
}

/// Runs every planned job on up to `jobs` threads. Results come back in plan order no matter
/// how the jobs interleave. With `out_dir` set, each run's artifacts are written as soon as it
/// finishes and `summary.csv` is rewritten after every completion.
pub fn run_grid(cfg: &ExperimentConfig, jobs: usize, out_dir: Option<&Path>) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let problem = Problem::from_config(cfg)?;
    let plans = plan_runs(cfg, problem.mesh.dims())?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("config.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, cfg).map_err(|e| Error::Structure(e.to_string()))?;
            writeln!(w).map_err(|e| Error::io(dir.join("config.json"), e))
        })?;
        write_file(&dir.join("sensors_true.csv"), |w| problem.true_label.write_csv(w))?;
        write_summary_csv(&dir.join("summary.csv"), &[])?;
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, RunResult)>();
    let mut slots: Vec<Option<RunResult>> = vec![None; plans.len()];
    let workers = jobs.max(1).min(plans.len().max(1));
    let mut first_error = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (problem, plans, next) = (&problem, &plans, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(plan) = plans.get(i) else { break };
                log::info!("starting {}", plan.id);
                if tx.send((i, execute(problem, cfg, plan))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single collector: all file output happens on this thread
        for (i, result) in rx {
            if let Some(dir) = out_dir {
                let written = write_run_artifacts(dir, &problem, cfg, &result);
                slots[i] = Some(result);
                let done: Vec<RunResult> = slots.iter().flatten().cloned().collect();
                if let Err(e) = written.and_then(|_| write_summary_csv(&dir.join("summary.csv"), &done)) {
                    first_error.get_or_insert(e);
                }
            } else {
                slots[i] = Some(result);
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(slots.into_iter().map(|r| r.expect("every plan reports once")).collect())
}

fn write_file(path: &Path, body: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `result.json`, `history.csv`, the model sensors and the configured slice under `dir/<id>`.
pub fn write_run_artifacts(dir: &Path, problem: &Problem, cfg: &ExperimentConfig, result: &RunResult) -> Result<()> {
    let run_dir: PathBuf = dir.join(&result.id);
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    write_file(&run_dir.join("result.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, result).map_err(|e| Error::Structure(e.to_string()))?;
        writeln!(w).map_err(|e| Error::io(run_dir.join("result.json"), e))
    })?;
    write_file(&run_dir.join("history.csv"), |w| result.history.write_csv(w))?;
    if result.loss.is_none() {
        return Ok(());
    }
    let model = refit(problem, result, cfg)?;
    let sensors = problem.model_sensors(&model)?;
    write_file(&run_dir.join("sensors_staggered.csv"), |w| sensors.write_csv(w))?;
    if let Some(slice_cfg) = &cfg.slice {
        let table = problem.slice(&model, slice_cfg)?;
        write_file(&run_dir.join(format!("slice_x{}.csv", table.free_axis + 1)), |w| table.write_csv(w))?;
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// One row per finished run. Wall time is left out so the file is reproducible; it lives in
/// each run's `result.json`.
pub fn write_summary_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let dims = results.first().map_or(0, |r| r.initial.lengthscales.len());
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = ["run_id", "method", "kernel", "init_lengthscale", "init_alpha"].map(String::from).to_vec();
    header.extend((0..dims).map(|k| format!("final_lengthscale_{}", k + 1)));
    header.extend(
        [
            "final_alpha",
            "final_lml",
            "rmse_training",
            "rmse_diffusion",
            "total_loss",
            "evals",
            "termination",
            "status",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in results {
        let mut row = vec![
            r.id.clone(),
            r.method.to_string(),
            r.kernel.to_string(),
            format!("{:e}", r.initial.lengthscales[0]),
            fmt(r.initial.alpha),
        ];
        row.extend(r.final_params.lengthscales.iter().map(|l| format!("{l:e}")));
        row.push(fmt(r.final_params.alpha));
        row.push(fmt(r.final_lml));
        row.push(fmt(r.loss.map(|l| l.rmse_training)));
        row.push(fmt(r.loss.map(|l| l.rmse_diffusion)));
        row.push(fmt(r.loss.map(|l| l.total)));
        row.push(r.evals.to_string());
        row.push(
            r.termination
                .map(|t| serde_json::to_value(t).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
                .unwrap_or_default(),
        );
        row.push(
            serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::DatasetSource;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                shape: vec![5, 4, 3],
                seed: 3,
            },
            kernels: vec![KernelKind::SE],
            lengthscale_inits: vec![0.5, 1.0, 5.0],
            ..ExperimentConfig::synthetic(3)
        }
    }

    #[test]
    fn plan_order_and_ids() {
        let mut cfg = ExperimentConfig::synthetic(1);
        let plans = plan_runs(&cfg, 3).unwrap();
        assert_eq!(plans.len(), 84);
        assert_eq!(plans[0].id, "000-lml-se-l0.01");
        assert_eq!(plans[1].id, "001-diffusion-se-l0.01");
        assert_eq!(plans[12].id, "012-lml-rq-l0.01-a0.005");
        cfg.methods.clear();
        assert!(plan_runs(&cfg, 3).unwrap().is_empty());
    }

    #[test]
    fn concurrent_matches_sequential() {
        let cfg = tiny();
        let a = run_grid(&cfg, 1, None).unwrap();
        let b = run_grid(&cfg, 3, None).unwrap();
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.final_params, y.final_params);
            assert_eq!(x.loss, y.loss);
            assert_eq!(x.history, y.history);
        }
    }

    #[test]
    fn artifacts_are_written() {
        let cfg = ExperimentConfig {
            lengthscale_inits: vec![1.0],
            slice: Some(crate::experiment::SliceConfig {
                fixed: [(0, 2.0), (2, 0.7)].into_iter().collect(),
                dense_factor: 4,
            }),
            ..tiny()
        };
        let dir = tempfile::tempdir().unwrap();
        let results = run_grid(&cfg, 2, Some(dir.path())).unwrap();
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + results.len());
        assert!(dir.path().join("sensors_true.csv").exists());
        for r in &results {
            let run = dir.path().join(&r.id);
            for f in ["result.json", "history.csv", "sensors_staggered.csv", "slice_x2.csv"] {
                assert!(run.join(f).exists(), "{} missing {f}", r.id);
            }
            let back: RunResult = serde_json::from_str(&fs::read_to_string(run.join("result.json")).unwrap()).unwrap();
            assert_eq!(back.final_params, r.final_params);
        }
    }
}
