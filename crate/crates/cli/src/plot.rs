//! Charts built from a results directory written by `grid`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::commands::{require_file, write_output};
use crate::svg::{Chart, Series, Style};
use crate::{Failure, PlotArgs, PlotKind};

type Row = BTreeMap<String, String>;

const METHODS: [&str; 2] = ["lml", "diffusion"];

fn read_rows(path: &Path) -> Result<Vec<Row>, Failure> {
    require_file(path)?;
    let bad = |e: csv::Error| Failure::Validation(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let header: Vec<String> = r.headers().map_err(bad)?.iter().map(String::from).collect();
    r.records()
        .map(|rec| Ok(header.iter().cloned().zip(rec.map_err(bad)?.iter().map(String::from)).collect()))
        .collect()
}

fn num(row: &Row, key: &str) -> Option<f64> {
    row.get(key)?.parse().ok()
}

fn summary(dir: &Path) -> Result<Vec<Row>, Failure> {
    let rows = read_rows(&dir.join("summary.csv"))?;
    if rows.is_empty() {
        return Err(Failure::Validation(format!("{} lists no runs", dir.join("summary.csv").display())));
    }
    Ok(rows)
}

fn finished(rows: &[Row]) -> impl Iterator<Item = &Row> {
    rows.iter().filter(|r| r.get("status").map(String::as_str) == Some("ok"))
}

/// The requested run, or the first run that satisfies `suits`.
fn choose_run(dir: &Path, requested: Option<String>, suits: impl Fn(&Row) -> bool) -> Result<String, Failure> {
    if let Some(run) = requested {
        return Ok(run);
    }
    summary(dir)?
        .iter()
        .find(|r| suits(r))
        .and_then(|r| r.get("run_id").cloned())
        .ok_or_else(|| Failure::Validation(format!("no suitable run in {}; pass --run", dir.display())))
}

fn slice_file(run_dir: &Path) -> Option<PathBuf> {
    let mut found: Vec<PathBuf> = fs::read_dir(run_dir)
        .ok()?
        .flatten()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("slice_x") && n.ends_with(".csv"))
        })
        .collect();
    found.sort();
    found.into_iter().next()
}

fn convergence(dir: &Path, run: Option<String>) -> Result<Chart, Failure> {
    let run = choose_run(dir, run, |r| r.get("method").map(String::as_str) == Some("diffusion"))?;
    let rows = read_rows(&dir.join(&run).join("history.csv"))?;
    let column = |key: &str| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| Some((num(r, "eval")?, num(r, key)?))).collect()
    };
    let training = column("rmse_training");
    let mut chart = Chart {
        title: format!("Convergence history of {run}"),
        x_label: "evaluation".into(),
        ..Chart::default()
    };
    if training.is_empty() {
        chart.y_label = "negative log marginal likelihood".into();
        chart.series.push(Series {
            label: "objective".into(),
            points: column("objective"),
            style: Style::Line,
        });
    } else {
        chart.y_label = "RMSE".into();
        chart.log_y = true;
        chart.series.push(Series {
            label: "training".into(),
            points: training,
            style: Style::Line,
        });
        chart.series.push(Series {
            label: "diffusion".into(),
            points: column("rmse_diffusion"),
            style: Style::Line,
        });
    }
    Ok(chart)
}

fn slice(dir: &Path, run: Option<String>) -> Result<Chart, Failure> {
    let run = choose_run(dir, run, |r| r.get("run_id").is_some_and(|id| slice_file(&dir.join(id)).is_some()))?;
    let path = slice_file(&dir.join(&run))
        .ok_or_else(|| Failure::Validation(format!("no slice_x*.csv in {}", dir.join(&run).display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let axis = stem.trim_start_matches("slice_").to_string();
    let rows = read_rows(&path)?;
    let pick = |f: &dyn Fn(&Row) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| Some((num(r, &axis)?, f(r)?))).collect()
    };
    let sd = |r: &Row| Some(num(r, "variance")?.max(0.0).sqrt());
    Ok(Chart {
        title: format!("{run} sliced along {axis}"),
        x_label: axis.clone(),
        y_label: "normalized value".into(),
        series: vec![
            Series {
                label: "posterior mean".into(),
                points: pick(&|r| num(r, "mean")),
                style: Style::Line,
            },
            Series {
                label: "mean + 2 sd".into(),
                points: pick(&|r| Some(num(r, "mean")? + 2.0 * sd(r)?)),
                style: Style::Line,
            },
            Series {
                label: "mean - 2 sd".into(),
                points: pick(&|r| Some(num(r, "mean")? - 2.0 * sd(r)?)),
                style: Style::Line,
            },
            Series {
                label: "training".into(),
                points: pick(&|r| num(r, "training")),
                style: Style::Markers,
            },
        ],
        ..Chart::default()
    })
}

fn lengthscales(dir: &Path) -> Result<Chart, Failure> {
    let rows = summary(dir)?;
    let axes = rows[0].keys().filter(|k| k.starts_with("final_lengthscale_")).count();
    let mut series = Vec::new();
    for method in METHODS {
        for k in 1..=axes {
            let key = format!("final_lengthscale_{k}");
            let points: Vec<(f64, f64)> = finished(&rows)
                .filter(|r| r.get("method").map(String::as_str) == Some(method))
                .filter_map(|r| Some((num(r, "init_lengthscale")?, num(r, &key)?)))
                .collect();
            if !points.is_empty() {
                series.push(Series {
                    label: format!("{method} l{k}"),
                    points,
                    style: Style::Markers,
                });
            }
        }
    }
    Ok(Chart {
        title: "Final lengthscales for different initial values".into(),
        x_label: "initial lengthscale".into(),
        y_label: "final lengthscale".into(),
        log_x: true,
        log_y: true,
        series,
    })
}

fn losses(dir: &Path) -> Result<Chart, Failure> {
    let rows = summary(dir)?;
    let series = METHODS
        .iter()
        .map(|method| Series {
            label: method.to_string(),
            points: finished(&rows)
                .filter(|r| r.get("method").map(String::as_str) == Some(*method))
                .filter_map(|r| Some((num(r, "init_lengthscale")?, num(r, "rmse_diffusion")?)))
                .collect(),
            style: Style::Markers,
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    Ok(Chart {
        title: "Final diffusion losses".into(),
        x_label: "initial lengthscale".into(),
        y_label: "diffusion RMSE".into(),
        log_x: true,
        log_y: true,
        series,
    })
}

/// Builds the chart first so nothing is written when the inputs are missing.
pub fn plot(a: PlotArgs) -> Result<(), Failure> {
    if !a.results.is_dir() {
        return Err(Failure::Validation(format!("results directory not found: {}", a.results.display())));
    }
    let chart = match a.kind {
        PlotKind::Convergence => convergence(&a.results, a.run)?,
        PlotKind::Slice => slice(&a.results, a.run)?,
        PlotKind::Lengthscales => lengthscales(&a.results)?,
        PlotKind::Losses => losses(&a.results)?,
    };
    let svg = chart
        .render(env!("CARGO_PKG_VERSION"))
        .map_err(|m| Failure::Validation(format!("{}: {m}", a.results.display())))?;
    write_output(&a.out, svg.as_bytes())?;
    println!("wrote {}", a.out.display());
    Ok(())
}
