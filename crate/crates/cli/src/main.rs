mod commands;
mod plot;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Gaussian-process training with a staggered-mesh diffusion loss.
#[derive(Debug, Parser)]
#[command(name = "diffloss", version)]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the seeded synthetic dataset and its ground-truth sidecar.
    Synth(SynthArgs),
    /// Compute the true-label diffusion sensors of a dataset.
    Sensors(SensorsArgs),
    /// Train one kernel from one initialization.
    Fit(FitArgs),
    /// Run an initialization study from a JSON config.
    Grid(GridArgs),
    /// Dense one-dimensional sweep of a trained run.
    Slice(SliceArgs),
    /// Render an SVG chart from a results directory.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Points per axis, e.g. 19x15x5.
    #[arg(long, value_parser = parse_shape, default_value = "19x15x5")]
    shape: Shape,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the dataset even if an axis is too short for sensors.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SensorArgs {
    /// Mesh spacing after normalization.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, value_enum, default_value_t = Scaling::Equation)]
    scaling: Scaling,
    /// Positive floor of the normalized values.
    #[arg(long, default_value_t = diffloss::mesh::DEFAULT_VALUE_FLOOR)]
    floor: f64,
}

#[derive(Debug, Args)]
struct SensorsArgs {
    #[arg(long)]
    data: PathBuf,
    /// Sensor CSV; summary statistics go next to it as `<stem>.summary.csv`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sensor: SensorArgs,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Kernel::Se)]
    kernel: Kernel,
    #[arg(long, value_enum, default_value_t = Method::Lml)]
    method: Method,
    /// Initial lengthscale on every axis.
    #[arg(long, default_value_t = 1.0)]
    lengthscale: f64,
    /// Initial RQ shape parameter.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = diffloss::experiment::DEFAULT_SIGMA)]
    sigma: f64,
    /// Directory for result.json, history.csv and the model sensors.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sensor: SensorArgs,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides DIFFLOSS_OUTPUT_DIR and the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SliceArgs {
    /// Results directory written by `grid`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    run: String,
    /// Held axis as AXIS=VALUE (zero-based axis, raw coordinate); repeat for each held axis.
    /// Defaults to the config's slice.
    #[arg(long = "fix", value_parser = parse_fixed)]
    fixed: Vec<(usize, f64)>,
    #[arg(long)]
    dense_factor: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Run id for convergence and slice plots; defaults to the first suitable run.
    #[arg(long)]
    run: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scaling {
    Equation,
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kernel {
    Se,
    Rq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Lml,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Convergence,
    Slice,
    Lengthscales,
    Losses,
}

#[derive(Debug, Clone)]
struct Shape(Vec<usize>);

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad axis size {p:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Shape)
}

fn parse_fixed(s: &str) -> Result<(usize, f64), String> {
    let (axis, value) = s.split_once('=').ok_or_else(|| format!("expected AXIS=VALUE, got {s:?}"))?;
    let axis = axis.trim().parse().map_err(|e| format!("bad axis {axis:?}: {e}"))?;
    let value = value.trim().parse().map_err(|e| format!("bad value {value:?}: {e}"))?;
    Ok((axis, value))
}

/// A failed command. Validation failures happen before any computation.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<diffloss::Error> for Failure {
    fn from(e: diffloss::Error) -> Self {
        use diffloss::Error as E;
        match e {
            E::Io { .. } | E::NotPositiveDefinite { .. } | E::DegenerateDenominator { .. } | E::NonFiniteObjective { .. } => {
                Failure::Runtime(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Sensors(a) => commands::sensors(a),
        Command::Fit(a) => commands::fit(a),
        Command::Grid(a) => commands::grid(a),
        Command::Slice(a) => commands::slice(a),
        Command::Plot(a) => plot::plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
