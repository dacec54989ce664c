//! Hyperparameter optimizers: a projected limited-memory quasi-Newton method for smooth
//! objectives with gradients, and a derivative-free trust-region method built on
//! minimum-Frobenius-norm quadratic interpolation models.

mod dfo;
mod quasi_newton;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dfo::minimize_dfo;
pub use quasi_newton::minimize_quasi_newton;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    QuasiNewton,
    Dfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_evals: usize,
    /// Initial trust-region radius (derivative-free method only).
    pub initial_radius: f64,
    /// Projected-gradient tolerance for the quasi-Newton method.
    pub tol_obj: f64,
    /// Smallest step (quasi-Newton) or final trust-region resolution (derivative-free).
    pub tol_step: f64,
    /// Relative objective reduction below which the quasi-Newton method stops.
    #[serde(default = "default_ftol")]
    pub ftol: f64,
    /// Correction pairs kept by the quasi-Newton method.
    #[serde(default = "default_memory")]
    pub memory: usize,
    #[serde(default)]
    pub lower_bounds: Vec<f64>,
    #[serde(default)]
    pub upper_bounds: Vec<f64>,
}

fn default_ftol() -> f64 {
    1e-12
}

fn default_memory() -> usize {
    10
}

impl OptimizerConfig {
    pub fn quasi_newton() -> Self {
        Self {
            method: Method::QuasiNewton,
            max_evals: 500,
            initial_radius: 3.0,
            tol_obj: 1e-8,
            tol_step: 1e-10,
            ftol: default_ftol(),
            memory: default_memory(),
            lower_bounds: Vec::new(),
            upper_bounds: Vec::new(),
        }
    }

    pub fn dfo() -> Self {
        Self {
            method: Method::Dfo,
            max_evals: 2000,
            ..Self::quasi_newton()
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower_bounds = lower;
        self.upper_bounds = upper;
        self
    }

    /// Resolves empty bound vectors to +/- infinity and checks consistency.
    pub(crate) fn bounds(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let expand = |b: &[f64], fill: f64, name: &str| -> Result<Vec<f64>> {
            match b.len() {
                0 => Ok(vec![fill; n]),
                m if m == n => Ok(b.to_vec()),
                m => Err(Error::InvalidParameter(format!("{name} bounds have length {m}, expected {n}"))),
            }
        };
        let lo = expand(&self.lower_bounds, f64::NEG_INFINITY, "lower")?;
        let hi = expand(&self.upper_bounds, f64::INFINITY, "upper")?;
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParameter("lower bound exceeds upper bound".into()));
        }
        Ok((lo, hi))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("initial_radius", self.initial_radius)?;
        positive("tol_obj", self.tol_obj)?;
        positive("tol_step", self.tol_step)?;
        if self.max_evals == 0 {
            return Err(Error::InvalidParameter("max_evals must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Empty for derivative-free objectives.
    pub gradient: Vec<f64>,
    /// `(rmse_training, rmse_diffusion)` when the objective tracks them.
    pub components: Option<(f64, f64)>,
}

impl Evaluation {
    pub fn value(value: f64) -> Self {
        Self {
            value,
            gradient: Vec::new(),
            components: None,
        }
    }

    pub fn with_gradient(value: f64, gradient: Vec<f64>) -> Self {
        Self {
            value,
            gradient,
            components: None,
        }
    }

    pub fn failed() -> Self {
        Self::value(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub eval: usize,
    pub params: Vec<f64>,
    pub objective: f64,
    pub rmse_training: Option<f64>,
    pub rmse_diffusion: Option<f64>,
    /// The point became the new iterate.
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    pub records: Vec<EvalRecord>,
}

impl ConvergenceHistory {
    pub(crate) fn push(&mut self, params: &[f64], ev: &Evaluation, accepted: bool) {
        self.records.push(EvalRecord {
            eval: self.records.len(),
            params: params.to_vec(),
            objective: ev.value,
            rmse_training: ev.components.map(|c| c.0),
            rmse_diffusion: ev.components.map(|c| c.1),
            accepted,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Objective values of accepted iterates, in order.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.accepted).map(|r| r.objective).collect()
    }

    /// Running minimum over all finite evaluations.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                if r.objective < best {
                    best = r.objective;
                }
                best
            })
            .collect()
    }

    /// CSV with columns `eval, p0.., objective, rmse_training, rmse_diffusion, accepted`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let np = self.records.first().map_or(0, |r| r.params.len());
        let mut header = vec!["eval".to_string()];
        header.extend((0..np).map(|i| format!("p{i}")));
        header.extend(["objective", "rmse_training", "rmse_diffusion", "accepted"].map(String::from));
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            let mut rec = vec![r.eval.to_string()];
            rec.extend(r.params.iter().map(|p| format!("{p:e}")));
            rec.push(format!("{:e}", r.objective));
            rec.push(opt(r.rmse_training));
            rec.push(opt(r.rmse_diffusion));
            rec.push(u8::from(r.accepted).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<history csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    ObjectiveTolerance,
    MaxEvals,
    /// The objective returned a non-finite value where the method cannot recover.
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub termination: Termination,
    pub history: ConvergenceHistory,
}

impl OptimResult {
    pub fn evals(&self) -> usize {
        self.history.len()
    }
}

pub(crate) fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_default_to_infinite() {
        let cfg = OptimizerConfig::dfo();
        let (lo, hi) = cfg.bounds(2).unwrap();
        assert_eq!(lo, vec![f64::NEG_INFINITY; 2]);
        assert_eq!(hi, vec![f64::INFINITY; 2]);
        let bad = OptimizerConfig::dfo().with_bounds(vec![1.0], vec![0.0]);
        assert!(bad.bounds(1).is_err());
        assert!(OptimizerConfig::dfo().with_bounds(vec![0.0; 3], vec![]).bounds(2).is_err());
    }

    #[test]
    fn history_csv_has_one_row_per_eval() {
        let mut h = ConvergenceHistory::default();
        h.push(&[1.0, 2.0], &Evaluation::value(3.0), true);
        let mut ev = Evaluation::value(2.0);
        ev.components = Some((0.5, 1.5));
        h.push(&[1.5, 2.0], &ev, true);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "eval,p0,p1,objective,rmse_training,rmse_diffusion,accepted");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with("5e-1,1.5e0,1"));
        assert_eq!(h.best_so_far(), vec![3.0, 2.0]);
    }
}
