use std::collections::VecDeque;

use super::{dot, norm, project, ConvergenceHistory, Evaluation, OptimResult, OptimizerConfig, Termination};
use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// Projected L-BFGS with a backtracking Armijo search along the projected path.
///
/// Every trial point is clipped into the bounds before evaluation. A non-finite value or
/// gradient at the starting point aborts; at a trial point it is treated as a failed
/// line-search step.
pub fn minimize_quasi_newton<F>(mut objective: F, x0: &[f64], config: &OptimizerConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Evaluation,
{
    config.validate()?;
    let n = x0.len();
    let (lo, hi) = config.bounds(n)?;
    let mut history = ConvergenceHistory::default();

    let mut x = x0.to_vec();
    project(&mut x, &lo, &hi);
    let ev = objective(&x);
    let finite = ev.value.is_finite() && ev.gradient.len() == n && ev.gradient.iter().all(|g| g.is_finite());
    history.push(&x, &ev, finite);
    if !finite {
        return Ok(OptimResult {
            x,
            value: ev.value,
            termination: Termination::Aborted,
            history,
        });
    }
    if ev.gradient.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ev.gradient.len(),
        });
    }
    let mut f = ev.value;
    let mut g = ev.gradient;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut first = true;

    let termination = loop {
        if projected_gradient_norm(&x, &g, &lo, &hi) <= config.tol_obj {
            break Termination::GradientTolerance;
        }
        if history.len() >= config.max_evals {
            break Termination::MaxEvals;
        }

        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let mut d = two_loop(&g, &pairs, &free);
        if dot(&d, &g) >= 0.0 {
            pairs.clear();
            d = g.iter().zip(&free).map(|(gi, &fr)| if fr { -gi } else { 0.0 }).collect();
        }

        let mut t = if first { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
        first = false;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            if history.len() >= config.max_evals {
                break;
            }
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            project(&mut trial, &lo, &hi);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if norm(&step) == 0.0 {
                break;
            }
            let ev = objective(&trial);
            let ok = ev.value.is_finite()
                && ev.gradient.len() == n
                && ev.gradient.iter().all(|v| v.is_finite())
                && ev.value <= f + ARMIJO * dot(&g, &step);
            history.push(&trial, &ev, ok);
            if ok {
                accepted = Some((trial, step, ev));
                break;
            }
            t *= 0.5;
        }

        let Some((x_new, s, ev)) = accepted else {
            break if history.len() >= config.max_evals {
                Termination::MaxEvals
            } else {
                Termination::StepTolerance
            };
        };
        let y: Vec<f64> = ev.gradient.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if pairs.len() == config.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s.clone(), y, 1.0 / sy));
        }
        let f_old = f;
        x = x_new;
        f = ev.value;
        g = ev.gradient;

        if s.iter().map(|v| v.abs()).fold(0.0, f64::max) <= config.tol_step {
            break Termination::StepTolerance;
        }
        if (f_old - f) / f_old.abs().max(f.abs()).max(1.0) <= config.ftol {
            break Termination::ObjectiveTolerance;
        }
    };

    Ok(OptimResult {
        x,
        value: f,
        termination,
        history,
    })
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| ((xi - gi).clamp(l, h) - xi).abs())
        .fold(0.0, f64::max)
}

/// `-H g` restricted to free variables, with the usual scaled-identity initial Hessian.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }).collect() };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let s = mask(s);
        let a = rho * dot(&s, &q);
        for (qi, yi) in q.iter_mut().zip(mask(y)) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let yy = dot(y, y);
        if yy > 0.0 {
            let gamma = dot(s, y) / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(&mask(y), &q);
        for (qi, si) in q.iter_mut().zip(mask(s)) {
            *qi += (a - b) * si;
        }
    }
    q.iter().zip(free).map(|(v, &f)| if f { -v } else { 0.0 }).collect()
}
