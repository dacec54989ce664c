//! Derivative-free trust-region minimization with bound constraints.
//!
//! The objective is modelled around the best point by a quadratic that interpolates
//! `2n + 1` sample points and, among all such quadratics, has the least Frobenius norm of
//! its Hessian. Steps minimize the model inside a ball intersected with the bounds; the
//! sample set is kept well spread by replacing far points with maximizers of their
//! Lagrange functions; the resolution `rho` shrinks from `initial_radius` to `tol_step`.

use faer::linalg::solvers::SolveCore;
use faer::Mat;

use super::{norm, project, ConvergenceHistory, Evaluation, OptimResult, OptimizerConfig, Termination};
use crate::error::{Error, Result};

/// `c + g.s + 1/2 s.H s` in unscaled step coordinates.
#[derive(Debug, Clone)]
struct Quadratic {
    c: f64,
    g: Vec<f64>,
    h: Vec<Vec<f64>>,
}

impl Quadratic {
    fn eval(&self, s: &[f64]) -> f64 {
        self.c + self.slope(s)
    }

    /// `q(s) - q(0)`.
    fn slope(&self, s: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for i in 0..s.len() {
            lin += self.g[i] * s[i];
            let hs: f64 = self.h[i].iter().zip(s).map(|(a, b)| a * b).sum();
            quad += s[i] * hs;
        }
        lin + 0.5 * quad
    }

    fn gradient(&self, s: &[f64]) -> Vec<f64> {
        (0..s.len())
            .map(|i| self.g[i] + self.h[i].iter().zip(s).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    fn negated(&self) -> Self {
        Self {
            c: -self.c,
            g: self.g.iter().map(|v| -v).collect(),
            h: self.h.iter().map(|r| r.iter().map(|v| -v).collect()).collect(),
        }
    }
}

struct Models {
    objective: Quadratic,
    lagrange: Vec<Quadratic>,
}

/// Solves the interpolation system around `center`. The objective model's Hessian is the
/// one closest to `base_h` in Frobenius norm; the Lagrange functions use the plain
/// least-norm Hessian.
fn build_models(center: &[f64], pts: &[Vec<f64>], vals: &[f64], base_h: &[Vec<f64>], scale: f64) -> Option<Models> {
    let n = center.len();
    let m = pts.len();
    let dim = m + n + 1;
    let steps: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| p.iter().zip(center).map(|(a, b)| (a - b) / scale).collect())
        .collect();
    let mut kkt = Mat::<f64>::zeros(dim, dim);
    for i in 0..m {
        for j in 0..m {
            let ip: f64 = steps[i].iter().zip(&steps[j]).map(|(a, b)| a * b).sum();
            kkt[(i, j)] = 0.5 * ip * ip;
        }
        kkt[(i, m)] = 1.0;
        kkt[(m, i)] = 1.0;
        for k in 0..n {
            kkt[(i, m + 1 + k)] = steps[i][k];
            kkt[(m + 1 + k, i)] = steps[i][k];
        }
    }
    let lu = kkt.partial_piv_lu();
    let mut rhs = Mat::<f64>::zeros(dim, m + 1);
    for i in 0..m {
        let s: Vec<f64> = pts[i].iter().zip(center).map(|(a, b)| a - b).collect();
        let curv: f64 = (0..n).map(|a| s[a] * base_h[a].iter().zip(&s).map(|(h, v)| h * v).sum::<f64>()).sum();
        rhs[(i, 0)] = vals[i] - 0.5 * curv;
        rhs[(i, i + 1)] = 1.0;
    }
    lu.solve_in_place_with_conj(faer::Conj::No, rhs.as_mut());

    let mut quads = Vec::with_capacity(m + 1);
    for col in 0..=m {
        let sol: Vec<f64> = (0..dim).map(|r| rhs[(r, col)]).collect();
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut h = vec![vec![0.0; n]; n];
        for (j, st) in steps.iter().enumerate() {
            let lam = sol[j];
            for a in 0..n {
                for b in 0..n {
                    h[a][b] += lam * st[a] * st[b];
                }
            }
        }
        let inv2 = 1.0 / (scale * scale);
        quads.push(Quadratic {
            c: sol[m],
            g: sol[m + 1..].iter().map(|v| v / scale).collect(),
            h: h.into_iter().map(|r| r.into_iter().map(|v| v * inv2).collect()).collect(),
        });
    }
    let mut it = quads.into_iter();
    let mut objective = it.next().expect("m + 1 columns");
    for (row, base) in objective.h.iter_mut().zip(base_h) {
        for (v, b) in row.iter_mut().zip(base) {
            *v += b;
        }
    }
    // interpolation sanity: the objective model must reproduce the samples
    let obj = &objective;
    let spread = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for (p, v) in pts.iter().zip(vals) {
        let s: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
        if (obj.eval(&s) - v).abs() > 1e-6 * spread {
            return None;
        }
    }
    Some(Models {
        objective,
        lagrange: it.collect(),
    })
}

/// Feasible region for steps: `lo <= s <= hi` (with `lo <= 0 <= hi`) and `|s| <= radius`.
struct Region<'a> {
    lo: &'a [f64],
    hi: &'a [f64],
    radius: f64,
}

impl Region<'_> {
    /// Clip into the box, then pull toward the origin onto the ball; the result stays in the box.
    fn map(&self, z: &[f64]) -> Vec<f64> {
        let mut s = z.to_vec();
        project(&mut s, self.lo, self.hi);
        let r = norm(&s);
        if r > self.radius {
            let f = self.radius / r;
            s.iter_mut().for_each(|v| *v *= f);
        }
        s
    }
}

fn descend(q: &Quadratic, start: Vec<f64>, region: &Region<'_>) -> Vec<f64> {
    let mut s = region.map(&start);
    let mut qs = q.slope(&s);
    let mut step = region.radius;
    for _ in 0..200 {
        let grad = q.gradient(&s);
        let gn = norm(&grad);
        if gn == 0.0 {
            break;
        }
        let mut moved = false;
        while step > 1e-12 * region.radius {
            let z: Vec<f64> = s.iter().zip(&grad).map(|(a, g)| a - step / gn * g).collect();
            let t = region.map(&z);
            let qt = q.slope(&t);
            if qt < qs {
                s = t;
                qs = qt;
                step = (2.0 * step).min(2.0 * region.radius);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    s
}

/// Approximate minimizer of `q` over the region, from several deterministic starts.
fn minimize_in_region(q: &Quadratic, region: &Region<'_>) -> Vec<f64> {
    let n = q.g.len();
    let mut starts = vec![vec![0.0; n]];
    let gn = norm(&q.g);
    if gn > 0.0 {
        starts.push(q.g.iter().map(|g| -region.radius * g / gn).collect());
    }
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = sign * region.radius;
            starts.push(e);
        }
    }
    let mut best = vec![0.0; n];
    let mut best_q = 0.0;
    for st in starts {
        let s = descend(q, st, region);
        let v = q.slope(&s);
        if v < best_q {
            best_q = v;
            best = s;
        }
    }
    best
}

/// Step in the region maximizing `|l(s)|` for a Lagrange function `l`.
fn maximize_abs(l: &Quadratic, region: &Region<'_>) -> Vec<f64> {
    let a = minimize_in_region(l, region);
    let b = minimize_in_region(&l.negated(), region);
    if l.eval(&a).abs() >= l.eval(&b).abs() {
        a
    } else {
        b
    }
}

struct Samples {
    pts: Vec<Vec<f64>>,
    vals: Vec<f64>,
    /// Hessian of the latest objective model, carried into the next one.
    hess: Vec<Vec<f64>>,
}

impl Samples {
    fn best(&self) -> usize {
        let mut k = 0;
        for (i, v) in self.vals.iter().enumerate() {
            if *v < self.vals[k] {
                k = i;
            }
        }
        k
    }

    fn farthest_from(&self, k: usize) -> (usize, f64) {
        let mut far = (k, 0.0);
        for (i, p) in self.pts.iter().enumerate() {
            if i == k {
                continue;
            }
            let d = dist(p, &self.pts[k]);
            if d > far.1 {
                far = (i, d);
            }
        }
        far
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.pts.iter().any(|p| dist(p, x) <= 1e-14 * (1.0 + norm(x)))
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Finite stand-in for a failed evaluation so it can still occupy an interpolation slot.
fn penalty(vals: &[f64]) -> f64 {
    let finite = vals.iter().filter(|v| v.is_finite());
    let hi = finite.clone().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let lo = finite.fold(f64::INFINITY, |a, &v| a.min(v));
    if hi.is_finite() {
        hi + (hi - lo).max(hi.abs()).max(1.0)
    } else {
        1.0
    }
}

struct Run<'a, F> {
    objective: F,
    history: ConvergenceHistory,
    best: f64,
    max_evals: usize,
    lo: &'a [f64],
    hi: &'a [f64],
}

impl<F: FnMut(&[f64]) -> Evaluation> Run<'_, F> {
    fn exhausted(&self) -> bool {
        self.history.len() >= self.max_evals
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let mut x = x.to_vec();
        project(&mut x, self.lo, self.hi);
        let ev = (self.objective)(&x);
        let v = if ev.value.is_finite() { ev.value } else { f64::NAN };
        let accepted = v < self.best;
        if accepted {
            self.best = v;
        }
        self.history.push(&x, &ev, accepted);
        v
    }
}

/// Two distinct feasible displacements along one axis for the initial sample set.
fn initial_offsets(x: f64, lo: f64, hi: f64, radius: f64) -> Option<(f64, f64)> {
    let up = hi - x;
    let dn = x - lo;
    let mut r = radius;
    for _ in 0..60 {
        let (a, b) = if up >= r && dn >= r {
            (r, -r)
        } else if up >= 2.0 * r {
            (r, 2.0 * r)
        } else if dn >= 2.0 * r {
            (-r, -2.0 * r)
        } else {
            r *= 0.5;
            continue;
        };
        return Some((a, b));
    }
    None
}

/// Bound-constrained derivative-free minimization.
///
/// Every evaluated point lies within the bounds. Non-finite objective values are recorded
/// in the history but never become the incumbent; the trust region shrinks around them.
pub fn minimize_dfo<F>(objective: F, x0: &[f64], config: &OptimizerConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Evaluation,
{
    config.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidParameter("nothing to optimize".into()));
    }
    let (lo, hi) = config.bounds(n)?;
    let mut x = x0.to_vec();
    project(&mut x, &lo, &hi);

    let mut run = Run {
        objective,
        history: ConvergenceHistory::default(),
        best: f64::INFINITY,
        max_evals: config.max_evals,
        lo: &lo,
        hi: &hi,
    };

    let mut rho = config.initial_radius;
    let rho_end = config.tol_step.min(rho);
    let mut delta = rho;

    let f0 = run.eval(&x);
    if !f0.is_finite() {
        return Ok(OptimResult {
            x,
            value: f64::NAN,
            termination: Termination::Aborted,
            history: run.history,
        });
    }
    let mut samples = Samples {
        pts: vec![x.clone()],
        vals: vec![f0],
        hess: vec![vec![0.0; n]; n],
    };
    'init: for i in 0..n {
        let (a, b) = initial_offsets(x[i], lo[i], hi[i], rho)
            .ok_or_else(|| Error::InvalidParameter(format!("bounds leave no room along axis {i}")))?;
        for off in [a, b] {
            if run.exhausted() {
                break 'init;
            }
            let mut p = x.clone();
            let mut step = off;
            let mut v = f64::NAN;
            for _ in 0..5 {
                p[i] = x[i] + step;
                v = run.eval(&p);
                if v.is_finite() || run.exhausted() {
                    break;
                }
                step *= 0.5;
            }
            let v = if v.is_finite() { v } else { penalty(&samples.vals) };
            samples.pts.push(p);
            samples.vals.push(v);
        }
    }

    let termination = loop {
        if run.exhausted() {
            break Termination::MaxEvals;
        }
        let k = samples.best();
        let xk = samples.pts[k].clone();
        let fk = samples.vals[k];
        let region_lo: Vec<f64> = lo.iter().zip(&xk).map(|(l, x)| l - x).collect();
        let region_hi: Vec<f64> = hi.iter().zip(&xk).map(|(h, x)| h - x).collect();

        let Some(models) = build_models(&xk, &samples.pts, &samples.vals, &samples.hess, delta) else {
            let (far, d) = samples.farthest_from(k);
            if far != k && d > 0.0 {
                geometry_step(&mut run, &mut samples, k, far, d, delta, rho, &region_lo, &region_hi);
                continue;
            }
            match reduce(&mut rho, &mut delta, rho_end) {
                true => continue,
                false => break Termination::StepTolerance,
            }
        };

        samples.hess = models.objective.h.clone();
        let region = Region {
            lo: &region_lo,
            hi: &region_hi,
            radius: delta,
        };
        let s = minimize_in_region(&models.objective, &region);
        let snorm = norm(&s);
        let predicted = -models.objective.slope(&s);

        if snorm < 0.5 * rho || predicted <= 0.0 {
            let (far, d) = samples.farthest_from(k);
            if d > 2.0 * rho {
                geometry_step(&mut run, &mut samples, k, far, d, delta, rho, &region_lo, &region_hi);
                continue;
            }
            match reduce(&mut rho, &mut delta, rho_end) {
                true => continue,
                false => break Termination::StepTolerance,
            }
        }

        let xt: Vec<f64> = xk.iter().zip(&s).map(|(a, b)| a + b).collect();
        let ft = run.eval(&xt);
        if !ft.is_finite() {
            delta = (0.5 * snorm).max(rho);
            if snorm <= rho {
                match reduce(&mut rho, &mut delta, rho_end) {
                    true => continue,
                    false => break Termination::StepTolerance,
                }
            }
            continue;
        }
        let ratio = (fk - ft) / predicted;
        delta = if ratio <= 0.1 {
            (0.5 * delta).min(snorm)
        } else if ratio <= 0.7 {
            (0.5 * delta).max(snorm)
        } else {
            (0.5 * delta).max(2.0 * snorm)
        };
        if delta <= 1.5 * rho {
            delta = rho;
        }

        if !samples.contains(&xt) {
            let center = if ft < fk { &xt } else { &xk };
            let mut pick = None;
            let mut best_score = -1.0;
            for (j, l) in models.lagrange.iter().enumerate() {
                if j == k && ft >= fk {
                    continue;
                }
                let w = (dist(&samples.pts[j], center) / delta).powi(2).max(1.0);
                let score = l.eval(&s).abs() * w;
                if score > best_score {
                    best_score = score;
                    pick = Some(j);
                }
            }
            if let Some(t) = pick {
                samples.pts[t] = xt;
                samples.vals[t] = ft;
            }
        }

        if ratio < 0.1 {
            let k = samples.best();
            let (far, d) = samples.farthest_from(k);
            if d > 2.0 * delta {
                let region_lo: Vec<f64> = lo.iter().zip(&samples.pts[k]).map(|(l, x)| l - x).collect();
                let region_hi: Vec<f64> = hi.iter().zip(&samples.pts[k]).map(|(h, x)| h - x).collect();
                geometry_step(&mut run, &mut samples, k, far, d, delta, rho, &region_lo, &region_hi);
            } else if delta <= rho && !reduce(&mut rho, &mut delta, rho_end) {
                break Termination::StepTolerance;
            }
        }
    };

    let k = samples.best();
    Ok(OptimResult {
        x: samples.pts[k].clone(),
        value: samples.vals[k],
        termination,
        history: run.history,
    })
}

/// Lowers the resolution; `false` once it has reached `rho_end`.
fn reduce(rho: &mut f64, delta: &mut f64, rho_end: f64) -> bool {
    if *rho <= rho_end {
        return false;
    }
    let ratio = *rho / rho_end;
    let next = if ratio <= 16.0 {
        rho_end
    } else if ratio <= 250.0 {
        ratio.sqrt() * rho_end
    } else {
        0.1 * *rho
    };
    *delta = (0.5 * *rho).max(next);
    *rho = next;
    true
}

/// Replaces sample `far` with a point near the incumbent that keeps the set well poised.
#[allow(clippy::too_many_arguments)]
fn geometry_step<F: FnMut(&[f64]) -> Evaluation>(
    run: &mut Run<'_, F>,
    samples: &mut Samples,
    k: usize,
    far: usize,
    far_dist: f64,
    delta: f64,
    rho: f64,
    region_lo: &[f64],
    region_hi: &[f64],
) {
    let xk = samples.pts[k].clone();
    let radius = (0.1 * far_dist).min(delta).max(rho);
    let region = Region {
        lo: region_lo,
        hi: region_hi,
        radius,
    };
    let mut s = build_models(&xk, &samples.pts, &samples.vals, &samples.hess, radius)
        .map(|m| maximize_abs(&m.lagrange[far], &region))
        .unwrap_or_default();
    if norm(&s) < 1e-3 * radius {
        // fall back to pulling the far point straight in
        let dir: Vec<f64> = samples.pts[far].iter().zip(&xk).map(|(a, b)| (a - b) / far_dist * radius).collect();
        s = region.map(&dir);
    }
    let xt: Vec<f64> = xk.iter().zip(&s).map(|(a, b)| a + b).collect();
    if samples.contains(&xt) {
        return;
    }
    let ft = run.eval(&xt);
    let ft = if ft.is_finite() { ft } else { penalty(&samples.vals) };
    samples.pts[far] = xt;
    samples.vals[far] = ft;
}
