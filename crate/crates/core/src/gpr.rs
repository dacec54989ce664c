//! Exact Gaussian-process regression with a zero prior mean and fixed jitter.

use faer::linalg::solvers::{DenseSolveCore, Llt, SolveCore};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Jitter used for noiseless fitting.
pub const NOISELESS_JITTER: f64 = 1e-10;
/// Largest jitter reached by [`fit_with_escalation`].
pub const MAX_JITTER: f64 = 1e-6;

/// Fitted posterior state. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    points: Vec<f64>,
    values: Vec<f64>,
    spec: KernelSpec,
    noise: f64,
    escalations: usize,
    chol: Llt<f64>,
    weights: Vec<f64>,
}

/// The three additive terms of the log marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmlTerms {
    /// `-1/2 y^T K^-1 y`
    pub data_fit: f64,
    /// `-1/2 log|K|`
    pub complexity: f64,
    /// `-n/2 log(2 pi)`
    pub constant: f64,
}

impl LmlTerms {
    pub fn total(&self) -> f64 {
        self.data_fit + self.complexity + self.constant
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveVariance {
    pub values: Vec<f64>,
    /// Number of raw variances that came out negative and were clamped to zero.
    pub clamp_events: usize,
    /// Magnitude of the most negative raw variance.
    pub max_clamp: f64,
}

/// Factorizes `K + noise * I` and precomputes the posterior weights.
pub fn fit(points: &[f64], values: &[f64], spec: &KernelSpec, noise: f64) -> Result<GpModel> {
    let d = spec.dims();
    if values.is_empty() {
        return Err(Error::InvalidParameter("at least one training point is required".into()));
    }
    if points.len() != values.len() * d {
        return Err(Error::DimensionMismatch {
            expected: values.len() * d,
            found: points.len(),
        });
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidParameter(format!("noise must be non-negative, got {noise}")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("training value {i} is not finite")));
    }
    spec.validate()?;

    let mut k = spec.gram(points)?;
    let n = values.len();
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let chol = k.llt(Side::Lower).map_err(|e| match e {
        faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
            Error::NotPositiveDefinite {
                pivot: index,
                jitter: noise,
            }
        }
    })?;
    let mut w = Mat::<f64>::from_fn(n, 1, |i, _| values[i]);
    chol.solve_in_place_with_conj(faer::Conj::No, w.as_mut());
    let weights = (0..n).map(|i| w[(i, 0)]).collect();
    Ok(GpModel {
        points: points.to_vec(),
        values: values.to_vec(),
        spec: spec.clone(),
        noise,
        escalations: 0,
        chol,
        weights,
    })
}

/// Like [`fit`], but multiplies the jitter by 10 after each failed factorization, up to
/// [`MAX_JITTER`].
pub fn fit_with_escalation(
    points: &[f64],
    values: &[f64],
    spec: &KernelSpec,
    noise: f64,
) -> Result<GpModel> {
    let mut jitter = noise;
    let mut escalations = 0;
    loop {
        match fit(points, values, spec, jitter) {
            Ok(mut model) => {
                model.escalations = escalations;
                return Ok(model);
            }
            Err(Error::NotPositiveDefinite { pivot, .. }) if jitter * 10.0 <= MAX_JITTER * 1.000_001 => {
                let next = if jitter > 0.0 { jitter * 10.0 } else { NOISELESS_JITTER };
                log::warn!("cholesky failed at pivot {pivot} with jitter {jitter:e}; retrying with {next:e}");
                jitter = next;
                escalations += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

impl GpModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// How many times the jitter was raised during fitting.
    pub fn escalations(&self) -> usize {
        self.escalations
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn train_points(&self) -> &[f64] {
        &self.points
    }

    pub fn train_values(&self) -> &[f64] {
        &self.values
    }

    /// Solution of `(K + noise I) w = y`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lower Cholesky factor of `K + noise I`.
    pub fn cholesky_factor(&self) -> faer::MatRef<'_, f64> {
        self.chol.L()
    }

    fn check_query(&self, query: &[f64]) -> Result<usize> {
        let d = self.spec.dims();
        if query.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: query.len() % d,
            });
        }
        Ok(query.len() / d)
    }

    /// Posterior mean `K(X*, X) w` at each query point.
    pub fn predict_mean(&self, query: &[f64]) -> Result<Vec<f64>> {
        let d = self.spec.dims();
        let m = self.check_query(query)?;
        Ok((0..m)
            .map(|q| {
                let xq = &query[q * d..(q + 1) * d];
                self.points
                    .chunks_exact(d)
                    .zip(&self.weights)
                    .map(|(xi, w)| self.spec.eval(xq, xi) * w)
                    .sum()
            })
            .collect())
    }

    /// Pointwise posterior variance, clamped at zero.
    pub fn predict_var(&self, query: &[f64]) -> Result<PredictiveVariance> {
        let d = self.spec.dims();
        let m = self.check_query(query)?;
        let mut kt = self.spec.matrix(&self.points, query)?;
        solve_lower_triangular_in_place(self.chol.L(), kt.as_mut(), Par::Seq);
        let mut out = PredictiveVariance {
            values: Vec::with_capacity(m),
            clamp_events: 0,
            max_clamp: 0.0,
        };
        for q in 0..m {
            let xq = &query[q * d..(q + 1) * d];
            let explained: f64 = kt.col(q).iter().map(|v| v * v).sum();
            let raw = self.spec.eval(xq, xq) - explained;
            if raw < 0.0 {
                out.clamp_events += 1;
                out.max_clamp = out.max_clamp.max(-raw);
                out.values.push(0.0);
            } else {
                out.values.push(raw);
            }
        }
        Ok(out)
    }

    pub fn lml_terms(&self) -> LmlTerms {
        let n = self.values.len() as f64;
        let fit: f64 = self.values.iter().zip(&self.weights).map(|(y, w)| y * w).sum();
        let l = self.chol.L();
        let log_det_half: f64 = (0..self.values.len()).map(|i| l[(i, i)].ln()).sum();
        LmlTerms {
            data_fit: -0.5 * fit,
            complexity: -log_det_half,
            constant: -0.5 * n * (2.0 * std::f64::consts::PI).ln(),
        }
    }

    /// Log marginal likelihood of the training data under the fitted kernel.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml_terms().total()
    }

    /// Gradient of the log marginal likelihood with respect to the packed log-parameters,
    /// `1/2 tr((w w^T - K^-1) dK/dtheta_j)`.
    pub fn lml_gradient(&self) -> Result<Vec<f64>> {
        let (_, grads) = self.spec.gram_with_log_gradients(&self.points)?;
        if grads.is_empty() {
            return Ok(Vec::new());
        }
        let kinv = self.chol.inverse();
        let n = self.values.len();
        let w = &self.weights;
        Ok(grads
            .iter()
            .map(|dk| {
                let mut acc = 0.0;
                for j in 0..n {
                    let col = dk.col(j);
                    let kcol = kinv.col(j);
                    let mut s = 0.0;
                    for i in 0..n {
                        s += (w[i] * w[j] - kcol[i]) * col[i];
                    }
                    acc += s;
                }
                0.5 * acc
            })
            .collect())
    }
}
