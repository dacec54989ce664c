//! Stationary covariance kernels with per-axis lengthscales.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// Squared exponential.
    #[serde(alias = "se")]
    SE,
    /// Rational quadratic.
    #[serde(alias = "rq")]
    RQ,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::SE => "SE",
            KernelKind::RQ => "RQ",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Amplitude; the kernel scales with `sigma^2`.
    pub sigma: f64,
    pub lengthscales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// One trainable scalar in the packed optimizer vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSlot {
    Sigma,
    /// A single lengthscale axis, or every axis when lengthscales are tied.
    Lengthscale(usize),
    TiedLengthscale,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub params: Hyperparams,
    #[serde(default)]
    pub train_sigma: bool,
    #[serde(default = "yes")]
    pub train_lengthscales: bool,
    /// Ignored for SE.
    #[serde(default = "yes")]
    pub train_alpha: bool,
    /// Share one lengthscale across all axes.
    #[serde(default)]
    pub tied_lengthscales: bool,
}

fn yes() -> bool {
    true
}

impl KernelSpec {
    pub fn new(kind: KernelKind, params: Hyperparams) -> Result<Self> {
        let spec = Self {
            kind,
            params,
            train_sigma: false,
            train_lengthscales: true,
            train_alpha: true,
            tied_lengthscales: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn se(sigma: f64, lengthscales: Vec<f64>) -> Result<Self> {
        Self::new(
            KernelKind::SE,
            Hyperparams {
                sigma,
                lengthscales,
                alpha: None,
            },
        )
    }

    pub fn rq(sigma: f64, lengthscales: Vec<f64>, alpha: f64) -> Result<Self> {
        Self::new(
            KernelKind::RQ,
            Hyperparams {
                sigma,
                lengthscales,
                alpha: Some(alpha),
            },
        )
    }

    pub fn dims(&self) -> usize {
        self.params.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("sigma", p.sigma)?;
        if p.lengthscales.is_empty() {
            return Err(Error::InvalidParameter("lengthscales must not be empty".into()));
        }
        for &l in &p.lengthscales {
            positive("lengthscale", l)?;
        }
        match (self.kind, p.alpha) {
            (KernelKind::SE, None) => Ok(()),
            (KernelKind::RQ, Some(a)) => positive("alpha", a),
            (KernelKind::SE, Some(_)) => {
                Err(Error::InvalidParameter("alpha is only valid for the RQ kernel".into()))
            }
            (KernelKind::RQ, None) => Err(Error::InvalidParameter("RQ kernel requires alpha".into())),
        }
    }

    /// Trainable parameters in packing order: sigma, lengthscales, alpha.
    pub fn slots(&self) -> Vec<ParamSlot> {
        let mut slots = Vec::new();
        if self.train_sigma {
            slots.push(ParamSlot::Sigma);
        }
        if self.train_lengthscales {
            if self.tied_lengthscales {
                slots.push(ParamSlot::TiedLengthscale);
            } else {
                slots.extend((0..self.dims()).map(ParamSlot::Lengthscale));
            }
        }
        if self.kind == KernelKind::RQ && self.train_alpha {
            slots.push(ParamSlot::Alpha);
        }
        slots
    }

    fn get(&self, slot: ParamSlot) -> f64 {
        match slot {
            ParamSlot::Sigma => self.params.sigma,
            ParamSlot::Lengthscale(k) => self.params.lengthscales[k],
            ParamSlot::TiedLengthscale => self.params.lengthscales[0],
            ParamSlot::Alpha => self.params.alpha.expect("validated RQ spec"),
        }
    }

    fn set(&mut self, slot: ParamSlot, v: f64) {
        match slot {
            ParamSlot::Sigma => self.params.sigma = v,
            ParamSlot::Lengthscale(k) => self.params.lengthscales[k] = v,
            ParamSlot::TiedLengthscale => self.params.lengthscales.iter_mut().for_each(|l| *l = v),
            ParamSlot::Alpha => self.params.alpha = Some(v),
        }
    }

    /// Trainable parameters in raw units.
    pub fn pack_raw(&self) -> Vec<f64> {
        self.slots().into_iter().map(|s| self.get(s)).collect()
    }

    pub fn unpack_raw(&self, packed: &[f64]) -> Result<Self> {
        let slots = self.slots();
        if packed.len() != slots.len() {
            return Err(Error::DimensionMismatch {
                expected: slots.len(),
                found: packed.len(),
            });
        }
        let mut out = self.clone();
        for (slot, &v) in slots.into_iter().zip(packed) {
            out.set(slot, v);
        }
        out.validate()?;
        Ok(out)
    }

    /// Natural-log encoding of the trainable parameters.
    pub fn pack_log(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(self.pack_raw().into_iter().map(f64::ln).collect())
    }

    pub fn unpack_log(&self, packed: &[f64]) -> Result<Self> {
        let raw: Vec<f64> = packed.iter().map(|v| v.exp()).collect();
        self.unpack_raw(&raw)
    }

    /// Covariance between two points.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let s = self.scaled_sq_dist(x, y);
        self.profile(s)
    }

    #[inline]
    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.params.lengthscales)
            .map(|((a, b), l)| {
                let r = (a - b) / l;
                r * r
            })
            .sum()
    }

    #[inline]
    fn profile(&self, s: f64) -> f64 {
        let var = self.params.sigma * self.params.sigma;
        match self.kind {
            KernelKind::SE => var * (-0.5 * s).exp(),
            KernelKind::RQ => {
                let alpha = self.params.alpha.expect("validated RQ spec");
                var * (-alpha * (s / (2.0 * alpha)).ln_1p()).exp()
            }
        }
    }

    fn check_points(&self, points: &[f64]) -> Result<usize> {
        let d = self.dims();
        if points.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: points.len() % d,
            });
        }
        Ok(points.len() / d)
    }

    /// `|A| x |B|` covariance matrix between two flattened point sets.
    pub fn matrix(&self, a: &[f64], b: &[f64]) -> Result<Mat<f64>> {
        let d = self.dims();
        let na = self.check_points(a)?;
        let nb = self.check_points(b)?;
        Ok(Mat::from_fn(na, nb, |i, j| {
            self.eval(&a[i * d..(i + 1) * d], &b[j * d..(j + 1) * d])
        }))
    }

    /// Symmetric covariance of a point set with itself; exactly symmetric by construction.
    pub fn gram(&self, points: &[f64]) -> Result<Mat<f64>> {
        let d = self.dims();
        let n = self.check_points(points)?;
        let mut k = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            let xj = &points[j * d..(j + 1) * d];
            for i in j..n {
                let v = self.eval(&points[i * d..(i + 1) * d], xj);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Gram matrix together with its derivatives with respect to each packed log-parameter.
    pub fn gram_with_log_gradients(&self, points: &[f64]) -> Result<(Mat<f64>, Vec<Mat<f64>>)> {
        let d = self.dims();
        let n = self.check_points(points)?;
        let slots = self.slots();
        let mut k = Mat::<f64>::zeros(n, n);
        let mut grads: Vec<Mat<f64>> = slots.iter().map(|_| Mat::zeros(n, n)).collect();
        let ls = &self.params.lengthscales;
        let mut r2 = vec![0.0; d];
        for j in 0..n {
            let xj = &points[j * d..(j + 1) * d];
            for i in j..n {
                let xi = &points[i * d..(i + 1) * d];
                let mut s = 0.0;
                for a in 0..d {
                    let r = (xi[a] - xj[a]) / ls[a];
                    r2[a] = r * r;
                    s += r2[a];
                }
                let kv = self.profile(s);
                // d K / d log(lambda_a) = radial factor * r_a^2 / lambda_a^2
                let (radial, dalpha) = match self.kind {
                    KernelKind::SE => (kv, 0.0),
                    KernelKind::RQ => {
                        let alpha = self.params.alpha.expect("validated RQ spec");
                        let u = 1.0 + s / (2.0 * alpha);
                        let radial = kv / u;
                        let dalpha = kv * alpha * (-(u.ln()) + s / (2.0 * alpha * u));
                        (radial, dalpha)
                    }
                };
                k[(i, j)] = kv;
                k[(j, i)] = kv;
                for (g, slot) in grads.iter_mut().zip(&slots) {
                    let v = match *slot {
                        ParamSlot::Sigma => 2.0 * kv,
                        ParamSlot::Lengthscale(a) => radial * r2[a],
                        ParamSlot::TiedLengthscale => radial * s,
                        ParamSlot::Alpha => dalpha,
                    };
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
        }
        Ok((k, grads))
    }
}
