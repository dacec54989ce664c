//! Seeded stand-in dataset: a smooth positive field with two sigmoidal fronts that meet in
//! one corner, a third-axis modulation coupled to both, and a bump near the far end of the
//! first axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::StructuredMesh;

/// Closed-form ground truth behind a generated dataset. Saved next to the CSV so the field
/// can be evaluated away from the mesh nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticField {
    pub seed: u64,
    pub shape: Vec<usize>,
    /// Raw coordinate range of each axis.
    pub axis_ranges: Vec<(f64, f64)>,
    pub front1_center: f64,
    pub front1_width: f64,
    pub front2_center: f64,
    pub front2_width: f64,
    pub modulation: f64,
    pub bump: f64,
    /// Raw maximum over the mesh nodes; node values are divided by it.
    pub peak: f64,
    pub formula: String,
}

const FORMULA: &str = "t_k = (x_k - lo_k) / (hi_k - lo_k); \
s1 = logistic((t_0 - front1_center) / front1_width); \
s2 = logistic((t_1 - front2_center) / front2_width); \
base = 0.15 + 0.25 t_0 + 0.1 t_1 + 0.6 s1 s2 + bump exp(-((1 - t_0) / 0.12)^2) cos(pi t_1); \
y = base (1 + modulation (t_2 - 0.5)(0.5 + t_0)(0.5 + t_1)) prod_{k>=3} (1 + 0.05 cos(pi t_k)) / peak";

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Raw node coordinates used for each axis of the generated mesh.
fn axis_coords(axis: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let i = i as f64;
            match axis {
                0 => i,
                1 => 0.5 * i,
                2 => 0.3 + 0.2 * i,
                _ => i,
            }
        })
        .collect()
}

impl SyntheticField {
    fn from_seed(shape: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || rng.random::<f64>();
        let axis_ranges = shape
            .iter()
            .enumerate()
            .map(|(a, &n)| {
                let c = axis_coords(a, n);
                (c[0], c[n - 1])
            })
            .collect();
        Self {
            seed,
            shape: shape.to_vec(),
            axis_ranges,
            front1_center: 0.55 + 0.1 * u(),
            front1_width: 0.07 + 0.02 * u(),
            front2_center: 0.6 + 0.1 * u(),
            front2_width: 0.035 + 0.01 * u(),
            modulation: 0.2 + 0.1 * u(),
            bump: 0.04 + 0.02 * u(),
            peak: 1.0,
            formula: FORMULA.to_string(),
        }
    }

    /// Field value at a raw coordinate.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_unscaled(x) / self.peak
    }

    fn eval_unscaled(&self, x: &[f64]) -> f64 {
        let t: Vec<f64> = x
            .iter()
            .zip(&self.axis_ranges)
            .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
            .collect();
        let t0 = t[0];
        let t1 = t.get(1).copied().unwrap_or(1.0);
        let s1 = logistic((t0 - self.front1_center) / self.front1_width);
        let s2 = logistic((t1 - self.front2_center) / self.front2_width);
        let bump = self.bump * (-((1.0 - t0) / 0.12).powi(2)).exp() * (std::f64::consts::PI * t1).cos();
        let base = 0.15 + 0.25 * t0 + 0.1 * t1 + 0.6 * s1 * s2 + bump;
        let mut scale = match t.get(2) {
            Some(&t2) => 1.0 + self.modulation * (t2 - 0.5) * (0.5 + t0) * (0.5 + t1),
            None => 1.0,
        };
        for &tk in t.iter().skip(3) {
            scale *= 1.0 + 0.05 * (std::f64::consts::PI * tk).cos();
        }
        base * scale
    }
}

/// Builds the seeded dataset on a mesh of the given shape. Values lie in `(0, 1]` with the
/// maximum node at exactly 1.
pub fn generate_synthetic_dataset(shape: &[usize], seed: u64) -> Result<(StructuredMesh, SyntheticField)> {
    if shape.is_empty() {
        return Err(Error::InvalidParameter("shape must have at least one axis".into()));
    }
    if let Some((axis, &points)) = shape.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(Error::NoCells { axis, points });
    }
    let mut field = SyntheticField::from_seed(shape, seed);
    let coords: Vec<Vec<f64>> = shape.iter().enumerate().map(|(a, &n)| axis_coords(a, n)).collect();
    let raw = StructuredMesh::new(coords.clone(), vec![0.0; shape.iter().product()])?;
    let values: Vec<f64> = raw.points().chunks_exact(shape.len()).map(|p| field.eval_unscaled(p)).collect();
    field.peak = values.iter().fold(f64::MIN, |a, &v| a.max(v));
    let values = values.into_iter().map(|v| v / field.peak).collect();
    Ok((StructuredMesh::new(coords, values)?, field))
}
