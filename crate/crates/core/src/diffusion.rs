//! Diffusion sensors: normalized undivided second differences along centre-crossing
//! diagonals, on the training mesh (true label) and on training plus centroid predictions
//! (staggered test sensor), and the loss that compares them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::GpModel;
use crate::mesh::{enumerate_diagonals, interior_multi_indices, strides, Diagonal, StaggeredMesh, StructuredMesh};

/// Denominators at or below this are rejected.
pub const EPSILON_GUARD: f64 = 1e-12;

/// Prefactor convention for the sensors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorScaling {
    /// `1/D^2` on the training mesh and `1/(3 (D/2)^2)` on the staggered stencil.
    #[default]
    Equation,
    /// Both prefactors carry an extra `1/3`, as in the slicing reference code.
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub spacing: f64,
    pub scaling: SensorScaling,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            scaling: SensorScaling::Equation,
        }
    }
}

impl SensorConfig {
    fn extra(&self) -> f64 {
        match self.scaling {
            SensorScaling::Equation => 1.0,
            SensorScaling::Appendix => 1.0 / 3.0,
        }
    }

    pub fn true_prefactor(&self) -> f64 {
        self.extra() / (self.spacing * self.spacing)
    }

    pub fn staggered_prefactor(&self) -> f64 {
        let half = self.spacing / 2.0;
        self.extra() / (3.0 * half * half)
    }

    fn validate(&self) -> Result<()> {
        if self.spacing > 0.0 && self.spacing.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("spacing must be positive, got {}", self.spacing)))
        }
    }
}

#[inline]
fn ratio(num: f64, den: f64, index: usize) -> Result<f64> {
    if den > EPSILON_GUARD {
        Ok(num.abs() / den)
    } else {
        Err(Error::DegenerateDenominator { index, value: den })
    }
}

/// Three-point sensor on a 1-d line of positive values; one output per interior node.
pub fn sensor_1d_true(values: &[f64], spacing: f64) -> Result<Vec<f64>> {
    let cfg = SensorConfig {
        spacing,
        ..Default::default()
    };
    cfg.validate()?;
    if values.len() < 3 {
        return Err(Error::TooFewPoints {
            axis: 0,
            points: values.len(),
        });
    }
    let pre = cfg.true_prefactor();
    values
        .windows(3)
        .enumerate()
        .map(|(i, w)| {
            let num = w[2] - 2.0 * w[1] + w[0];
            let den = w[2] + 2.0 * w[1] + w[0];
            ratio(num, den, i + 1).map(|r| pre * r)
        })
        .collect()
}

/// Four-point staggered sensor on a 1-d line: training-node predictions `pred_orig` and
/// midpoint predictions `pred_stag` (`pred_stag[i]` sits at `i + 1/2`).
pub fn sensor_1d_staggered(pred_orig: &[f64], pred_stag: &[f64], spacing: f64) -> Result<Vec<f64>> {
    let cfg = SensorConfig {
        spacing,
        ..Default::default()
    };
    cfg.validate()?;
    if pred_orig.len() < 3 {
        return Err(Error::TooFewPoints {
            axis: 0,
            points: pred_orig.len(),
        });
    }
    if pred_stag.len() + 1 != pred_orig.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![pred_orig.len() - 1],
            found: vec![pred_stag.len()],
        });
    }
    let pre = cfg.staggered_prefactor();
    (1..pred_orig.len() - 1)
        .map(|i| {
            let (a, b, c, e) = (pred_orig[i + 1], pred_stag[i], pred_stag[i - 1], pred_orig[i - 1]);
            ratio(a - b - c + e, a + b + c + e, i).map(|r| pre * r)
        })
        .collect()
}

/// Sensor values at interior nodes, one tensor per diagonal plus their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorField {
    interior_shape: Vec<usize>,
    diagonals: Vec<Diagonal>,
    per_diagonal: Vec<Vec<f64>>,
    total: Vec<f64>,
}

impl SensorField {
    fn from_parts(interior_shape: Vec<usize>, diagonals: Vec<Diagonal>, per_diagonal: Vec<Vec<f64>>) -> Self {
        let len = interior_shape.iter().product();
        let mut total = vec![0.0; len];
        for comp in &per_diagonal {
            for (t, v) in total.iter_mut().zip(comp) {
                *t += v;
            }
        }
        Self {
            interior_shape,
            diagonals,
            per_diagonal,
            total,
        }
    }

    /// Shape `(n_i - 2)` of the interior node block.
    pub fn interior_shape(&self) -> &[usize] {
        &self.interior_shape
    }

    pub fn diagonals(&self) -> &[Diagonal] {
        &self.diagonals
    }

    pub fn per_diagonal(&self) -> &[Vec<f64>] {
        &self.per_diagonal
    }

    pub fn component(&self, diagonal: &Diagonal) -> Option<&[f64]> {
        self.diagonals
            .iter()
            .position(|d| d == diagonal)
            .map(|i| self.per_diagonal[i].as_slice())
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    /// Mean sensor value of each diagonal component, in diagonal order.
    pub fn diagonal_means(&self) -> Vec<f64> {
        self.per_diagonal
            .iter()
            .map(|c| if c.is_empty() { 0.0 } else { c.iter().sum::<f64>() / c.len() as f64 })
            .collect()
    }

    /// Keeps only the listed diagonals (in the given order) and recomputes the total.
    pub fn restrict(&self, keep: &[Diagonal]) -> Result<Self> {
        let mut per = Vec::with_capacity(keep.len());
        for d in keep {
            let c = self
                .component(d)
                .ok_or_else(|| Error::InvalidParameter(format!("diagonal {d} not present in field")))?;
            per.push(c.to_vec());
        }
        Ok(Self::from_parts(self.interior_shape.clone(), keep.to_vec(), per))
    }

    /// Long-form CSV: interior multi-index (in full-mesh indices), one column per diagonal, total.
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.interior_shape.len();
        let mut header: Vec<String> = (1..=d).map(|k| format!("i{k}")).collect();
        header.extend(self.diagonals.iter().map(|g| format!("diag_{g}")));
        header.push("total".into());
        w.write_record(&header)?;
        for (flat, idx) in crate::mesh::multi_indices(&self.interior_shape).enumerate() {
            let mut rec: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
            rec.extend(self.per_diagonal.iter().map(|c| format!("{:e}", c[flat])));
            rec.push(format!("{:e}", self.total[flat]));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<sensor csv>", e))?;
        Ok(())
    }
}

fn require_interior(shape: &[usize]) -> Result<()> {
    match shape.iter().position(|&n| n < 3) {
        Some(axis) => Err(Error::TooFewPoints {
            axis,
            points: shape[axis],
        }),
        None => Ok(()),
    }
}

/// Signed flat-index offset of the node one diagonal step away.
fn diagonal_offset(diag: &Diagonal, strides: &[usize]) -> isize {
    diag.offsets()
        .iter()
        .zip(strides)
        .map(|(&o, &s)| o as isize * s as isize)
        .sum()
}

/// Flat indices of all interior nodes of `shape`, row-major.
fn interior_flat(shape: &[usize]) -> Vec<usize> {
    let st = strides(shape);
    interior_multi_indices(shape)
        .iter()
        .map(|idx| idx.iter().zip(&st).map(|(i, s)| i * s).sum())
        .collect()
}

/// True-label sensor on a value tensor of the given shape.
pub fn sensor_true(shape: &[usize], values: &[f64], cfg: &SensorConfig) -> Result<SensorField> {
    cfg.validate()?;
    let n: usize = shape.iter().product();
    if values.len() != n {
        return Err(Error::ShapeMismatch {
            expected: shape.to_vec(),
            found: vec![values.len()],
        });
    }
    require_interior(shape)?;
    let diagonals = enumerate_diagonals(shape.len())?;
    let st = strides(shape);
    let nodes = interior_flat(shape);
    let pre = cfg.true_prefactor();
    let mut per = Vec::with_capacity(diagonals.len());
    for diag in &diagonals {
        let off = diagonal_offset(diag, &st);
        let comp = nodes
            .iter()
            .map(|&c| {
                let up = values[(c as isize + off) as usize];
                let dn = values[(c as isize - off) as usize];
                let mid = values[c];
                ratio(up - 2.0 * mid + dn, up + 2.0 * mid + dn, c).map(|r| pre * r)
            })
            .collect::<Result<Vec<f64>>>()?;
        per.push(comp);
    }
    let interior: Vec<usize> = shape.iter().map(|n| n - 2).collect();
    Ok(SensorField::from_parts(interior, diagonals, per))
}

/// Signed undivided second difference `y(i + p) - 2 y(i) + y(i - p)` along one diagonal at
/// every interior node.
pub fn second_differences(shape: &[usize], values: &[f64], diag: &Diagonal) -> Result<Vec<f64>> {
    let n: usize = shape.iter().product();
    if values.len() != n {
        return Err(Error::ShapeMismatch {
            expected: shape.to_vec(),
            found: vec![values.len()],
        });
    }
    if diag.offsets().len() != shape.len() {
        return Err(Error::DimensionMismatch {
            expected: shape.len(),
            found: diag.offsets().len(),
        });
    }
    require_interior(shape)?;
    let off = diagonal_offset(diag, &strides(shape));
    Ok(interior_flat(shape)
        .into_iter()
        .map(|c| values[(c as isize + off) as usize] - 2.0 * values[c] + values[(c as isize - off) as usize])
        .collect())
}

/// True-label sensor computed once from the training values of a mesh.
pub fn sensor_true_md(mesh: &StructuredMesh, cfg: &SensorConfig) -> Result<SensorField> {
    sensor_true(mesh.shape(), mesh.values(), cfg)
}

/// Staggered sensor from predictions at training nodes (`shape`) and at cell centroids
/// (`shape - 1` per axis).
pub fn sensor_staggered_md(
    shape: &[usize],
    mesh_preds: &[f64],
    stag_preds: &[f64],
    cfg: &SensorConfig,
) -> Result<SensorField> {
    cfg.validate()?;
    let n: usize = shape.iter().product();
    if mesh_preds.len() != n {
        return Err(Error::ShapeMismatch {
            expected: shape.to_vec(),
            found: vec![mesh_preds.len()],
        });
    }
    let stag_shape: Vec<usize> = shape.iter().map(|n| n.saturating_sub(1)).collect();
    let s: usize = stag_shape.iter().product();
    if stag_preds.len() != s {
        return Err(Error::ShapeMismatch {
            expected: stag_shape,
            found: vec![stag_preds.len()],
        });
    }
    require_interior(shape)?;
    let diagonals = enumerate_diagonals(shape.len())?;
    let st = strides(shape);
    let sst = strides(&stag_shape);
    let nodes = interior_flat(shape);
    // Cell `i - 1` (all axes) of each interior node `i`, as a staggered flat index.
    let base_cells: Vec<usize> = interior_multi_indices(shape)
        .iter()
        .map(|idx| idx.iter().zip(&sst).map(|(i, s)| (i - 1) * s).sum())
        .collect();
    let pre = cfg.staggered_prefactor();
    let mut per = Vec::with_capacity(diagonals.len());
    for diag in &diagonals {
        let off = diagonal_offset(diag, &st);
        let (mut plus, mut minus) = (0usize, 0usize);
        for (&o, &s) in diag.offsets().iter().zip(&sst) {
            if o > 0 {
                plus += s;
            } else {
                minus += s;
            }
        }
        let comp = nodes
            .iter()
            .zip(&base_cells)
            .map(|(&c, &b)| {
                let far_up = mesh_preds[(c as isize + off) as usize];
                let far_dn = mesh_preds[(c as isize - off) as usize];
                let half_up = stag_preds[b + plus];
                let half_dn = stag_preds[b + minus];
                ratio(
                    far_up - half_up - half_dn + far_dn,
                    far_up + half_up + half_dn + far_dn,
                    c,
                )
                .map(|r| pre * r)
            })
            .collect::<Result<Vec<f64>>>()?;
        per.push(comp);
    }
    let interior: Vec<usize> = shape.iter().map(|n| n - 2).collect();
    Ok(SensorField::from_parts(interior, diagonals, per))
}

/// The `count` diagonals with the largest mean sensor value, ties kept in enumeration order.
pub fn select_top_diagonals(field: &SensorField, count: usize) -> Result<Vec<Diagonal>> {
    let available = field.diagonals().len();
    if count > available {
        return Err(Error::InvalidParameter(format!(
            "cannot select {count} diagonals from {available}"
        )));
    }
    let means = field.diagonal_means();
    let mut order: Vec<usize> = (0..available).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    Ok(order[..count].iter().map(|&i| field.diagonals()[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub rmse_training: f64,
    pub rmse_diffusion: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub total: f64,
}

impl LossReport {
    pub fn new(rmse_training: f64, rmse_diffusion: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            rmse_training,
            rmse_diffusion,
            beta1,
            beta2,
            total: beta1 * rmse_training + beta2 * rmse_diffusion,
        }
    }
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

/// Loss weights and sensor options shared by every evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSettings {
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default)]
    pub sensor: SensorConfig,
    /// Restrict both sensors to this many top-ranked diagonals of the true label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_diagonals: Option<usize>,
}

impl Default for LossSettings {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1.0,
            sensor: SensorConfig::default(),
            top_diagonals: None,
        }
    }
}

/// Training-value RMSE plus the RMSE between the true label and the staggered sensor of the
/// model's predictions. `true_label` must already be restricted to the diagonals in use.
pub fn diffusion_loss(
    model: &GpModel,
    mesh: &StructuredMesh,
    stag: &StaggeredMesh,
    true_label: &SensorField,
    beta1: f64,
    beta2: f64,
    cfg: &SensorConfig,
) -> Result<LossReport> {
    if !(beta1 >= 0.0 && beta2 >= 0.0) {
        return Err(Error::InvalidParameter("loss weights must be non-negative".into()));
    }
    let mesh_preds = model.predict_mean(&mesh.points())?;
    let stag_preds = model.predict_mean(stag.points())?;
    loss_from_predictions(mesh, &mesh_preds, &stag_preds, true_label, beta1, beta2, cfg)
}

pub(crate) fn loss_from_predictions(
    mesh: &StructuredMesh,
    mesh_preds: &[f64],
    stag_preds: &[f64],
    true_label: &SensorField,
    beta1: f64,
    beta2: f64,
    cfg: &SensorConfig,
) -> Result<LossReport> {
    let rmse_training = rmse(mesh.values(), mesh_preds);
    let full = sensor_staggered_md(mesh.shape(), mesh_preds, stag_preds, cfg)?;
    let test = if full.diagonals() == true_label.diagonals() {
        full
    } else {
        full.restrict(true_label.diagonals())?
    };
    let rmse_diffusion = rmse(true_label.total(), test.total());
    Ok(LossReport::new(rmse_training, rmse_diffusion, beta1, beta2))
}
