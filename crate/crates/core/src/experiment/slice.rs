use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::GpModel;
use crate::mesh::StructuredMesh;

/// Dense one-axis sweep of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceTable {
    pub free_axis: usize,
    /// Coordinates of every axis held fixed, by axis.
    pub fixed: BTreeMap<usize, f64>,
    pub coords: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Training value where a row coincides with a mesh node.
    pub training: Vec<Option<f64>>,
}

impl SliceTable {
    /// Number of sign changes between consecutive discrete second differences of the mean.
    /// Exact zeros are skipped.
    pub fn sign_alternations(&self) -> usize {
        sign_alternations(&self.mean)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([format!("x{}", self.free_axis + 1), "mean".into(), "variance".into(), "training".into()])?;
        for i in 0..self.coords.len() {
            w.write_record([
                format!("{:e}", self.coords[i]),
                format!("{:e}", self.mean[i]),
                format!("{:e}", self.variance[i]),
                self.training[i].map(|v| format!("{v:e}")).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<slice csv>", e))?;
        Ok(())
    }
}

pub fn sign_alternations(values: &[f64]) -> usize {
    let signs: Vec<f64> = values
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|p| p[0] != p[1]).count()
}

/// Sweeps the single axis not listed in `fixed`, taking `dense_factor` points per cell.
/// Coordinates are those of `mesh`, which must be the mesh the model was trained on.
pub fn slice_predictions(
    model: &GpModel,
    mesh: &StructuredMesh,
    fixed: &BTreeMap<usize, f64>,
    dense_factor: usize,
) -> Result<SliceTable> {
    let d = mesh.dims();
    if dense_factor == 0 {
        return Err(Error::InvalidParameter("dense_factor must be at least 1".into()));
    }
    if let Some(&axis) = fixed.keys().find(|&&a| a >= d) {
        return Err(Error::InvalidParameter(format!("fixed axis {axis} out of range for {d} dimensions")));
    }
    let free: Vec<usize> = (0..d).filter(|a| !fixed.contains_key(a)).collect();
    if free.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "slice must leave exactly one free axis, found {}",
            free.len()
        )));
    }
    let free_axis = free[0];
    let coords = mesh.axis_coords();
    for (&axis, &v) in fixed {
        let c = &coords[axis];
        if !(v >= c[0] && v <= c[c.len() - 1]) {
            return Err(Error::InvalidParameter(format!(
                "fixed coordinate {v} outside [{}, {}] on axis {axis}",
                c[0],
                c[c.len() - 1]
            )));
        }
    }

    let line = &coords[free_axis];
    let mut sweep = Vec::with_capacity((line.len() - 1) * dense_factor + 1);
    for w in line.windows(2) {
        for k in 0..dense_factor {
            sweep.push(w[0] + (w[1] - w[0]) * k as f64 / dense_factor as f64);
        }
    }
    sweep.push(line[line.len() - 1]);

    let mut query = Vec::with_capacity(sweep.len() * d);
    for &x in &sweep {
        for a in 0..d {
            query.push(if a == free_axis { x } else { fixed[&a] });
        }
    }
    let mean = model.predict_mean(&query)?;
    let variance = model.predict_var(&query)?.values;

    // training values exist on the line only when every fixed coordinate is a node
    let node_of = |axis: usize, v: f64| coords[axis].iter().position(|&c| c == v);
    let fixed_nodes: Option<Vec<(usize, usize)>> =
        fixed.iter().map(|(&a, &v)| node_of(a, v).map(|i| (a, i))).collect();
    let training = sweep
        .iter()
        .map(|&x| {
            let nodes = fixed_nodes.as_ref()?;
            let j = node_of(free_axis, x)?;
            let mut idx = vec![0; d];
            idx[free_axis] = j;
            for &(a, i) in nodes {
                idx[a] = i;
            }
            Some(mesh.value_at(&idx))
        })
        .collect();

    Ok(SliceTable {
        free_axis,
        fixed: fixed.clone(),
        coords: sweep,
        mean,
        variance,
        training,
    })
}
