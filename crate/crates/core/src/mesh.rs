//! Structured tensor-product meshes and the cell-centroid staggered mesh built on them.
//!
//! Values are stored row-major with axis 0 varying slowest, so the flat index of
//! `(i_0, ..., i_{d-1})` is `sum_k i_k * stride_k`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major strides for `shape` (axis 0 slowest).
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Iterator over all multi-indices of `shape` in row-major order.
#[derive(Debug, Clone)]
pub struct MultiIndices {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

pub fn multi_indices(shape: &[usize]) -> MultiIndices {
    let next = if shape.iter().all(|&n| n > 0) {
        Some(vec![0; shape.len()])
    } else {
        None
    };
    MultiIndices {
        shape: shape.to_vec(),
        next,
    }
}

impl Iterator for MultiIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut k = succ.len();
        let mut advanced = false;
        while k > 0 {
            k -= 1;
            succ[k] += 1;
            if succ[k] < self.shape[k] {
                advanced = true;
                break;
            }
            succ[k] = 0;
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(current)
    }
}

/// A d-dimensional tensor-product grid carrying one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    shape: Vec<usize>,
    axis_coords: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl StructuredMesh {
    pub fn new(axis_coords: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axis_coords.is_empty() {
            return Err(Error::InvalidParameter("mesh needs at least one axis".into()));
        }
        for (axis, coords) in axis_coords.iter().enumerate() {
            if coords.is_empty() {
                return Err(Error::Structure(format!("axis {axis} has no coordinates")));
            }
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::Structure(format!("axis {axis} has non-finite coordinates")));
            }
            if coords.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Structure(format!(
                    "axis {axis} coordinates are not strictly increasing"
                )));
            }
        }
        let shape: Vec<usize> = axis_coords.iter().map(Vec::len).collect();
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::Structure(format!(
                "value count {} does not match mesh shape {shape:?} ({n} nodes)",
                values.len()
            )));
        }
        Ok(Self {
            shape,
            axis_coords,
            values,
        })
    }

    /// Mesh with integer coordinates `0..n_i` on every axis.
    pub fn unit(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let coords = shape
            .iter()
            .map(|&n| (0..n).map(|i| i as f64).collect())
            .collect();
        Self::new(coords, values)
    }

    /// Builds a unit-spaced mesh by evaluating `f` at every node.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = multi_indices(shape)
            .map(|idx| {
                let x: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
                f(&x)
            })
            .collect();
        Self::unit(shape, values)
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axis_coords(&self) -> &[Vec<f64>] {
        &self.axis_coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape)
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum()
    }

    pub fn value_at(&self, index: &[usize]) -> f64 {
        self.values[self.flat_index(index)]
    }

    pub fn point_at(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .zip(&self.axis_coords)
            .map(|(&i, c)| c[i])
            .collect()
    }

    /// All node coordinates, flattened as `n x d` in row-major node order.
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.dims());
        for idx in multi_indices(&self.shape) {
            out.extend(self.point_at(&idx));
        }
        out
    }

    /// Same grid carrying different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.axis_coords.clone(), values)
    }

    /// Reorders axes so that new axis `k` is old axis `perm[k]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dims();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        let coords: Vec<Vec<f64>> = perm.iter().map(|&p| self.axis_coords[p].clone()).collect();
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut old = vec![0; d];
        let values = multi_indices(&new_shape)
            .map(|idx| {
                for (k, &p) in perm.iter().enumerate() {
                    old[p] = idx[k];
                }
                self.value_at(&old)
            })
            .collect();
        Self::new(coords, values)
    }

    /// Multi-indices with full stencil support on every axis.
    pub fn interior_indices(&self) -> Vec<Vec<usize>> {
        interior_multi_indices(&self.shape)
    }
}

/// All multi-indices with `1 <= i_k <= n_k - 2`; empty when any axis has fewer than 3 points.
pub fn interior_multi_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    if shape.iter().any(|&n| n < 3) {
        return Vec::new();
    }
    let inner: Vec<usize> = shape.iter().map(|&n| n - 2).collect();
    multi_indices(&inner)
        .map(|idx| idx.into_iter().map(|i| i + 1).collect())
        .collect()
}

/// Reads a mesh from CSV with header `x1,...,xd,y`. Row order is irrelevant.
pub fn load_mesh_csv(path: impl AsRef<Path>) -> Result<StructuredMesh> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_mesh_csv(file)
}

pub fn read_mesh_csv(reader: impl Read) -> Result<StructuredMesh> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Structure(format!(
            "expected at least one coordinate column and a value column, found {} columns",
            headers.len()
        )));
    }
    let d = headers.len() - 1;

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = i + 2;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut parsed = Vec::with_capacity(d + 1);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: headers[col].to_string(),
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[col].to_string(),
                    message: format!("'{field}' is not finite"),
                });
            }
            parsed.push(v);
        }
        let y = parsed.pop().expect("at least two fields");
        rows.push((parsed, y));
    }
    if rows.is_empty() {
        return Err(Error::Structure("dataset has no rows".into()));
    }

    let axis_coords: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut c: Vec<f64> = rows.iter().map(|(x, _)| x[k]).collect();
            c.sort_by(f64::total_cmp);
            c.dedup();
            c
        })
        .collect();
    let shape: Vec<usize> = axis_coords.iter().map(Vec::len).collect();
    let st = strides(&shape);
    let n: usize = shape.iter().product();

    let mut values = vec![f64::NAN; n];
    let mut filled = vec![false; n];
    for (x, y) in &rows {
        let mut flat = 0;
        let mut index = Vec::with_capacity(d);
        for k in 0..d {
            let i = axis_coords[k]
                .binary_search_by(|c| c.total_cmp(&x[k]))
                .expect("coordinate taken from the same rows");
            index.push(i);
            flat += i * st[k];
        }
        if std::mem::replace(&mut filled[flat], true) {
            return Err(Error::Structure(format!("duplicate grid point at {index:?}")));
        }
        values[flat] = *y;
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        let index: Vec<usize> = shape
            .iter()
            .zip(&st)
            .map(|(&n, &s)| (missing / s) % n)
            .collect();
        return Err(Error::Structure(format!("missing grid point {index:?}")));
    }
    StructuredMesh::new(axis_coords, values)
}

pub fn write_mesh_csv(mesh: &StructuredMesh, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=mesh.dims()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (flat, idx) in multi_indices(mesh.shape()).enumerate() {
        let mut rec: Vec<String> = mesh.point_at(&idx).iter().map(|c| format!("{c}")).collect();
        rec.push(format!("{}", mesh.values()[flat]));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Maps one axis between raw coordinates and node indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMap {
    /// Affine fit through the end points: `index = (raw - shift) * scale`.
    pub scale: f64,
    pub shift: f64,
    /// Raw node coordinates; the map is piecewise linear through them.
    pub raw: Vec<f64>,
}

impl AxisMap {
    fn new(raw: &[f64]) -> Self {
        let n = raw.len();
        let span = raw[n - 1] - raw[0];
        let scale = if n > 1 { (n - 1) as f64 / span } else { 1.0 };
        Self {
            scale,
            shift: raw[0],
            raw: raw.to_vec(),
        }
    }

    pub fn to_raw(&self, index: f64) -> f64 {
        let n = self.raw.len();
        if n == 1 {
            return self.raw[0] + index / self.scale;
        }
        let seg = (index.floor().max(0.0) as usize).min(n - 2);
        let t = index - seg as f64;
        self.raw[seg] + t * (self.raw[seg + 1] - self.raw[seg])
    }

    pub fn to_index(&self, raw: f64) -> f64 {
        let n = self.raw.len();
        if n == 1 {
            return (raw - self.shift) * self.scale;
        }
        let seg = match self.raw.binary_search_by(|c| c.total_cmp(&raw)) {
            Ok(i) => return i as f64,
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        seg as f64 + (raw - self.raw[seg]) / (self.raw[seg + 1] - self.raw[seg])
    }
}

/// How raw data was mapped onto the unit-spaced, positive-valued training mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub axes: Vec<AxisMap>,
    /// `normalized = (raw - value_min) * value_scale + value_floor`.
    pub value_min: f64,
    pub value_scale: f64,
    pub value_floor: f64,
    /// Raw values were constant; every normalized value sits mid-range.
    pub degenerate: bool,
}

impl NormalizationRecord {
    pub fn normalize_value(&self, raw: f64) -> f64 {
        if self.degenerate {
            self.value_floor + (1.0 - self.value_floor) / 2.0
        } else {
            (raw - self.value_min) * self.value_scale + self.value_floor
        }
    }

    pub fn denormalize_value(&self, v: f64) -> f64 {
        if self.degenerate {
            self.value_min
        } else {
            (v - self.value_floor) / self.value_scale + self.value_min
        }
    }

    pub fn denormalize_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.axes).map(|(&c, a)| a.to_raw(c)).collect()
    }

    pub fn normalize_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.axes).map(|(&c, a)| a.to_index(c)).collect()
    }

    /// Reverses [`normalize_mesh`].
    pub fn denormalize_mesh(&self, mesh: &StructuredMesh) -> Result<StructuredMesh> {
        let coords = self.axes.iter().map(|a| a.raw.clone()).collect();
        let values = mesh.values().iter().map(|&v| self.denormalize_value(v)).collect();
        StructuredMesh::new(coords, values)
    }
}

pub const DEFAULT_VALUE_FLOOR: f64 = 0.05;

/// Maps coordinates to node indices and values affinely onto `[value_floor, 1]`.
pub fn normalize_mesh(
    mesh: &StructuredMesh,
    value_floor: f64,
) -> Result<(StructuredMesh, NormalizationRecord)> {
    if !(value_floor > 0.0 && value_floor < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "value_floor must lie in (0, 1), got {value_floor}"
        )));
    }
    let axes: Vec<AxisMap> = mesh.axis_coords().iter().map(|c| AxisMap::new(c)).collect();
    let (lo, hi) = mesh
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let degenerate = hi <= lo;
    let record = NormalizationRecord {
        axes,
        value_min: lo,
        value_scale: if degenerate { 1.0 } else { (1.0 - value_floor) / (hi - lo) },
        value_floor,
        degenerate,
    };
    if degenerate {
        log::warn!("constant-valued mesh; diffusion sensors will be identically zero");
    }
    let values = mesh
        .values()
        .iter()
        .map(|&v| record.normalize_value(v).min(1.0))
        .collect();
    let normalized = StructuredMesh::unit(mesh.shape(), values)?;
    Ok((normalized, record))
}

/// Cell-centroid points of a structured mesh, indexed by half indices.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredMesh {
    shape: Vec<usize>,
    dims: usize,
    points: Vec<f64>,
    predictions: Option<Vec<f64>>,
}

impl StaggeredMesh {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Centroids flattened as `s x d`, row-major over cell indices.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, cell: usize) -> &[f64] {
        &self.points[cell * self.dims..(cell + 1) * self.dims]
    }

    pub fn predictions(&self) -> Option<&[f64]> {
        self.predictions.as_deref()
    }

    pub fn with_predictions(mut self, predictions: Vec<f64>) -> Result<Self> {
        if predictions.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.len()],
                found: vec![predictions.len()],
            });
        }
        self.predictions = Some(predictions);
        Ok(self)
    }
}

/// Builds the staggered mesh whose points are the means of each cell's `2^d` corners.
pub fn build_staggered_mesh(mesh: &StructuredMesh) -> Result<StaggeredMesh> {
    let d = mesh.dims();
    if let Some(axis) = mesh.shape().iter().position(|&n| n < 2) {
        return Err(Error::NoCells {
            axis,
            points: mesh.shape()[axis],
        });
    }
    let shape: Vec<usize> = mesh.shape().iter().map(|n| n - 1).collect();
    let coords = mesh.axis_coords();
    let mut points = Vec::with_capacity(shape.iter().product::<usize>() * d);
    // Along each axis half of the 2^d corners sit at either end of the cell, so the corner
    // mean is the midpoint; evaluating it that way keeps it independent of axis order.
    for cell in multi_indices(&shape) {
        points.extend((0..d).map(|k| 0.5 * (coords[k][cell[k]] + coords[k][cell[k] + 1])));
    }
    Ok(StaggeredMesh {
        shape,
        dims: d,
        points,
        predictions: None,
    })
}

/// A centre-crossing diagonal: a direction through a node towards two antipodal cell corners.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagonal {
    offsets: Vec<i8>,
}

impl Diagonal {
    pub fn new(offsets: Vec<i8>) -> Result<Self> {
        if offsets.first() != Some(&1) || offsets.iter().any(|&o| o != 1 && o != -1) {
            return Err(Error::InvalidParameter(format!(
                "diagonal offsets must be +/-1 with a leading +1, got {offsets:?}"
            )));
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[i8] {
        &self.offsets
    }

    /// Compact label such as `+-+`.
    pub fn label(&self) -> String {
        self.offsets
            .iter()
            .map(|&o| if o > 0 { '+' } else { '-' })
            .collect()
    }
}

impl std::fmt::Display for Diagonal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// All `2^(d-1)` centre-crossing diagonals, ordered lexicographically with `+1` before `-1`.
pub fn enumerate_diagonals(d: usize) -> Result<Vec<Diagonal>> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if d > 31 {
        return Err(Error::InvalidParameter(format!("dimension {d} is too large")));
    }
    Ok((0..1usize << (d - 1))
        .map(|mask| {
            let offsets = (0..d)
                .map(|k| {
                    if k > 0 && (mask >> (d - 1 - k)) & 1 == 1 {
                        -1
                    } else {
                        1
                    }
                })
                .collect();
            Diagonal { offsets }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_mesh(text: &str) -> Result<StructuredMesh> {
        read_mesh_csv(text.as_bytes())
    }

    #[test]
    fn loads_small_grid_in_any_row_order() {
        let mesh = csv_mesh("x1,x2,y\n1,1,3\n0,0,1\n1,0,2\n0,1,2\n").unwrap();
        assert_eq!(mesh.shape(), &[2, 2]);
        assert_eq!(mesh.values(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(mesh.value_at(&[1, 0]), 2.0);
    }

    #[test]
    fn missing_point_is_named() {
        let err = csv_mesh("x1,x2,y\n0,0,1\n0,1,2\n1,1,3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing grid point"), "{msg}");
        assert!(msg.contains("[1, 0]"), "{msg}");
    }

    #[test]
    fn duplicate_point_rejected() {
        let err = csv_mesh("x1,y\n0,1\n1,2\n1,3\n").unwrap_err();
        assert!(err.to_string().contains("duplicate grid point"));
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let err = csv_mesh("x1,y\n0,1\n1,abc\n").unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_write_read_roundtrip() {
        let mesh = StructuredMesh::new(vec![vec![0.0, 0.25, 1.0], vec![-1.0, 2.5]], vec![
            0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_mesh_csv(&mesh, &mut buf).unwrap();
        assert_eq!(read_mesh_csv(buf.as_slice()).unwrap(), mesh);
    }

    #[test]
    fn normalization_maps_coords_to_indices() {
        let mesh = StructuredMesh::new(vec![vec![0.0, 0.5, 1.0]], vec![0.0, 0.5, 1.0]).unwrap();
        let (norm, rec) = normalize_mesh(&mesh, 0.05).unwrap();
        assert_eq!(norm.axis_coords()[0], vec![0.0, 1.0, 2.0]);
        let expected = [0.05, 0.525, 1.0];
        for (v, e) in norm.values().iter().zip(expected) {
            assert!((v - e).abs() < 1e-15, "{v} vs {e}");
        }
        assert!(!rec.degenerate);
    }

    #[test]
    fn unit_interval_values_still_shifted_positive() {
        let mesh = StructuredMesh::unit(&[4], vec![0.0, 0.2, 0.9, 1.0]).unwrap();
        let (norm, _) = normalize_mesh(&mesh, 0.05).unwrap();
        assert!(norm.values().iter().all(|&v| v > 0.0));
        assert_eq!(norm.values()[0], 0.05);
    }

    #[test]
    fn constant_field_is_flagged() {
        let mesh = StructuredMesh::unit(&[3], vec![2.0; 3]).unwrap();
        let (norm, rec) = normalize_mesh(&mesh, 0.05).unwrap();
        assert!(rec.degenerate);
        assert!(norm.values().iter().all(|&v| v == 0.525));
        assert_eq!(rec.denormalize_value(0.525), 2.0);
    }

    #[test]
    fn nonuniform_axis_roundtrips_through_record() {
        let mesh = StructuredMesh::new(vec![vec![1.0, 1.5, 4.0, 10.0]], vec![3.0, -1.0, 7.5, 2.0])
            .unwrap();
        let (norm, rec) = normalize_mesh(&mesh, 0.05).unwrap();
        let back = rec.denormalize_mesh(&norm).unwrap();
        for (a, b) in back.values().iter().zip(mesh.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert_eq!(rec.normalize_point(&[4.0]), vec![2.0]);
        assert!((rec.denormalize_point(&[2.5])[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn staggered_unit_cube_centroid() {
        let mesh = StructuredMesh::unit(&[2, 2, 2], vec![1.0; 8]).unwrap();
        let stag = build_staggered_mesh(&mesh).unwrap();
        assert_eq!(stag.shape(), &[1, 1, 1]);
        assert_eq!(stag.points(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn staggered_1d_midpoints() {
        let mesh = StructuredMesh::unit(&[3], vec![1.0; 3]).unwrap();
        let stag = build_staggered_mesh(&mesh).unwrap();
        assert_eq!(stag.points(), &[0.5, 1.5]);
    }

    #[test]
    fn staggered_requires_two_points_per_axis() {
        let mesh = StructuredMesh::unit(&[3, 1], vec![1.0; 3]).unwrap();
        let err = build_staggered_mesh(&mesh).unwrap_err();
        assert!(matches!(err, Error::NoCells { axis: 1, points: 1 }));
        assert!(err.to_string().contains("no cells along axis"));
    }

    #[test]
    fn staggered_study_scale_mesh() {
        let mesh = StructuredMesh::unit(&[19, 15, 5], vec![1.0; 1425]).unwrap();
        let stag = build_staggered_mesh(&mesh).unwrap();
        assert_eq!(stag.shape(), &[18, 14, 4]);
        assert_eq!(stag.len(), 1008);
        assert!(stag.points().iter().all(|c| c.fract() == 0.5));
    }

    #[test]
    fn diagonals_small_dims() {
        let lab = |d| {
            enumerate_diagonals(d)
                .unwrap()
                .iter()
                .map(Diagonal::label)
                .collect::<Vec<_>>()
        };
        assert_eq!(lab(1), ["+"]);
        assert_eq!(lab(2), ["++", "+-"]);
        assert_eq!(lab(3), ["+++", "++-", "+-+", "+--"]);
        assert!(enumerate_diagonals(0).is_err());
    }

    #[test]
    fn interior_counts() {
        assert_eq!(interior_multi_indices(&[19, 15, 5]).len(), 17 * 13 * 3);
        assert_eq!(interior_multi_indices(&[3, 3]), vec![vec![1, 1]]);
        assert!(interior_multi_indices(&[2, 5]).is_empty());
    }

    #[test]
    fn multi_indices_row_major() {
        let all: Vec<_> = multi_indices(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        assert_eq!(strides(&[2, 3, 4]), vec![12, 4, 1]);
    }
}
