//! Independent loop implementations used as oracles. Nothing here calls into the library's
//! sensor code; indices are handled as explicit multi-indices.

#![allow(dead_code)]

use rand::Rng;

pub fn flat(shape: &[usize], idx: &[usize]) -> usize {
    let mut f = 0;
    for (n, i) in shape.iter().zip(idx) {
        f = f * n + i;
    }
    f
}

/// All sign patterns with a leading `+1`, in the order `+..+` first, last axis fastest.
pub fn sign_patterns(d: usize) -> Vec<Vec<i64>> {
    (0..1usize << (d - 1))
        .map(|k| {
            (0..d)
                .map(|j| if j == 0 || (k >> (d - 1 - j)) & 1 == 0 { 1 } else { -1 })
                .collect()
        })
        .collect()
}

/// Interior multi-indices in row-major order.
pub fn interior(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in shape {
        let mut next = Vec::new();
        for prefix in &out {
            for i in 1..n - 1 {
                let mut p = prefix.clone();
                p.push(i);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn shift(idx: &[usize], p: &[i64], sign: i64) -> Vec<usize> {
    idx.iter().zip(p).map(|(&i, &o)| (i as i64 + sign * o) as usize).collect()
}

/// Per-diagonal true-label sensor values at every interior node.
pub fn naive_true(shape: &[usize], values: &[f64], spacing: f64) -> Vec<Vec<f64>> {
    sign_patterns(shape.len())
        .iter()
        .map(|p| {
            interior(shape)
                .iter()
                .map(|idx| {
                    let up = values[flat(shape, &shift(idx, p, 1))];
                    let dn = values[flat(shape, &shift(idx, p, -1))];
                    let mid = values[flat(shape, idx)];
                    (up - 2.0 * mid + dn).abs() / (up + 2.0 * mid + dn) / (spacing * spacing)
                })
                .collect()
        })
        .collect()
}

/// Per-diagonal staggered sensor values. The half-step neighbour toward `+p` is the cell whose
/// lower corner is `min(i, i + p)` per axis, and likewise toward `-p`.
pub fn naive_staggered(shape: &[usize], preds: &[f64], stag: &[f64], spacing: f64) -> Vec<Vec<f64>> {
    let sshape: Vec<usize> = shape.iter().map(|n| n - 1).collect();
    let h = spacing / 2.0;
    sign_patterns(shape.len())
        .iter()
        .map(|p| {
            interior(shape)
                .iter()
                .map(|idx| {
                    let up = preds[flat(shape, &shift(idx, p, 1))];
                    let dn = preds[flat(shape, &shift(idx, p, -1))];
                    let cell_up: Vec<usize> =
                        idx.iter().zip(p).map(|(&i, &o)| if o > 0 { i } else { i - 1 }).collect();
                    let cell_dn: Vec<usize> =
                        idx.iter().zip(p).map(|(&i, &o)| if o > 0 { i - 1 } else { i }).collect();
                    let hu = stag[flat(&sshape, &cell_up)];
                    let hd = stag[flat(&sshape, &cell_dn)];
                    (up - hu - hd + dn).abs() / (up + hu + hd + dn) / (3.0 * h * h)
                })
                .collect()
        })
        .collect()
}

pub fn random_positive(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.05..1.0)).collect()
}

pub fn random_shape(rng: &mut impl Rng, d: usize) -> Vec<usize> {
    (0..d).map(|_| rng.random_range(3..=6)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Values of `c + g . x` on a unit mesh of `shape`, row-major.
pub fn affine_values(shape: &[usize], c: f64, g: &[f64]) -> Vec<f64> {
    let mut out = vec![c];
    for (a, &n) in shape.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * n);
        for &v in &out {
            for i in 0..n {
                next.push(v + g[a] * i as f64);
            }
        }
        out = next;
    }
    out
}

/// Affine values at cell centroids of a unit mesh.
pub fn affine_centroids(shape: &[usize], c: f64, g: &[f64]) -> Vec<f64> {
    let sshape: Vec<usize> = shape.iter().map(|n| n - 1).collect();
    let shifted = c + g.iter().sum::<f64>() * 0.5;
    affine_values(&sshape, shifted, g)
}
