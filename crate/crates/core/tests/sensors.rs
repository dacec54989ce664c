mod common;

use common::*;
use diffloss::diffusion::{second_differences, sensor_staggered_md, sensor_true, SensorConfig, SensorField};
use diffloss::mesh::{enumerate_diagonals, Diagonal};
use proptest::prelude::*;

fn component(field: &SensorField, pattern: &[i64]) -> Vec<f64> {
    let diag = Diagonal::new(pattern.iter().map(|&v| v as i8).collect()).unwrap();
    field.component(&diag).unwrap().to_vec()
}

fn shape_and_values(dmin: usize, dmax: usize) -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>)> {
    prop::collection::vec(3usize..=5, dmin..=dmax).prop_flat_map(|shape| {
        let n: usize = shape.iter().product();
        let s: usize = shape.iter().map(|k| k - 1).product();
        (
            Just(shape),
            prop::collection::vec(0.05f64..1.0, n),
            prop::collection::vec(0.05f64..1.0, s),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn true_sensor_matches_loops((shape, values, _) in shape_and_values(1, 3), spacing in 0.5f64..2.0) {
        let cfg = SensorConfig { spacing, ..SensorConfig::default() };
        let field = sensor_true(&shape, &values, &cfg).unwrap();
        for (p, oracle) in sign_patterns(shape.len()).iter().zip(naive_true(&shape, &values, spacing)) {
            prop_assert!(max_abs_diff(&component(&field, p), &oracle) <= 1e-14);
        }
    }

    #[test]
    fn staggered_sensor_matches_loops((shape, preds, stag) in shape_and_values(1, 3)) {
        let field = sensor_staggered_md(&shape, &preds, &stag, &SensorConfig::default()).unwrap();
        for (p, oracle) in sign_patterns(shape.len()).iter().zip(naive_staggered(&shape, &preds, &stag, 1.0)) {
            prop_assert!(max_abs_diff(&component(&field, p), &oracle) <= 1e-14);
        }
    }

    #[test]
    fn positive_scaling_leaves_sensors_unchanged((shape, preds, stag) in shape_and_values(2, 3), c in 0.1f64..10.0) {
        let cfg = SensorConfig::default();
        let base = sensor_true(&shape, &preds, &cfg).unwrap();
        let scaled: Vec<f64> = preds.iter().map(|v| v * c).collect();
        let again = sensor_true(&shape, &scaled, &cfg).unwrap();
        prop_assert!(max_abs_diff(base.total(), again.total()) <= 1e-13);
        let sb = sensor_staggered_md(&shape, &preds, &stag, &cfg).unwrap();
        let ss: Vec<f64> = stag.iter().map(|v| v * c).collect();
        let sa = sensor_staggered_md(&shape, &scaled, &ss, &cfg).unwrap();
        prop_assert!(max_abs_diff(sb.total(), sa.total()) <= 1e-13);
    }

    #[test]
    fn affine_fields_vanish(
        shape in prop::collection::vec(3usize..=6, 1..=3),
        g in prop::collection::vec(-0.05f64..0.05, 3),
    ) {
        let d = shape.len();
        let g = &g[..d];
        let values = affine_values(&shape, 1.0, g);
        let cfg = SensorConfig::default();
        let t = sensor_true(&shape, &values, &cfg).unwrap();
        prop_assert!(t.total().iter().all(|v| v.abs() <= 1e-12));
        let s = sensor_staggered_md(&shape, &values, &affine_centroids(&shape, 1.0, g), &cfg).unwrap();
        prop_assert!(s.total().iter().all(|v| v.abs() <= 1e-12));
    }
}

/// Reverses axis `axis` of a row-major tensor.
fn reverse_axis(shape: &[usize], values: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    for o in 0..outer {
        for i in 0..n {
            for k in 0..inner {
                out[(o * n + (n - 1 - i)) * inner + k] = values[(o * n + i) * inner + k];
            }
        }
    }
    out
}

#[test]
fn axis_reversal_mirrors_the_total() {
    let shape = [5, 4, 6];
    let values: Vec<f64> = (0..120).map(|i| 0.2 + ((i * 37) % 17) as f64 / 20.0).collect();
    let cfg = SensorConfig::default();
    for axis in 0..3 {
        let a = sensor_true(&shape, &values, &cfg).unwrap();
        let b = sensor_true(&shape, &reverse_axis(&shape, &values, axis), &cfg).unwrap();
        let inner: Vec<usize> = shape.iter().map(|n| n - 2).collect();
        let mirrored = reverse_axis(&inner, b.total(), axis);
        assert!(max_abs_diff(a.total(), &mirrored) <= 1e-14, "axis {axis}");
    }
}

#[test]
fn diagonal_second_differences_double_the_axis_sum_in_2d() {
    // for y = a x^2 + b x z + c z^2 the two diagonals give 2a + 2c +/- 2b, summing to 2(2a + 2c)
    for &(a, b, c) in &[(1.0, 0.0, 2.0), (0.3, 0.7, -0.4), (-1.5, 2.0, 0.25)] {
        let shape = [6usize, 5];
        let y = |i: f64, j: f64| 1.0 + a * i * i + b * i * j + c * j * j;
        let values: Vec<f64> = (0..30).map(|k| y((k / 5) as f64, (k % 5) as f64)).collect();
        let per: Vec<Vec<f64>> = enumerate_diagonals(2)
            .unwrap()
            .iter()
            .map(|g| second_differences(&shape, &values, g).unwrap())
            .collect();
        for (k, idx) in interior(&shape).iter().enumerate() {
            let (fi, fj) = (idx[0] as f64, idx[1] as f64);
            let axes = (y(fi + 1.0, fj) - 2.0 * y(fi, fj) + y(fi - 1.0, fj))
                + (y(fi, fj + 1.0) - 2.0 * y(fi, fj) + y(fi, fj - 1.0));
            let diag = per[0][k] + per[1][k];
            assert!((diag - 2.0 * axes).abs() <= 1e-12, "{diag} vs {axes} at {idx:?}");
        }
    }
}

#[test]
fn diagonal_enumeration_matches_oracle_order() {
    for d in 1..=6 {
        let got: Vec<Vec<i64>> = enumerate_diagonals(d)
            .unwrap()
            .iter()
            .map(|g| g.offsets().iter().map(|&v| v as i64).collect())
            .collect();
        assert_eq!(got, sign_patterns(d));
    }
}
