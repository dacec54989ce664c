use diffloss::kernels::KernelSpec;
use diffloss::mesh::{build_staggered_mesh, enumerate_diagonals, normalize_mesh, StructuredMesh};
use proptest::prelude::*;

fn increasing(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.1f64..3.0, n), -5.0f64..5.0).prop_map(|(steps, start)| {
        let mut acc = start;
        steps
            .into_iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect()
    })
}

fn mesh_strategy() -> impl Strategy<Value = StructuredMesh> {
    prop::collection::vec(2usize..=5, 1..=3)
        .prop_flat_map(|shape| {
            let n: usize = shape.iter().product();
            let coords: Vec<_> = shape.iter().map(|&k| increasing(k)).collect();
            (coords, prop::collection::vec(-50.0f64..50.0, n))
        })
        .prop_map(|(coords, values)| StructuredMesh::new(coords, values).unwrap())
}

fn points(d: usize, n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d * n)
}

proptest! {
    #[test]
    fn staggered_mesh_commutes_with_axis_permutation(mesh in mesh_strategy(), seed in 0usize..6) {
        let d = mesh.dims();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.rotate_left(seed % d);
        if seed % 2 == 1 {
            perm.reverse();
        }
        let direct = build_staggered_mesh(&mesh.permute_axes(&perm).unwrap()).unwrap();
        let original = build_staggered_mesh(&mesh).unwrap();
        // relabel the original centroids through the same permutation
        let pm = mesh.permute_axes(&perm).unwrap();
        let shape = pm.shape().iter().map(|n| n - 1).collect::<Vec<_>>();
        prop_assert_eq!(direct.shape(), &shape[..]);
        let oshape: Vec<usize> = mesh.shape().iter().map(|n| n - 1).collect();
        for cell in 0..direct.len() {
            // multi-index in the permuted staggered mesh
            let mut rem = cell;
            let mut idx = vec![0; d];
            for a in (0..d).rev() {
                idx[a] = rem % shape[a];
                rem /= shape[a];
            }
            let mut oidx = vec![0; d];
            for (a, &p) in perm.iter().enumerate() {
                oidx[p] = idx[a];
            }
            let oflat = oidx.iter().zip(&oshape).fold(0, |f, (i, n)| f * n + i);
            let want: Vec<f64> = perm.iter().map(|&p| original.point(oflat)[p]).collect();
            prop_assert_eq!(direct.point(cell), &want[..]);
        }
    }

    #[test]
    fn normalization_round_trips(mesh in mesh_strategy(), floor in 0.01f64..0.5) {
        let (norm, record) = normalize_mesh(&mesh, floor).unwrap();
        prop_assert!(norm.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        for c in norm.axis_coords() {
            prop_assert!(c.windows(2).all(|w| (w[1] - w[0] - 1.0).abs() <= 1e-12));
        }
        let back = record.denormalize_mesh(&norm).unwrap();
        let scale = mesh.values().iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (a, b) in back.values().iter().zip(mesh.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
        prop_assert_eq!(back.axis_coords(), mesh.axis_coords());
    }

    #[test]
    fn kernels_are_symmetric(x in points(3, 1), y in points(3, 1), l in prop::collection::vec(0.1f64..5.0, 3), a in 0.01f64..100.0) {
        for spec in [KernelSpec::se(0.7, l.clone()).unwrap(), KernelSpec::rq(0.7, l.clone(), a).unwrap()] {
            prop_assert_eq!(spec.eval(&x, &y), spec.eval(&y, &x));
            prop_assert!(spec.eval(&x, &y) <= spec.eval(&x, &x));
        }
    }

    #[test]
    fn kernels_decrease_with_distance(r1 in 0.0f64..4.0, dr in 0.001f64..4.0, l in 0.2f64..3.0, a in 0.01f64..100.0) {
        for spec in [KernelSpec::se(0.15, vec![l]).unwrap(), KernelSpec::rq(0.15, vec![l], a).unwrap()] {
            prop_assert!(spec.eval(&[0.0], &[r1 + dr]) <= spec.eval(&[0.0], &[r1]));
        }
    }

    #[test]
    fn large_alpha_approaches_se(x in points(2, 1), y in points(2, 1), l in prop::collection::vec(0.3f64..3.0, 2)) {
        let sigma = 0.15;
        let se = KernelSpec::se(sigma, l.clone()).unwrap();
        let rq = KernelSpec::rq(sigma, l, 1e6).unwrap();
        prop_assert!((se.eval(&x, &y) - rq.eval(&x, &y)).abs() <= 1e-4 * sigma * sigma);
    }
}

#[test]
fn diagonal_sets_have_expected_size_and_no_antipodes() {
    for d in 1..=8 {
        let diags = enumerate_diagonals(d).unwrap();
        assert_eq!(diags.len(), 1 << (d - 1));
        for (i, a) in diags.iter().enumerate() {
            assert_eq!(a.offsets()[0], 1);
            for b in &diags[i + 1..] {
                assert_ne!(a, b);
                let neg: Vec<i8> = b.offsets().iter().map(|v| -v).collect();
                assert_ne!(a.offsets(), &neg[..]);
            }
        }
    }
}
