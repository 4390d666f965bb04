mod support;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use splr::linalg;
use splr::space::SpaceTag;
use splr::{MeasurementOp, ProblemSpec};
use support::*;

#[test]
fn identity_measurement_is_the_trace() {
    let op = MeasurementOp::general(&[DMatrix::<f64>::identity(2, 2)], false).unwrap();
    let u = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
    assert_eq!(op.apply(&u).unwrap(), DVector::from_vec(vec![7.0]));
}

#[test]
fn rank_one_unit_vector_reads_the_corner() {
    let op = MeasurementOp::rank_one(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])).unwrap();
    let u = DMatrix::from_row_slice(3, 3, &[2.5, 1.0, -1.0, 1.0, 7.0, 0.0, -1.0, 0.0, 3.0]);
    assert_eq!(op.apply(&u).unwrap()[0], 2.5);
}

#[test]
fn apply_matches_double_loop() {
    let mut rng = rng(11);
    let mats: Vec<DMatrix<f64>> = (0..5).map(|_| matrix(&mut rng, 3, 3)).collect();
    let op = MeasurementOp::general(&mats, false).unwrap();
    let u = matrix::<f64>(&mut rng, 3, 3);
    let diff = (op.apply(&u).unwrap() - apply_by_loops(&mats, &u)).norm();
    assert!(diff <= 1e-12, "{diff}");

    let cm: Vec<DMatrix<Complex64>> = (0..5).map(|_| hermitian(&mut rng, 3)).collect();
    let op = MeasurementOp::general(&cm, true).unwrap();
    let u = hermitian::<Complex64>(&mut rng, 3);
    let diff = (op.apply(&u).unwrap() - apply_by_loops(&cm, &u)).norm();
    assert!(diff <= 1e-12, "{diff}");
}

#[test]
fn rank_one_stack_matches_explicit_matrices() {
    let mut rng = rng(12);
    let f = matrix::<Complex64>(&mut rng, 7, 4);
    let op = MeasurementOp::rank_one(f.clone()).unwrap();
    let mats: Vec<DMatrix<Complex64>> = (0..7)
        .map(|i| {
            let a = f.row(i).transpose();
            &a * a.adjoint()
        })
        .collect();
    let u = hermitian::<Complex64>(&mut rng, 4);
    let diff = (op.apply(&u).unwrap() - apply_by_loops(&mats, &u)).norm();
    assert!(diff <= 1e-10, "{diff}");
}

#[test]
fn adjoint_trivial_cases() {
    let mut rng = rng(13);
    let a = matrix::<f64>(&mut rng, 2, 3);
    let op = MeasurementOp::general(std::slice::from_ref(&a), false).unwrap();
    assert_eq!(op.adjoint(&DVector::zeros(1)).unwrap(), DMatrix::zeros(2, 3));
    let two = op.adjoint(&DVector::from_vec(vec![2.0])).unwrap();
    assert!((two - &a * 2.0).norm() <= 1e-15);
}

#[test]
fn scaling_normalizes_measurements() {
    let op = MeasurementOp::general(&[DMatrix::<f64>::identity(2, 2) * 2.0], false).unwrap();
    let spec = ProblemSpec::new(SpaceTag::NonnegRect, op, DVector::from_vec(vec![4.0]), 1, 1, 1.0).unwrap();
    let scaled = spec.scale_problem().unwrap();
    let a = scaled.op.matrix(0);
    assert!((a[(0, 0)] - 1.0 / 2f64.sqrt()).abs() <= 1e-15 && a[(0, 1)] == 0.0);
    assert!((scaled.b[0] - 2f64.sqrt()).abs() <= 1e-15);

    let again = scaled.scale_problem().unwrap();
    assert!((again.op.matrix(0) - scaled.op.matrix(0)).norm() <= 1e-15);
    assert!((again.b[0] - scaled.b[0]).abs() <= 1e-15);
}

#[test]
fn scaling_keeps_the_feasible_argmin_of_consistent_systems() {
    let mut rng = rng(14);
    let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
    for _ in 0..5 {
        let mats: Vec<DMatrix<f64>> = (0..4).map(|_| matrix::<f64>(&mut rng, 2, 2) * rng.random_range(0.1..5.0)).collect();
        let op = MeasurementOp::general(&mats, false).unwrap();
        let truth = DMatrix::from_row_slice(2, 2, &[grid[rng.random_range(1..9)], 0.0, grid[rng.random_range(1..9)], 0.0]);
        let b = op.apply(&truth).unwrap();
        let spec = ProblemSpec::new(SpaceTag::NonnegRect, op, b, 1, 2, 10.0).unwrap();
        let scaled = spec.scale_problem().unwrap();
        let argmin = |p: &ProblemSpec<f64>| {
            let mut best = (f64::INFINITY, DMatrix::zeros(2, 2));
            for &a in &grid {
                for &b in &grid {
                    for &c in &grid {
                        for &d in &grid {
                            let u = DMatrix::from_row_slice(2, 2, &[a, b, c, d]);
                            let nnz = u.iter().filter(|v| **v != 0.0).count();
                            if nnz > p.s || splr::prox::numerical_rank(&u) > p.r {
                                continue;
                            }
                            let v = p.least_squares_value(&u).unwrap();
                            if v < best.0 {
                                best = (v, u);
                            }
                        }
                    }
                }
            }
            best.1
        };
        assert_eq!(argmin(&spec), argmin(&scaled));
    }
}

#[test]
fn least_squares_trivial_values() {
    let mut rng = rng(15);
    let spec = random_spec::<f64>(&mut rng, SpaceTag::NonnegRect, 3, 4, 6);
    let u = nonneg(&mut rng, 3, 4);
    let exact = ProblemSpec { b: spec.op.apply(&u).unwrap(), ..spec.clone() };
    assert!(exact.least_squares_value(&u).unwrap() <= 1e-28);
    let zero = ProblemSpec { b: DVector::zeros(6), ..spec };
    assert_eq!(zero.least_squares_value(&zero.zeros()).unwrap(), 0.0);
}

#[test]
fn least_squares_gradient_matches_central_differences() {
    let mut rng = rng(16);
    for space in [SpaceTag::NonnegRect, SpaceTag::PsdReal] {
        let spec = random_spec::<f64>(&mut rng, space, 4, 4, 10);
        let u = matrix::<f64>(&mut rng, 4, 4);
        let u = if space.is_psd() { linalg::symmetrized(u) } else { u };
        let g = spec.least_squares_grad(&u).unwrap();
        let flat = DVector::from_column_slice(u.as_slice());
        let f = |x: &DVector<f64>| {
            let m = DMatrix::from_column_slice(4, 4, x.as_slice());
            spec.least_squares_value(&m).unwrap()
        };
        let fd = fd_gradient(f, &flat, 1e-6);
        // Symmetric spaces measure through the Hermitian part, so the full-matrix derivative
        // equals the symmetric gradient.
        let gv = DVector::from_column_slice(g.as_slice());
        let rel = (&fd - &gv).norm() / gv.norm();
        assert!(rel <= 1e-6, "{space:?}: {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity_holds(seed in any::<u64>(), m in 1usize..6, n in 1usize..6, n_meas in 1usize..12, complex in any::<bool>()) {
        let mut rng = rng(seed);
        if complex {
            let mats: Vec<DMatrix<Complex64>> = (0..n_meas).map(|_| matrix(&mut rng, n, n)).collect();
            let op = MeasurementOp::general(&mats, true).unwrap();
            let u = hermitian::<Complex64>(&mut rng, n);
            let z = random_z(&mut rng, n_meas);
            let lhs = op.apply(&u).unwrap().dot(&z);
            let rhs = linalg::inner(&u, &op.adjoint(&z).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        } else {
            let mats: Vec<DMatrix<f64>> = (0..n_meas).map(|_| matrix(&mut rng, m, n)).collect();
            let op = MeasurementOp::general(&mats, false).unwrap();
            let u = matrix::<f64>(&mut rng, m, n);
            let z = random_z(&mut rng, n_meas);
            let lhs = op.apply(&u).unwrap().dot(&z);
            let rhs = linalg::inner(&u, &op.adjoint(&z).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn gram_matches_adjoint_then_apply(seed in any::<u64>(), n in 2usize..6, n_meas in 1usize..10) {
        let mut rng = rng(seed);
        let op = MeasurementOp::rank_one(matrix::<Complex64>(&mut rng, n_meas, n)).unwrap();
        let z = random_z(&mut rng, n_meas);
        let direct = op.apply(&op.adjoint(&z).unwrap()).unwrap();
        let via_gram = op.gram() * &z;
        prop_assert!((direct - via_gram).norm() <= 1e-10 * z.norm().max(1.0) * op.fro_norm().powi(2));
    }

    #[test]
    fn instance_file_round_trips(seed in any::<u64>(), psd in any::<bool>()) {
        let mut rng = rng(seed);
        let space = if psd { SpaceTag::PsdReal } else { SpaceTag::NonnegRect };
        let spec = random_spec::<f64>(&mut rng, space, 3, 4, 5);
        let file = spec.to_instance();
        let json = serde_json::to_string(&file).unwrap();
        let back = ProblemSpec::<f64>::from_instance(&serde_json::from_str(&json).unwrap()).unwrap();
        let u = cone_point::<f64>(&mut rng, space, 3, 4);
        prop_assert_eq!(back.to_instance(), file);
        prop_assert!((back.op.apply(&u).unwrap() - spec.op.apply(&u).unwrap()).norm() <= 1e-12);
    }
}
