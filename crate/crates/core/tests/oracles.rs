//! Solver and linear-algebra results checked against independent dense
//! computations.

mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::*;
use wtomo::geometry::{OperatorRow, SensingOperator, VoxelGrid};
use wtomo::solvers::prox::{shrink, svt};
use wtomo::solvers::svd::{singular_values, svd};
use wtomo::solvers::{conjugate_gradient, solve, solve_matrix, solve_tensor, solve_vector, Solver, SolverConfig};
use wtomo::transforms::KroneckerBasis;
use wtomo::{DenseTensor, Matrix, TensorShape};

#[test]
fn cg_matches_dense_solve_on_random_spd() {
    let mut rng = rng(11);
    let n = 20;
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
    let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let direct = a.clone().cholesky().unwrap().solve(&b);
    let out = conjugate_gradient(
        |x| (&a * DVector::from_column_slice(x)).as_slice().to_vec(),
        b.as_slice(),
        None,
        1e-13,
        200,
    )
    .unwrap();
    for (x, y) in out.solution.iter().zip(direct.iter()) {
        assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
    }
}

#[test]
fn svd_agrees_with_dense_library() {
    let mut rng = rng(5);
    for (r, c) in [(6, 4), (4, 6), (10, 10), (50, 3), (5, 60)] {
        let vals: Vec<f64> = (0..r * c).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ours = singular_values(&Matrix::from_row_major(r, c, vals.clone()).unwrap()).unwrap();
        let mut theirs: Vec<f64> = DMatrix::from_row_slice(r, c, &vals).singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() <= 1e-10 * theirs[0], "{a} vs {b}");
        }
        let dec = svd(&Matrix::from_row_major(r, c, vals.clone()).unwrap()).unwrap();
        let back = dec.reconstruct();
        let err = back
            .as_slice()
            .iter()
            .zip(&vals)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10);
    }
}

#[test]
fn operator_norm_matches_dense_svd() {
    let (_, trial) = d2_trial(1);
    assert_eq!(trial.operator.num_rows(), 60);
    let dense = dense_operator(&trial.operator);
    assert_eq!(dense.shape(), (60, 100));
    let top = dense.singular_values().max();
    assert_relative_eq!(trial.operator.operator_norm(), top, max_relative = 1e-4);
}

#[test]
fn fista_objective_matches_long_ista_run() {
    let (_, trial) = d2_trial(1);
    let cfg = SolverConfig::default();
    let report = solve_vector(&trial.operator, &trial.measurements.y, &cfg).unwrap();
    let b = dense_operator(&trial.operator) * dense_synthesis(&[10, 10]);
    let reference = ista(&b, &trial.measurements.y, cfg.reg, 100_000);
    let f_ref = lasso_objective(&b, &trial.measurements.y, &reference, cfg.reg);
    let s = report.coefficients.as_ref().unwrap().vectorize();
    let f_ours = lasso_objective(&b, &trial.measurements.y, s, cfg.reg);
    assert_relative_eq!(report.objective, f_ours, max_relative = 1e-10);
    assert!((f_ours - f_ref).abs() <= 1e-4 * f_ref, "fista {f_ours} vs ista {f_ref}");
}

#[test]
fn fista_returns_a_proximal_fixed_point() {
    let (_, trial) = d2_trial(2);
    let cfg = SolverConfig::default();
    let report = solve_vector(&trial.operator, &trial.measurements.y, &cfg).unwrap();
    assert!(report.converged);
    let b = dense_operator(&trial.operator) * dense_synthesis(&[10, 10]);
    let lip = b.singular_values().max().powi(2);
    let s = DVector::from_column_slice(report.coefficients.unwrap().vectorize());
    let grad = b.transpose() * (&b * &s - DVector::from_column_slice(&trial.measurements.y));
    let stepped = (&s - grad / lip).map(|v| shrink(v, cfg.reg / lip));
    assert!((&s - stepped).norm() <= 10.0 * cfg.tol * (1.0 + s.norm()));
}

#[test]
fn apg_returns_a_proximal_fixed_point() {
    let (_, trial) = d2_trial(3);
    let cfg = SolverConfig::default();
    let report = solve_matrix(&trial.operator, &trial.measurements.y, &cfg).unwrap();
    assert!(report.converged);
    let a = dense_operator(&trial.operator);
    let lip = a.singular_values().max().powi(2);
    let x = DVector::from_column_slice(report.estimate.vectorize());
    let grad = a.transpose() * (&a * &x - DVector::from_column_slice(&trial.measurements.y));
    let z = &x - grad / lip;
    let stepped = svt(&Matrix::from_row_major(10, 10, z.as_slice().to_vec()).unwrap(), cfg.reg / lip).unwrap();
    let diff = x
        .iter()
        .zip(stepped.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(diff <= 10.0 * cfg.tol * (1.0 + x.norm()), "{diff}");
}

fn identity_operator(dims: [usize; 3], intervals: usize) -> SensingOperator {
    let grid = VoxelGrid::unit(dims).unwrap();
    let rows = (0..intervals)
        .flat_map(|t| {
            (0..grid.voxel_count()).map(move |v| OperatorRow {
                interval: t,
                entries: vec![(v, 1.0)],
                link: None,
            })
        })
        .collect();
    SensingOperator::from_rows(&grid, intervals, rows).unwrap()
}

#[test]
fn full_sampling_matrix_recovery_is_svt_of_the_data() {
    let op = identity_operator([6, 5, 1], 1);
    let mut rng = rng(3);
    let y: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
    let cfg = SolverConfig::default().with_reg(1.5);
    let report = solve_matrix(&op, &y, &cfg).unwrap();
    let expected = svt(&Matrix::from_row_major(6, 5, y.clone()).unwrap(), 1.5).unwrap();
    for (a, b) in report.estimate.vectorize().iter().zip(expected.as_slice()) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn full_sampling_vector_recovery_thresholds_the_spectrum() {
    let op = identity_operator([4, 3, 2], 1);
    let shape = TensorShape::new(&[4, 3, 2]).unwrap();
    let mut rng = rng(4);
    let y: Vec<f64> = (0..24).map(|_| rng.random_range(-3.0..3.0)).collect();
    let cfg = SolverConfig::default().with_reg(0.7);
    let report = solve_vector(&op, &y, &cfg).unwrap();
    let basis = KroneckerBasis::new(shape.clone());
    let coeffs = basis.analyze(&DenseTensor::from_vec(shape.clone(), y).unwrap()).unwrap();
    let shrunk: Vec<f64> = coeffs.vectorize().iter().map(|&v| shrink(v, 0.7)).collect();
    let expected = basis.synthesize(&DenseTensor::from_vec(shape, shrunk).unwrap()).unwrap();
    assert!(report.estimate.distance(&expected).unwrap() <= 1e-9);
}

#[test]
fn zero_data_gives_zero_estimates() {
    let (_, trial) = d2_trial(1);
    let y = vec![0.0; trial.operator.num_rows()];
    for solver in Solver::ALL {
        let r = solve(solver, &trial.operator, &y, &SolverConfig::default()).unwrap();
        assert!(r.estimate.vectorize().iter().all(|&v| v == 0.0), "{solver}");
        assert!(r.converged);
    }
}

#[test]
fn solvers_reject_bad_input() {
    let (_, trial) = d2_trial(1);
    let mut y = trial.measurements.y.clone();
    y[3] = f64::NAN;
    for solver in Solver::ALL {
        assert!(solve(solver, &trial.operator, &y, &SolverConfig::default()).is_err());
        assert!(solve(solver, &trial.operator, &y[..10], &SolverConfig::default()).is_err());
    }
    let grid = VoxelGrid::unit([3, 3, 2]).unwrap();
    let zero = SensingOperator::from_rows(
        &grid,
        1,
        vec![OperatorRow {
            interval: 0,
            entries: vec![],
            link: None,
        }],
    )
    .unwrap();
    assert!(solve_vector(&zero, &[1.0], &SolverConfig::default()).is_err());
    assert!(solve_matrix(&zero, &[1.0], &SolverConfig::default()).is_err());
}

#[test]
fn tensor_objective_matches_matrix_objective_on_planar_data() {
    let (_, trial) = d2_trial(4);
    let y = &trial.measurements.y;
    for mu in [1.0, 2.0] {
        let t = solve_tensor(&trial.operator, y, &SolverConfig::default().with_reg(mu)).unwrap();
        let m = solve_matrix(&trial.operator, y, &SolverConfig::default().with_reg(2.0 / mu)).unwrap();
        // the tensor objective is mu times the matrix objective at reg 2/mu
        let scaled = mu * m.objective;
        assert!((t.objective - scaled).abs() <= 1e-3 * scaled, "mu={mu}: {} vs {scaled}", t.objective);
    }
}

#[test]
fn planar_singular_values_single_run() {
    let (_, trial) = d2_trial(1);
    let r = solve_matrix(&trial.operator, &trial.measurements.y, &SolverConfig::default()).unwrap();
    let sv = singular_values(&r.estimate.unfold(1).unwrap().matrix).unwrap();
    assert!((28.5..=30.5).contains(&sv[0]), "{sv:?}");
    assert!(sv[1] <= 0.05, "{sv:?}");
}

#[test]
fn traces_have_nonincreasing_running_minimum_and_finite_estimates() {
    let (setup, trial) = d2_trial(5);
    for solver in Solver::ALL {
        let r = solve(solver, &trial.operator, &trial.measurements.y, &SolverConfig::default()).unwrap();
        assert!(!r.trace.is_empty());
        assert!(r.estimate.is_finite());
        assert_eq!(r.estimate.shape(), setup.truth.shape());
        let mut best = f64::INFINITY;
        for e in &r.trace {
            best = best.min(e.objective);
        }
        assert!(r.objective <= r.trace[0].objective);
        if solver != Solver::Tensor {
            assert_eq!(r.objective, best);
        }
    }
}
