#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wtomo::experiments::{Scenario, Setup, Trial};
use wtomo::geometry::SensingOperator;
use wtomo::solvers::prox::shrink;
use wtomo::{DenseTensor, TensorShape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &TensorShape, rng: &mut impl Rng) -> DenseTensor {
    let values = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseTensor::from_vec(shape.clone(), values).unwrap()
}

/// Orthonormal DCT-II written out from the closed form.
pub fn dct_closed_form(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |k, j| {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        scale * (std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64).cos()
    })
}

/// Dense synthesis matrix `F1^T (x) F2^T (x) ...` acting on vectorized
/// coefficients (last index fastest).
pub fn dense_synthesis(dims: &[usize]) -> DMatrix<f64> {
    dims.iter()
        .map(|&n| dct_closed_form(n).transpose())
        .reduce(|acc, f| acc.kronecker(&f))
        .unwrap()
}

pub fn dense_operator(op: &SensingOperator) -> DMatrix<f64> {
    let m = op.to_dense();
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn d2_trial(run: usize) -> (Setup, Trial) {
    let setup = Setup::new(&Scenario::preset("d2").unwrap()).unwrap();
    let trial = setup.trial(run).unwrap();
    (setup, trial)
}

/// `0.5 ||y - B s||^2 + lambda ||s||_1` with a dense `B`.
pub fn lasso_objective(b: &DMatrix<f64>, y: &[f64], s: &[f64], lambda: f64) -> f64 {
    let r = b * nalgebra::DVector::from_column_slice(s) - nalgebra::DVector::from_column_slice(y);
    0.5 * r.norm_squared() + lambda * s.iter().map(|v| v.abs()).sum::<f64>()
}

/// Plain proximal gradient on the dense lasso problem, step `1 / ||B||^2`.
pub fn ista(b: &DMatrix<f64>, y: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let lip = b.singular_values().max().powi(2);
    let bt = b.transpose();
    let y = nalgebra::DVector::from_column_slice(y);
    let mut s = nalgebra::DVector::zeros(b.ncols());
    for _ in 0..iters {
        let grad = &bt * (b * &s - &y);
        s = (&s - grad / lip).map(|v| shrink(v, lambda / lip));
    }
    s.as_slice().to_vec()
}
