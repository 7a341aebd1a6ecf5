//! Conjugate gradient for symmetric positive definite operators.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `op(x) = rhs` starting from `x0` (zero when `None`). Succeeds once
/// `||op(x) - rhs|| <= tol * ||rhs||`; hitting `max_iters` first is a solver
/// failure.
pub fn conjugate_gradient(
    mut op: impl FnMut(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let n = rhs.len();
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::invalid(format!(
                "initial guess has length {}, rhs has {n}",
                x0.len()
            )))
        }
        None => vec![0.0; n],
    };
    let mut r: Vec<f64> = if x.iter().any(|&v| v != 0.0) {
        let ax = op(&x);
        rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    } else {
        rhs.to_vec()
    };
    let mut rr = dot(&r, &r);
    let target = tol * rhs_norm;
    if rr.sqrt() <= target {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: rr.sqrt() / rhs_norm,
        });
    }

    let mut p = r.clone();
    for iter in 1..=max_iters {
        let ap = op(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure {
                message: "conjugate gradient: operator is not positive definite".into(),
                iterations: iter,
                residual: rr.sqrt() / rhs_norm,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return Ok(CgOutcome {
                solution: x,
                iterations: iter,
                relative_residual: rr_new.sqrt() / rhs_norm,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure {
        message: "conjugate gradient did not reach tolerance".into(),
        iterations: max_iters,
        residual: rr.sqrt() / rhs_norm,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
