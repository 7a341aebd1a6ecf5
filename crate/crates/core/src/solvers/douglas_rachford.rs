use std::time::Instant;

use super::cg::conjugate_gradient;
use super::prox::svt;
use super::svd::singular_values;
use super::{check_measurements, residual_norm, small_change, SolverConfig, SolverReport, TraceEntry};
use crate::error::{Error, Result};
use crate::geometry::SensingOperator;
use crate::tensor::{DenseTensor, TensorShape, Unfolding};

/// Relative tolerance on `max_i ||Y_i - X||` before the run may stop.
const CONSENSUS_TOL: f64 = 1e-3;

/// Low-n-rank tensor recovery.
///
/// Minimizes `reg/2 ||y - A(X)||^2 + sum_i ||X_(i)||_*` by Douglas-Rachford
/// splitting over `(X, Y_1, ..., Y_D)` with the constraint `Y_i = X`. The
/// nuclear-norm blocks are handled by singular value thresholding of each
/// unfolding and the data block by a conjugate-gradient solve of
/// `(reg * step * A*A + (D + 1) I) x = rhs`.
pub fn solve_tensor(op: &SensingOperator, y: &[f64], cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    check_measurements(op, y)?;
    let shape = op.field_shape().clone();
    let order = shape.order();
    if order < 2 {
        return Err(Error::invalid("the tensor solver needs a field of order at least 2"));
    }
    let start = Instant::now();
    let n = shape.len();
    let gamma = cfg.dr_step;
    let weight = cfg.reg * gamma;
    let blocks = (order + 1) as f64;
    let aty: Vec<f64> = op.adjoint_slice(y).iter().map(|v| weight * v).collect();

    let mut z_x = vec![0.0; n];
    let mut z_y = vec![vec![0.0; n]; order];
    let mut warm = vec![0.0; n];
    let mut trace = Vec::new();
    let mut prev_objective = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    let mut estimate = vec![0.0; n];
    let mut gap = 0.0;
    let mut last = TraceEntry { objective: 0.0, residual: 0.0 };

    for k in 1..=cfg.max_iters {
        iterations = k;
        let p_x = z_x.clone();
        let p_y = z_y
            .iter()
            .enumerate()
            .map(|(i, z)| threshold_unfolding(&shape, z, i + 1, gamma))
            .collect::<Result<Vec<_>>>()?;

        let mut rhs = aty.clone();
        for j in 0..n {
            rhs[j] += 2.0 * p_x[j] - z_x[j];
        }
        for (p, z) in p_y.iter().zip(&z_y) {
            for j in 0..n {
                rhs[j] += 2.0 * p[j] - z[j];
            }
        }
        let cg = conjugate_gradient(
            |v| {
                let nv = op.normal_slice(v);
                nv.iter().zip(v).map(|(a, b)| weight * a + blocks * b).collect()
            },
            &rhs,
            Some(&warm),
            cfg.cg_tol,
            cfg.cg_max_iters,
        )
        .map_err(|e| match e {
            Error::SolverFailure { message, residual, .. } => Error::SolverFailure {
                message: format!("inner linear solve failed: {message}"),
                iterations: k,
                residual,
            },
            other => other,
        })?;
        let x = cg.solution;

        for j in 0..n {
            z_x[j] += x[j] - p_x[j];
        }
        for (z, p) in z_y.iter_mut().zip(&p_y) {
            for j in 0..n {
                z[j] += x[j] - p[j];
            }
        }
        warm = x;

        for j in 0..n {
            estimate[j] = (p_x[j] + p_y.iter().map(|p| p[j]).sum::<f64>()) / blocks;
        }
        gap = p_y
            .iter()
            .map(|p| distance(p, &p_x))
            .fold(0.0f64, f64::max);

        let residual = residual_norm(op, &estimate, y);
        let objective = 0.5 * cfg.reg * residual * residual + nuclear_sum(&shape, &estimate)?;
        if !objective.is_finite() {
            return Err(Error::SolverFailure {
                message: "objective became non-finite".into(),
                iterations: k,
                residual,
            });
        }
        last = TraceEntry { objective, residual };
        trace.push(last);

        if k > 1
            && small_change(prev_objective, objective, cfg.tol)
            && gap <= CONSENSUS_TOL * (1.0 + norm(&p_x))
        {
            converged = true;
            break;
        }
        prev_objective = objective;
    }

    Ok(SolverReport {
        estimate: DenseTensor::from_vec(shape, estimate)?,
        trace,
        iterations,
        converged,
        wall_time: start.elapsed(),
        residual: last.residual,
        objective: last.objective,
        coefficients: None,
        consensus_gap: Some(gap),
    })
}

fn threshold_unfolding(shape: &TensorShape, values: &[f64], mode: usize, tau: f64) -> Result<Vec<f64>> {
    let t = DenseTensor::from_vec(shape.clone(), values.to_vec())?;
    let unfolded = t.unfold(mode)?;
    let matrix = svt(&unfolded.matrix, tau)?;
    let folded = Unfolding { matrix, ..unfolded }.fold()?;
    Ok(folded.into_vec())
}

fn nuclear_sum(shape: &TensorShape, values: &[f64]) -> Result<f64> {
    let t = DenseTensor::from_vec(shape.clone(), values.to_vec())?;
    let mut total = 0.0;
    for mode in 1..=shape.order() {
        total += singular_values(&t.unfold(mode)?.matrix)?.iter().sum::<f64>();
    }
    Ok(total)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
