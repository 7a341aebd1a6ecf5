use std::time::Instant;

use super::prox::{shrink, svt_with_norm};
use super::{check_measurements, small_change, SolverConfig, SolverReport, TraceEntry};
use crate::error::{Error, Result};
use crate::geometry::SensingOperator;
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;
use crate::transforms::KroneckerBasis;

/// Sparse recovery in the separable DCT domain.
///
/// Minimizes `0.5 ||y - A Phi s||^2 + reg ||s||_1` over the coefficient
/// tensor `s` and returns `X = Phi s`. Works for any field order.
pub fn solve_vector(op: &SensingOperator, y: &[f64], cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    check_measurements(op, y)?;
    let start = Instant::now();
    let basis = KroneckerBasis::new(op.field_shape().clone());
    let problem = Problem {
        op,
        y,
        forward: |s: &[f64]| basis.synthesize_unchecked(s).into_vec(),
        backward: |g: &[f64]| basis.analyze_unchecked(g).into_vec(),
        prox: |z: &[f64], tau: f64| -> Result<(Vec<f64>, f64)> {
            let x: Vec<f64> = z.iter().map(|&v| shrink(v, tau)).collect();
            let l1 = x.iter().map(|v| v.abs()).sum();
            Ok((x, l1))
        },
    };
    let run = problem.run(cfg)?;
    let shape = op.field_shape().clone();
    let estimate = basis.synthesize_unchecked(&run.x);
    let coefficients = DenseTensor::from_vec(shape, run.x)?;
    Ok(SolverReport {
        estimate,
        trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        wall_time: start.elapsed(),
        residual: run.residual,
        objective: run.objective,
        coefficients: Some(coefficients),
        consensus_gap: None,
    })
}

/// Low-rank recovery of a two-way field.
///
/// Minimizes `0.5 ||y - A(X)||^2 + reg ||X||_*` by accelerated proximal
/// gradient with singular value thresholding.
pub fn solve_matrix(op: &SensingOperator, y: &[f64], cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    check_measurements(op, y)?;
    let shape = op.field_shape().clone();
    if shape.order() != 2 {
        return Err(Error::invalid(format!(
            "the matrix solver needs a two-way field, got shape {shape}"
        )));
    }
    let (rows, cols) = (shape.dims()[0], shape.dims()[1]);
    let start = Instant::now();
    let problem = Problem {
        op,
        y,
        forward: |x: &[f64]| x.to_vec(),
        backward: |g: &[f64]| g.to_vec(),
        prox: |z: &[f64], tau: f64| -> Result<(Vec<f64>, f64)> {
            let m = Matrix::from_row_major(rows, cols, z.to_vec())?;
            let (out, nuclear) = svt_with_norm(&m, tau)?;
            Ok((out.into_vec(), nuclear))
        },
    };
    let run = problem.run(cfg)?;
    Ok(SolverReport {
        estimate: DenseTensor::from_vec(shape, run.x)?,
        trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        wall_time: start.elapsed(),
        residual: run.residual,
        objective: run.objective,
        coefficients: None,
        consensus_gap: None,
    })
}

// 0.5 ||y - A forward(x)||^2 + reg * penalty(x), where `prox(z, tau)` returns
// the minimizer of `tau * penalty(x) + 0.5 ||x - z||^2` and `penalty` of it.
struct Problem<'a, F, B, P> {
    op: &'a SensingOperator,
    y: &'a [f64],
    forward: F,
    backward: B,
    prox: P,
}

struct Run {
    x: Vec<f64>,
    trace: Vec<TraceEntry>,
    iterations: usize,
    converged: bool,
    objective: f64,
    residual: f64,
}

impl<F, B, P> Problem<'_, F, B, P>
where
    F: Fn(&[f64]) -> Vec<f64>,
    B: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64], f64) -> Result<(Vec<f64>, f64)>,
{
    fn misfit(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.op.apply_slice(&(self.forward)(x));
        ax.iter().zip(self.y).map(|(a, b)| a - b).collect()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.backward)(&self.op.adjoint_slice(&self.misfit(x)))
    }

    fn step(&self, v: &[f64], lipschitz: f64, reg: f64) -> Result<(Vec<f64>, f64)> {
        let g = self.gradient(v);
        let z: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - b / lipschitz).collect();
        let (x, penalty) = (self.prox)(&z, reg / lipschitz)?;
        Ok((x, penalty))
    }

    fn run(&self, cfg: &SolverConfig) -> Result<Run> {
        let norm = self.op.operator_norm();
        if norm == 0.0 {
            return Err(Error::invalid("sensing operator has no nonzero entries"));
        }
        let lipschitz = norm * norm;
        let n = self.op.field_shape().len();

        let mut x = vec![0.0; n];
        let mut v = x.clone();
        let mut t = 1.0f64;
        let mut trace = Vec::new();
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        let mut prev_objective = f64::NAN;
        let mut converged = false;
        let mut iterations = 0;

        for k in 1..=cfg.max_iters {
            iterations = k;
            let (x_new, penalty) = self.step(&v, lipschitz, cfg.reg)?;
            let residual = self.misfit(&x_new).iter().map(|r| r * r).sum::<f64>().sqrt();
            let objective = 0.5 * residual * residual + cfg.reg * penalty;
            if !objective.is_finite() {
                return Err(Error::SolverFailure {
                    message: "objective became non-finite".into(),
                    iterations: k,
                    residual,
                });
            }
            trace.push(TraceEntry { objective, residual });
            if best.as_ref().is_none_or(|b| objective < b.0) {
                best = Some((objective, residual, x_new.clone()));
            }

            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_new;
            v = x_new
                .iter()
                .zip(&x)
                .map(|(a, b)| a + momentum * (a - b))
                .collect();
            x = x_new;
            t = t_new;

            if k > 1 && small_change(prev_objective, objective, cfg.tol) {
                let (fixed, _) = self.step(&x, lipschitz, cfg.reg)?;
                let gap = dist(&fixed, &x);
                if gap <= 10.0 * cfg.tol * (1.0 + l2(&x)) {
                    converged = true;
                    break;
                }
            }
            prev_objective = objective;
        }

        let (objective, residual, x) = best.expect("at least one iteration ran");
        Ok(Run {
            x,
            trace,
            iterations,
            converged,
            objective,
            residual,
        })
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
