//! Recovery algorithms and their building blocks.
//!
//! * [`solve_vector`]: FISTA on `0.5 ||y - A Phi s||^2 + lambda ||s||_1` with
//!   `Phi` the separable inverse DCT.
//! * [`solve_matrix`]: accelerated proximal gradient with singular value
//!   thresholding on `0.5 ||y - A(X)||^2 + mu ||X||_*` for planar fields.
//! * [`solve_tensor`]: Douglas-Rachford splitting on
//!   `mu/2 ||y - A(X)||^2 + sum_i ||X_(i)||_*` over all mode unfoldings.
//!
//! The regularization weight sits on the penalty in the first two problems
//! and on the data term in the third, so `reg` values are not comparable
//! across solvers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SensingOperator;
use crate::tensor::DenseTensor;

pub mod cg;
mod douglas_rachford;
mod fista;
pub mod prox;
pub mod svd;

pub use cg::{conjugate_gradient, CgOutcome};
pub use douglas_rachford::solve_tensor;
pub use fista::{solve_matrix, solve_vector};
pub use prox::{soft_threshold, svt};
pub use svd::{svd, truncated_svd_error, Svd};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// lambda for the vector solver, mu for the matrix and tensor solvers.
    pub reg: f64,
    pub max_iters: usize,
    /// Relative objective change that ends the iteration.
    pub tol: f64,
    /// Douglas-Rachford step gamma.
    pub dr_step: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            reg: 1.0,
            max_iters: 2000,
            tol: 1e-6,
            dr_step: 1.0,
            cg_tol: 1e-8,
            cg_max_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn with_reg(self, reg: f64) -> Self {
        SolverConfig { reg, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("reg", self.reg)?;
        positive("tol", self.tol)?;
        positive("dr_step", self.dr_step)?;
        positive("cg_tol", self.cg_tol)?;
        if self.max_iters == 0 || self.cg_max_iters == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub objective: f64,
    /// `||y - A(X_k)||_2` at the iterate whose objective is recorded.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolverReport {
    pub estimate: DenseTensor,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
    /// `||y - A(X_hat)||_2` at the returned estimate.
    pub residual: f64,
    /// Objective value at the returned estimate.
    pub objective: f64,
    /// Frequency coefficients (vector solver only).
    pub coefficients: Option<DenseTensor>,
    /// `max_i ||Y_i - X||_F` at termination (tensor solver only).
    pub consensus_gap: Option<f64>,
}

impl SolverReport {
    /// `iteration,objective,residual`, one line per trace entry.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,objective,residual")?;
        for (i, e) in self.trace.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, e.objective, e.residual)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Vector,
    Matrix,
    Tensor,
}

impl Solver {
    pub const ALL: [Solver; 3] = [Solver::Vector, Solver::Matrix, Solver::Tensor];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Vector => "vector",
            Solver::Matrix => "matrix",
            Solver::Tensor => "tensor",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vector" | "dct" | "fista" => Ok(Solver::Vector),
            "matrix" | "apg" => Ok(Solver::Matrix),
            "tensor" | "dr" | "dr-tr" => Ok(Solver::Tensor),
            other => Err(Error::invalid(format!(
                "unknown solver '{other}' (expected vector, matrix or tensor)"
            ))),
        }
    }
}

pub fn solve(solver: Solver, op: &SensingOperator, y: &[f64], cfg: &SolverConfig) -> Result<SolverReport> {
    match solver {
        Solver::Vector => solve_vector(op, y, cfg),
        Solver::Matrix => solve_matrix(op, y, cfg),
        Solver::Tensor => solve_tensor(op, y, cfg),
    }
}

pub(crate) fn check_measurements(op: &SensingOperator, y: &[f64]) -> Result<()> {
    if y.len() != op.num_rows() {
        return Err(Error::invalid(format!(
            "{} measurements for an operator with {} rows",
            y.len(),
            op.num_rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("measurements contain non-finite values"));
    }
    Ok(())
}

pub(crate) fn residual_norm(op: &SensingOperator, x: &[f64], y: &[f64]) -> f64 {
    op.apply_slice(x)
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

// |F_k - F_{k-1}| <= tol |F_{k-1}|, true when both are zero.
pub(crate) fn small_change(prev: f64, cur: f64, tol: f64) -> bool {
    (cur - prev).abs() <= tol * prev.abs()
}
