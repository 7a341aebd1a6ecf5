//! Proximal operators of the l1 norm and the nuclear norm.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solvers::svd::svd;

#[inline]
pub fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Elementwise `sign(v) * max(|v| - tau, 0)`.
pub fn soft_threshold(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    Ok(v.iter().map(|&x| shrink(x, tau)).collect())
}

/// Singular value thresholding. Also returns the nuclear norm of the result,
/// which callers need for objective bookkeeping.
pub fn svt_with_norm(m: &Matrix, tau: f64) -> Result<(Matrix, f64)> {
    check_tau(tau)?;
    let dec = svd(m)?;
    let mut nuclear = 0.0;
    let out = dec.reconstruct_with(|_, s| {
        // sigma == tau thresholds to zero
        let t = (s - tau).max(0.0);
        nuclear += t;
        t
    });
    Ok((out, nuclear))
}

pub fn svt(m: &Matrix, tau: f64) -> Result<Matrix> {
    svt_with_norm(m, tau).map(|(out, _)| out)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite and >= 0, got {tau}")));
    }
    Ok(())
}
