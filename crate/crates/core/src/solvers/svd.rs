//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! The matrices we decompose are mode-n unfoldings of desk-scale loss
//! fields, a few dozen rows by a few hundred columns at most. One-sided
//! Jacobi is slow asymptotically but delivers singular values to high
//! relative accuracy, which matters when counting n-ranks and when the
//! nuclear-norm prox zeroes the tail of the spectrum.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

const MAX_SWEEPS: usize = 80;
const ORTHO_TOL: f64 = 1e-15;

/// `m = u * diag(sigma) * v^T` with `u` of shape `rows x r`, `v` of shape
/// `cols x r` and `r = min(rows, cols)`. Singular values are descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    /// Rebuilds `u * diag(f(sigma)) * v^T`, skipping terms mapped to zero.
    pub fn reconstruct_with(&self, mut f: impl FnMut(usize, f64) -> f64) -> Matrix {
        let (rows, cols) = (self.u.rows(), self.v.rows());
        let mut out = Matrix::zeros(rows, cols);
        for (j, &s) in self.sigma.iter().enumerate() {
            let w = f(j, s);
            if w == 0.0 {
                continue;
            }
            let vj = self.v.column(j);
            for i in 0..rows {
                let a = w * self.u[(i, j)];
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.as_mut_slice()[i * cols..(i + 1) * cols];
                for (d, &b) in dst.iter_mut().zip(&vj) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|_, s| s)
    }
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::invalid("svd input has non-finite entries"));
    }
    if m.rows() >= m.cols() {
        let (u, sigma, v) = jacobi(m, true);
        Ok(Svd { u, sigma, v })
    } else {
        let (v, sigma, u) = jacobi(&m.transpose(), true);
        Ok(Svd { u, sigma, v })
    }
}

/// Singular values only, descending.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_finite() {
        return Err(Error::invalid("svd input has non-finite entries"));
    }
    let tall = if m.rows() >= m.cols() {
        None
    } else {
        Some(m.transpose())
    };
    let (_, sigma, _) = jacobi(tall.as_ref().unwrap_or(m), false);
    Ok(sigma)
}

pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

// Requires rows >= cols. Returns (u, sigma, v); u and v are empty when
// `vectors` is false.
fn jacobi(a: &Matrix, vectors: bool) -> (Matrix, Vec<f64>, Matrix) {
    let (m, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = if vectors {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                if vectors {
                    let (left, right) = v.split_at_mut(q);
                    rotate(&mut left[p], &mut right[0], c, s);
                }
                norms[p] = dot(&cols[p], &cols[p]);
                norms[q] = dot(&cols[q], &cols[q]);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sig: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]).then(i.cmp(&j)));
    let sigma: Vec<f64> = order.iter().map(|&j| sig[j]).collect();
    if !vectors {
        return (Matrix::zeros(0, 0), sigma, Matrix::zeros(0, 0));
    }

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sig[j] > 0.0 {
            u_cols.push(cols[j].iter().map(|x| x / sig[j]).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            deficient.push(slot);
        }
    }
    for slot in deficient {
        u_cols[slot] = orthogonal_complement_vector(&u_cols, slot, m);
    }

    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    for (slot, &j) in order.iter().enumerate() {
        for i in 0..m {
            u[(i, slot)] = u_cols[slot][i];
        }
        for i in 0..n {
            vm[(i, slot)] = v[j][i];
        }
    }
    (u, sigma, vm)
}

// A unit vector orthogonal to every column except `skip` (which is zero).
fn orthogonal_complement_vector(cols: &[Vec<f64>], skip: usize, m: usize) -> Vec<f64> {
    let mut best = vec![0.0; m];
    let mut best_norm = -1.0;
    for e in 0..m {
        let mut w = vec![0.0; m];
        w[e] = 1.0;
        for _ in 0..2 {
            for (k, c) in cols.iter().enumerate() {
                if k == skip {
                    continue;
                }
                let proj = dot(&w, c);
                for (wi, ci) in w.iter_mut().zip(c) {
                    *wi -= proj * ci;
                }
            }
        }
        let nrm = dot(&w, &w).sqrt();
        if nrm > best_norm {
            best_norm = nrm;
            best = w;
        }
        if nrm > 0.5 {
            break;
        }
    }
    best.iter_mut().for_each(|x| *x /= best_norm);
    best
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn rotate(p: &mut [f64], q: &mut [f64], c: f64, s: f64) {
    for (x, y) in p.iter_mut().zip(q.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Frobenius error of the best rank-`k` approximation of a matrix-shaped
/// field, measured directly as `||X_k - X||_F`; equal to the root sum of the
/// squared discarded singular values.
pub fn truncated_svd_error(x: &DenseTensor, k: usize) -> Result<f64> {
    let dims = x.shape().dims();
    if dims.len() != 2 {
        return Err(Error::invalid(format!(
            "truncated SVD error needs an order-2 field, got {}",
            x.shape()
        )));
    }
    let r = dims[0].min(dims[1]);
    if k > r {
        return Err(Error::invalid(format!("truncation rank {k} exceeds {r}")));
    }
    let m = x.unfold(1)?.matrix;
    let dec = svd(&m)?;
    let approx = dec.reconstruct_with(|i, s| if i < k { s } else { 0.0 });
    Ok(approx
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}
