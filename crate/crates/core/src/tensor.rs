//! Dense tensors of order 1 to 4, their vectorization and mode-n unfoldings.
//!
//! Values are stored in vectorization order: the multi-index
//! `(k_1, ..., k_D)` (1-based) lives at flat position
//! `l = sum_{i<D} (k_i - 1) * prod_{j>i} N_j + k_D`, i.e. the last index runs
//! fastest. [`DenseTensor::vectorize`] is therefore a borrow of the storage.
//!
//! The mode-n unfolding puts `k_n` on the row and maps the remaining indices,
//! kept in their natural order with the last one fastest, to the 1-based column
//! `1 + sum_{i != n} (k_i - 1) * prod_{j > i, j != n} N_j`. The leading `1 +`
//! makes the map a bijection onto `1..=I_n`.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solvers::svd::singular_values;

pub const MAX_ORDER: usize = 4;

/// Default relative tolerance for [`DenseTensor::n_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TensorShape {
    dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_ORDER {
            return Err(Error::invalid(format!(
                "tensor order must be in 1..={MAX_ORDER}, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::invalid(format!("tensor dims must be positive, got {dims:?}")));
        }
        Ok(TensorShape {
            dims: dims.to_vec(),
        })
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Always false; shapes have at least one element.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// 0-based flat position of a 0-based multi-index.
    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&k, &n)| {
                debug_assert!(k < n);
                acc * n + k
            })
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &n) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % n;
            flat /= n;
        }
        out
    }

    /// Number of columns of the mode-`mode` unfolding (`mode` is 1-based).
    pub fn unfolding_cols(&self, mode: usize) -> usize {
        self.len() / self.dims[mode - 1]
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode == 0 || mode > self.order() {
            return Err(Error::invalid(format!(
                "mode {mode} out of range 1..={}",
                self.order()
            )));
        }
        Ok(())
    }

    // (outer, n, inner) sizes around a 1-based mode.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let outer = self.dims[..mode - 1].iter().product();
        let inner = self.dims[mode..].iter().product();
        (outer, self.dims[mode - 1], inner)
    }
}

impl fmt::Debug for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    shape: TensorShape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: TensorShape) -> Self {
        let values = vec![0.0; shape.len()];
        DenseTensor { shape, values }
    }

    pub fn filled(shape: TensorShape, value: f64) -> Self {
        let values = vec![value; shape.len()];
        DenseTensor { shape, values }
    }

    /// Builds a tensor from values given in vectorization order (devectorize).
    pub fn from_vec(shape: TensorShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::invalid(format!(
                "{} values do not fill a {shape} tensor",
                values.len()
            )));
        }
        Ok(DenseTensor { shape, values })
    }

    pub fn from_fn(shape: TensorShape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let values = (0..shape.len()).map(|l| f(&shape.multi_index(l))).collect();
        DenseTensor { shape, values }
    }

    #[inline]
    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The vectorization; a view of the storage.
    #[inline]
    pub fn vectorize(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Entry at a 0-based multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.shape.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let l = self.shape.flat_index(index);
        self.values[l] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &DenseTensor, b: f64) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        Ok(DenseTensor {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub(crate) fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::invalid(format!(
                "shape mismatch: {} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Mode-n matricization, `mode` 1-based.
    pub fn unfold(&self, mode: usize) -> Result<Unfolding> {
        self.shape.check_mode(mode)?;
        let (outer, n, inner) = self.shape.split(mode);
        let cols = outer * inner;
        let mut m = Matrix::zeros(n, cols);
        let dst = m.as_mut_slice();
        for o in 0..outer {
            for k in 0..n {
                let src = &self.values[(o * n + k) * inner..(o * n + k + 1) * inner];
                dst[k * cols + o * inner..k * cols + (o + 1) * inner].copy_from_slice(src);
            }
        }
        Ok(Unfolding {
            mode,
            matrix: m,
            shape: self.shape.clone(),
        })
    }

    /// Tuple of the ranks of all unfoldings. A singular value counts when it
    /// exceeds `tol` times the largest singular value of that unfolding.
    pub fn n_rank(&self, tol: f64) -> Result<Vec<usize>> {
        if !(tol >= 0.0) {
            return Err(Error::invalid(format!("rank tolerance must be >= 0, got {tol}")));
        }
        (1..=self.shape.order())
            .map(|mode| {
                let sv = singular_values(&self.unfold(mode)?.matrix)?;
                let top = sv.first().copied().unwrap_or(0.0);
                Ok(sv.iter().filter(|&&s| s > tol * top).count())
            })
            .collect()
    }
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("shape", &self.shape)
            .field("values", &self.values)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unfolding {
    pub mode: usize,
    pub matrix: Matrix,
    pub shape: TensorShape,
}

impl Unfolding {
    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(&self) -> Result<DenseTensor> {
        self.shape.check_mode(self.mode)?;
        let (outer, n, inner) = self.shape.split(self.mode);
        let cols = outer * inner;
        if self.matrix.rows() != n || self.matrix.cols() != cols {
            return Err(Error::invalid(format!(
                "unfolding matrix is {}x{}, expected {n}x{cols} for mode {} of {}",
                self.matrix.rows(),
                self.matrix.cols(),
                self.mode,
                self.shape
            )));
        }
        let src = self.matrix.as_slice();
        let mut values = vec![0.0; self.shape.len()];
        for o in 0..outer {
            for k in 0..n {
                values[(o * n + k) * inner..(o * n + k + 1) * inner]
                    .copy_from_slice(&src[k * cols + o * inner..k * cols + (o + 1) * inner]);
            }
        }
        DenseTensor::from_vec(self.shape.clone(), values)
    }
}
