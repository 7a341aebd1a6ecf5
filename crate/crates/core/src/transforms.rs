//! Orthonormal DCT-II matrices and the separable frequency basis.
//!
//! The basis maps a coefficient tensor `s` to the spatial field
//! `x = (F_1^T ⊗ ... ⊗ F_D^T) vec(s)`. It is applied one mode at a time and
//! never materialized.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{DenseTensor, TensorShape};

/// Orthonormal DCT-II: rows are frequencies, columns are spatial samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DctMatrix {
    entries: Matrix,
}

impl DctMatrix {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("DCT size must be positive"));
        }
        let nf = n as f64;
        let dc = 1.0 / nf.sqrt();
        let ac = (2.0 / nf).sqrt();
        let mut entries = Matrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                entries[(k, j)] = if k == 0 {
                    dc
                } else {
                    ac * (std::f64::consts::PI * ((2 * j + 1) * k) as f64 / (2.0 * nf)).cos()
                };
            }
        }
        Ok(DctMatrix { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }
}

pub fn dct_matrix(n: usize) -> Result<DctMatrix> {
    DctMatrix::new(n)
}

#[derive(Clone, Debug)]
pub struct KroneckerBasis {
    shape: TensorShape,
    factors: Vec<DctMatrix>,
}

impl KroneckerBasis {
    pub fn new(shape: TensorShape) -> Self {
        let factors = shape
            .dims()
            .iter()
            .map(|&n| DctMatrix::new(n).expect("shape dims are positive"))
            .collect();
        KroneckerBasis { shape, factors }
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn factors(&self) -> &[DctMatrix] {
        &self.factors
    }

    /// Coefficients to field: `F_i^T` along every mode.
    pub fn synthesize(&self, s: &DenseTensor) -> Result<DenseTensor> {
        self.check(s)?;
        Ok(self.synthesize_unchecked(s.vectorize()))
    }

    /// Field to coefficients: `F_i` along every mode. Inverse and adjoint of
    /// [`synthesize`](Self::synthesize).
    pub fn analyze(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.check(x)?;
        Ok(self.analyze_unchecked(x.vectorize()))
    }

    pub(crate) fn synthesize_unchecked(&self, s: &[f64]) -> DenseTensor {
        let values = self.apply_all(s, true);
        DenseTensor::from_vec(self.shape.clone(), values).expect("length preserved")
    }

    pub(crate) fn analyze_unchecked(&self, x: &[f64]) -> DenseTensor {
        let values = self.apply_all(x, false);
        DenseTensor::from_vec(self.shape.clone(), values).expect("length preserved")
    }

    fn check(&self, t: &DenseTensor) -> Result<()> {
        if t.shape() != &self.shape {
            return Err(Error::invalid(format!(
                "tensor shape {} does not match basis shape {}",
                t.shape(),
                self.shape
            )));
        }
        Ok(())
    }

    fn apply_all(&self, input: &[f64], transpose: bool) -> Vec<f64> {
        let dims = self.shape.dims();
        let mut cur = input.to_vec();
        let mut buf = vec![0.0; cur.len()];
        for (mode, f) in self.factors.iter().enumerate() {
            let n = dims[mode];
            if n == 1 {
                continue;
            }
            let outer: usize = dims[..mode].iter().product();
            let inner: usize = dims[mode + 1..].iter().product();
            let m = f.matrix();
            buf.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..outer {
                let base = o * n * inner;
                for k in 0..n {
                    let dst = base + k * inner;
                    for j in 0..n {
                        let w = if transpose { m[(j, k)] } else { m[(k, j)] };
                        let src = base + j * inner;
                        for i in 0..inner {
                            buf[dst + i] += w * cur[src + i];
                        }
                    }
                }
            }
            std::mem::swap(&mut cur, &mut buf);
        }
        cur
    }
}

/// Result of keeping only the `k` largest-magnitude DCT coefficients.
#[derive(Clone, Debug)]
pub struct Compaction {
    pub coefficients: DenseTensor,
    pub reconstruction: DenseTensor,
    pub error: f64,
}

/// Reconstructs `x` from its `k` largest-magnitude DCT coefficients. Ties go
/// to the lower vectorization index.
pub fn energy_compaction(x: &DenseTensor, k: usize) -> Result<Compaction> {
    let n = x.len();
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds {n} coefficients")));
    }
    let basis = KroneckerBasis::new(x.shape().clone());
    let s = basis.analyze(x)?;
    let mut order: Vec<usize> = (0..n).collect();
    let vals = s.vectorize();
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(a.cmp(&b)));
    let mut kept = DenseTensor::zeros(x.shape().clone());
    for &i in &order[..k] {
        kept.values_mut()[i] = vals[i];
    }
    let reconstruction = basis.synthesize(&kept)?;
    let error = reconstruction.distance(x)?;
    Ok(Compaction {
        coefficients: kept,
        reconstruction,
        error,
    })
}
