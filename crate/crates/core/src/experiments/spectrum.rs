use std::io::Write;

use crate::error::{Error, Result};
use crate::solvers::svd::{singular_values, truncated_svd_error};
use crate::tensor::DenseTensor;
use crate::transforms::{energy_compaction, KroneckerBasis};

/// Ordered spectra of a planar truth field and an estimate of it, with the
/// truncation-error curves of both representations.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// `|DCT coefficients|` of the truth, sorted in decreasing order.
    pub truth_coefficients: Vec<f64>,
    pub estimate_coefficients: Vec<f64>,
    pub truth_singular_values: Vec<f64>,
    pub estimate_singular_values: Vec<f64>,
    /// `kappa_v[k]`: error of keeping the `k` largest DCT coefficients of
    /// the truth, `k = 0..=N1 N2`.
    pub kappa_v: Vec<f64>,
    /// `kappa_m[k]`: error of the rank-`k` SVD truncation of the truth,
    /// `k = 0..=min(N1, N2)`.
    pub kappa_m: Vec<f64>,
}

pub fn spectrum_report(truth: &DenseTensor, estimate: &DenseTensor) -> Result<SpectrumReport> {
    truth.check_same_shape(estimate)?;
    if truth.shape().order() != 2 {
        return Err(Error::invalid(format!(
            "spectrum reports need a two-way field, got shape {}",
            truth.shape()
        )));
    }
    let basis = KroneckerBasis::new(truth.shape().clone());
    let sorted_abs = |t: &DenseTensor| -> Result<Vec<f64>> {
        let mut c: Vec<f64> = basis.analyze(t)?.vectorize().iter().map(|v| v.abs()).collect();
        c.sort_by(|a, b| b.total_cmp(a));
        Ok(c)
    };
    let sv = |t: &DenseTensor| -> Result<Vec<f64>> { singular_values(&t.unfold(1)?.matrix) };
    let dims = truth.shape().dims();
    let kmax = dims[0].min(dims[1]);
    let kappa_v = (0..=truth.len())
        .map(|k| energy_compaction(truth, k).map(|c| c.error))
        .collect::<Result<Vec<_>>>()?;
    let kappa_m = (0..=kmax)
        .map(|k| truncated_svd_error(truth, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumReport {
        truth_coefficients: sorted_abs(truth)?,
        estimate_coefficients: sorted_abs(estimate)?,
        truth_singular_values: sv(truth)?,
        estimate_singular_values: sv(estimate)?,
        kappa_v,
        kappa_m,
    })
}

impl SpectrumReport {
    /// `rank,truth_dct_abs,estimate_dct_abs,truth_sigma,estimate_sigma`;
    /// singular value columns are empty past `min(N1, N2)`.
    pub fn write_spectrum_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rank,truth_dct_abs,estimate_dct_abs,truth_sigma,estimate_sigma")?;
        for i in 0..self.truth_coefficients.len() {
            let s = |v: &[f64]| v.get(i).map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                i + 1,
                self.truth_coefficients[i],
                self.estimate_coefficients[i],
                s(&self.truth_singular_values),
                s(&self.estimate_singular_values)
            )?;
        }
        Ok(())
    }

    /// `k,kappa_v,kappa_m`; `kappa_m` is empty past `min(N1, N2)`.
    pub fn write_compaction_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,kappa_v,kappa_m")?;
        for (k, v) in self.kappa_v.iter().enumerate() {
            let m = self.kappa_m.get(k).map(|x| x.to_string()).unwrap_or_default();
            writeln!(w, "{k},{v},{m}")?;
        }
        Ok(())
    }
}
