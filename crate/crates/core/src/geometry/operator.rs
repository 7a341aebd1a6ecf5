//! The sensing operator: one sparse row of overlap lengths per link.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::{Link, NodeSet, VoxelGrid};
use super::trace::trace_link;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{DenseTensor, TensorShape};

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorRow {
    /// Time interval (0-based) whose slice this row reads.
    pub interval: usize,
    /// `(spatial voxel index, overlap length)` pairs, all lengths positive.
    pub entries: Vec<(usize, f64)>,
    /// Originating link, when the row was traced from one.
    pub link: Option<Link>,
}

impl OperatorRow {
    pub fn total_length(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

/// Linear map from a loss field to the stacked measurement vector. Rows are
/// ordered by ascending interval; a row only reads its own time slice.
#[derive(Clone, Debug)]
pub struct SensingOperator {
    grid: VoxelGrid,
    intervals: usize,
    shape: TensorShape,
    rows: Vec<OperatorRow>,
}

impl SensingOperator {
    /// Traces every link. Rows are stably grouped by interval.
    pub fn build(
        grid: &VoxelGrid,
        nodes: &NodeSet,
        links: &[Link],
        intervals: usize,
    ) -> Result<Self> {
        let shape = grid.field_shape(intervals)?;
        for (m, l) in links.iter().enumerate() {
            if l.tx >= nodes.len() || l.rx >= nodes.len() {
                return Err(Error::invalid(format!(
                    "link {m} references node outside 0..{}",
                    nodes.len()
                )));
            }
            if l.tx == l.rx {
                return Err(Error::invalid(format!("link {m} has tx == rx == {}", l.tx)));
            }
            if l.interval >= intervals {
                return Err(Error::invalid(format!(
                    "link {m} interval {} outside 0..{intervals}",
                    l.interval
                )));
            }
        }
        let mut ordered: Vec<Link> = links.to_vec();
        ordered.sort_by_key(|l| l.interval);
        let rows = ordered
            .into_iter()
            .map(|link| OperatorRow {
                interval: link.interval,
                entries: trace_link(grid, nodes.position(link.tx), nodes.position(link.rx)),
                link: Some(link),
            })
            .collect();
        Ok(SensingOperator {
            grid: grid.clone(),
            intervals,
            shape,
            rows,
        })
    }

    /// Operator from explicit rows, for synthetic tests and tooling.
    pub fn from_rows(grid: &VoxelGrid, intervals: usize, mut rows: Vec<OperatorRow>) -> Result<Self> {
        let shape = grid.field_shape(intervals)?;
        let voxels = grid.voxel_count();
        for (m, r) in rows.iter().enumerate() {
            if r.interval >= intervals {
                return Err(Error::invalid(format!("row {m} interval out of range")));
            }
            if r.entries.iter().any(|&(v, d)| v >= voxels || !(d > 0.0) || !d.is_finite()) {
                return Err(Error::invalid(format!(
                    "row {m} has a voxel out of range or a non-positive weight"
                )));
            }
        }
        rows.sort_by_key(|r| r.interval);
        Ok(SensingOperator {
            grid: grid.clone(),
            intervals,
            shape,
            rows,
        })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn field_shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn rows(&self) -> &[OperatorRow] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Row counts per interval.
    pub fn interval_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.intervals];
        for r in &self.rows {
            counts[r.interval] += 1;
        }
        counts
    }

    pub fn links(&self) -> Vec<Link> {
        self.rows.iter().filter_map(|r| r.link).collect()
    }

    #[inline]
    fn field_index(&self, voxel: usize, interval: usize) -> usize {
        voxel * self.intervals + interval
    }

    pub fn apply(&self, x: &DenseTensor) -> Result<Vec<f64>> {
        self.check_field(x)?;
        Ok(self.apply_slice(x.vectorize()))
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                r.entries
                    .iter()
                    .map(|&(v, d)| d * x[self.field_index(v, r.interval)])
                    .sum()
            })
            .collect()
    }

    pub fn apply_adjoint(&self, y: &[f64]) -> Result<DenseTensor> {
        if y.len() != self.rows.len() {
            return Err(Error::invalid(format!(
                "measurement vector has length {}, operator has {} rows",
                y.len(),
                self.rows.len()
            )));
        }
        let values = self.adjoint_slice(y);
        DenseTensor::from_vec(self.shape.clone(), values)
    }

    pub(crate) fn adjoint_slice(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.len()];
        for (r, &ym) in self.rows.iter().zip(y) {
            if ym == 0.0 {
                continue;
            }
            for &(v, d) in &r.entries {
                out[self.field_index(v, r.interval)] += d * ym;
            }
        }
        out
    }

    /// `A* A x` on raw vectorized fields.
    pub(crate) fn normal_slice(&self, x: &[f64]) -> Vec<f64> {
        self.adjoint_slice(&self.apply_slice(x))
    }

    /// Largest singular value, by power iteration on `A* A` until the
    /// eigen-residual drops below `1e-6` relative. Zero for an operator with
    /// no nonzero entries.
    pub fn operator_norm(&self) -> f64 {
        let n = self.shape.len();
        if self.rows.iter().all(|r| r.entries.is_empty()) {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERS {
            let w = self.normal_slice(&v);
            lambda = dot(&v, &w);
            if lambda <= 0.0 {
                return 0.0;
            }
            let resid: f64 = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - lambda * vi).powi(2))
                .sum::<f64>()
                .sqrt();
            v = w;
            normalize(&mut v);
            if resid <= POWER_TOL * lambda {
                break;
            }
        }
        lambda.sqrt()
    }

    /// Materializes the `M x (N1 N2 N3 N4)` matrix, columns in vectorization
    /// order.
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows.len(), self.shape.len());
        for (i, r) in self.rows.iter().enumerate() {
            for &(v, d) in &r.entries {
                m[(i, self.field_index(v, r.interval))] += d;
            }
        }
        m
    }

    /// Debug dump: `row,time_index,voxel_flat_index,delta`, where the flat
    /// index addresses the full loss field.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,time_index,voxel_flat_index,delta")?;
        for (i, r) in self.rows.iter().enumerate() {
            for &(v, d) in &r.entries {
                writeln!(w, "{i},{},{},{d}", r.interval, self.field_index(v, r.interval))?;
            }
        }
        Ok(())
    }

    fn check_field(&self, x: &DenseTensor) -> Result<()> {
        if x.shape() != &self.shape {
            return Err(Error::invalid(format!(
                "field shape {} does not match operator shape {}",
                x.shape(),
                self.shape
            )));
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
