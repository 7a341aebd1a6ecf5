//! Received-power model and synthesis of measured shadowing losses.
//!
//! A link from `v_i` to `v_j` receives
//! `P = P_TX - (10 alpha log10(dist) + beta) - (Z1 + Z2)` where `Z1` is the
//! shadowing loss (the line integral of the loss field) and `Z2` zero-mean
//! Gaussian fading with standard deviation `eta`. Removing the known terms
//! leaves the measured shadowing loss `y = Z1 + Z2`, which is all the
//! solvers see.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Link, NodeSet, SensingOperator};
use crate::seeds::derive_seed;
use crate::tensor::DenseTensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLossParams {
    pub tx_power_dbm: f64,
    pub alpha: f64,
    pub beta_db: f64,
    pub noise_std_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            tx_power_dbm: 0.0,
            alpha: 2.0,
            beta_db: 0.0,
            noise_std_db: 0.0,
        }
    }
}

impl PathLossParams {
    pub fn new(tx_power_dbm: f64, alpha: f64, beta_db: f64, noise_std_db: f64) -> Result<Self> {
        if !(alpha >= 2.0) {
            return Err(Error::invalid(format!("path-loss exponent must be >= 2, got {alpha}")));
        }
        if !(noise_std_db >= 0.0) {
            return Err(Error::invalid(format!("noise std must be >= 0, got {noise_std_db}")));
        }
        if !tx_power_dbm.is_finite() || !beta_db.is_finite() || !noise_std_db.is_finite() {
            return Err(Error::invalid("path-loss parameters must be finite"));
        }
        Ok(PathLossParams {
            tx_power_dbm,
            alpha,
            beta_db,
            noise_std_db,
        })
    }

    /// Large-scale path loss in dB at distance `dist` (meters).
    pub fn mean_path_loss(&self, dist: f64) -> Result<f64> {
        if !(dist > 0.0) {
            return Err(Error::invalid(format!("link distance must be positive, got {dist}")));
        }
        Ok(10.0 * self.alpha * dist.log10() + self.beta_db)
    }
}

/// Received power in dBm for a link of length `dist` carrying shadowing loss
/// `z1`; fading is drawn from `rng` when the noise std is positive.
pub fn received_power<R: Rng + ?Sized>(
    params: &PathLossParams,
    dist: f64,
    z1: f64,
    rng: &mut R,
) -> Result<f64> {
    let path_loss = params.mean_path_loss(dist)?;
    let z2 = if params.noise_std_db > 0.0 {
        Normal::new(0.0, params.noise_std_db)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    Ok(params.tx_power_dbm - path_loss - (z1 + z2))
}

/// Measured shadowing loss `P_TX - P - mean_path_loss(dist)`.
pub fn recover_shadowing(params: &PathLossParams, received_dbm: f64, dist: f64) -> Result<f64> {
    Ok(params.tx_power_dbm - received_dbm - params.mean_path_loss(dist)?)
}

/// Unordered node pairs `(i, j)`, `i < j`, that may form a link. Pairs on a
/// common face are left out unless `allow_same_side` is set.
pub fn admissible_pairs(nodes: &NodeSet, allow_same_side: bool) -> Vec<(usize, usize)> {
    let n = nodes.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if allow_same_side || !nodes.same_side(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Draws `m_per_interval[t]` distinct pairs for every interval `t`,
/// uniformly without replacement among nodes on different sides, and picks
/// the transmitter of each pair by a fair coin. Each interval uses its own
/// stream derived from `seed`.
pub fn sample_links(nodes: &NodeSet, m_per_interval: &[usize], seed: u64) -> Result<Vec<Link>> {
    sample_links_from(&admissible_pairs(nodes, false), m_per_interval, seed)
}

pub fn sample_links_from(
    pairs: &[(usize, usize)],
    m_per_interval: &[usize],
    seed: u64,
) -> Result<Vec<Link>> {
    if m_per_interval.is_empty() {
        return Err(Error::invalid("need at least one interval"));
    }
    let mut links = Vec::with_capacity(m_per_interval.iter().sum());
    for (t, &m) in m_per_interval.iter().enumerate() {
        if m == 0 || m > pairs.len() {
            return Err(Error::invalid(format!(
                "interval {t}: requested {m} links, {} admissible pairs available",
                pairs.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        for k in index::sample(&mut rng, pairs.len(), m) {
            let (a, b) = pairs[k];
            let (tx, rx) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            links.push(Link { tx, rx, interval: t });
        }
    }
    Ok(links)
}

/// Stacked measured shadowing losses with per-row link metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub y: Vec<f64>,
    pub intervals: Vec<usize>,
    pub links: Vec<Option<Link>>,
    pub interval_counts: Vec<usize>,
    pub noise_std: f64,
    pub seed: u64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `m,time_index,tx,rx,y_dB` preceded by `#` lines recording eta and the
    /// seed.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# eta={}", self.noise_std)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "m,time_index,tx,rx,y_dB")?;
        for (m, (&y, (&t, link))) in self
            .y
            .iter()
            .zip(self.intervals.iter().zip(&self.links))
            .enumerate()
        {
            match link {
                Some(l) => writeln!(w, "{m},{t},{},{},{y}", l.tx, l.rx)?,
                None => writeln!(w, "{m},{t},,,{y}")?,
            }
        }
        Ok(())
    }
}

/// `y = A(truth) + w` with i.i.d. `N(0, eta^2)` noise. Noise for interval
/// `t` comes from a stream derived from `(seed, t)`.
pub fn measure_shadowing(
    op: &SensingOperator,
    truth: &DenseTensor,
    eta: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("noise std must be finite and >= 0, got {eta}")));
    }
    let mut y = op.apply(truth)?;
    if eta > 0.0 {
        let normal = Normal::new(0.0, eta).map_err(|e| Error::invalid(e.to_string()))?;
        let mut start = 0;
        for (t, &count) in op.interval_counts().iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            for v in &mut y[start..start + count] {
                *v += normal.sample(&mut rng);
            }
            start += count;
        }
    }
    Ok(MeasurementSet {
        y,
        intervals: op.rows().iter().map(|r| r.interval).collect(),
        links: op.rows().iter().map(|r| r.link).collect(),
        interval_counts: op.interval_counts(),
        noise_std: eta,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{place_nodes, VoxelGrid};

    fn nodes40() -> NodeSet {
        place_nodes(&VoxelGrid::unit([10, 10, 1]).unwrap(), 40).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(PathLossParams::new(0.0, 1.5, 0.0, 0.0).is_err());
        assert!(PathLossParams::new(0.0, 2.0, 0.0, -1.0).is_err());
        assert!(PathLossParams::new(20.0, 3.0, 40.0, 2.0).is_ok());
        assert!(PathLossParams::default().mean_path_loss(0.0).is_err());
    }

    #[test]
    fn received_power_examples() {
        let p = PathLossParams { tx_power_dbm: 13.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(received_power(&p, 1.0, 0.0, &mut rng).unwrap(), 13.0);
        assert!((received_power(&p, 10.0, 0.0, &mut rng).unwrap() - (13.0 - 20.0)).abs() < 1e-12);
        let clear = received_power(&p, 7.0, 0.0, &mut rng).unwrap();
        let blocked = received_power(&p, 7.0, 30.0, &mut rng).unwrap();
        assert!((clear - blocked - 30.0).abs() < 1e-12);
        assert!(received_power(&p, -1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn recover_inverts_received() {
        let p = PathLossParams::new(-5.0, 3.2, 12.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for &(d, z1) in &[(1.0, 0.0), (3.3, 12.5), (14.1, 30.0)] {
            let pr = received_power(&p, d, z1, &mut rng).unwrap();
            assert!((recover_shadowing(&p, pr, d).unwrap() - z1).abs() < 1e-12);
        }
        let q = PathLossParams { alpha: 4.0, ..Default::default() };
        assert_eq!(recover_shadowing(&q, 0.0, 1.0).unwrap(), 0.0);
        assert!(recover_shadowing(&q, 0.0, 0.0).is_err());
    }

    #[test]
    fn admissible_pair_count() {
        // C(40,2) - 4 C(10,2)
        assert_eq!(admissible_pairs(&nodes40(), false).len(), 600);
        assert_eq!(admissible_pairs(&nodes40(), true).len(), 780);
    }

    #[test]
    fn sampling_basics() {
        let g = VoxelGrid::unit([1, 1, 1]).unwrap();
        let four = place_nodes(&g, 4).unwrap();
        let l = sample_links(&four, &[1], 3).unwrap();
        assert_eq!(l.len(), 1);
        assert_ne!(l[0].tx, l[0].rx);
        assert!(!four.same_side(l[0].tx, l[0].rx));

        let nodes = nodes40();
        let a = sample_links(&nodes, &[60], 11).unwrap();
        assert_eq!(a, sample_links(&nodes, &[60], 11).unwrap());
        assert_ne!(a, sample_links(&nodes, &[60], 12).unwrap());
        let mut keys: Vec<(usize, usize)> =
            a.iter().map(|l| (l.tx.min(l.rx), l.tx.max(l.rx))).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 60);
        assert!(sample_links(&nodes, &[601], 1).is_err());
        assert!(sample_links(&nodes, &[0], 1).is_err());
        assert!(sample_links(&nodes, &[], 1).is_err());
    }

    #[test]
    fn intervals_sampled_independently() {
        let l = sample_links(&nodes40(), &[5, 7, 3], 9).unwrap();
        let counts: Vec<usize> =
            (0..3).map(|t| l.iter().filter(|x| x.interval == t).count()).collect();
        assert_eq!(counts, vec![5, 7, 3]);
    }

    #[test]
    fn csv_header_records_noise_and_seed() {
        let g = VoxelGrid::unit([10, 10, 1]).unwrap();
        let nodes = nodes40();
        let links = sample_links(&nodes, &[3], 1).unwrap();
        let op = SensingOperator::build(&g, &nodes, &links, 1).unwrap();
        let truth = DenseTensor::filled(op.field_shape().clone(), 1.0);
        let ms = measure_shadowing(&op, &truth, 0.5, 42).unwrap();
        let mut buf = Vec::new();
        ms.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# eta=0.5");
        assert_eq!(lines[1], "# seed=42");
        assert_eq!(lines[2], "m,time_index,tx,rx,y_dB");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn noiseless_measurement_is_exact() {
        let g = VoxelGrid::unit([10, 10, 1]).unwrap();
        let nodes = nodes40();
        let links = sample_links(&nodes, &[20], 5).unwrap();
        let op = SensingOperator::build(&g, &nodes, &links, 1).unwrap();
        let truth = DenseTensor::from_fn(op.field_shape().clone(), |k| (k[0] + 2 * k[1]) as f64);
        let ms = measure_shadowing(&op, &truth, 0.0, 1).unwrap();
        assert_eq!(ms.y, op.apply(&truth).unwrap());
        let zero = DenseTensor::zeros(op.field_shape().clone());
        assert!(measure_shadowing(&op, &zero, 0.0, 1).unwrap().y.iter().all(|&v| v == 0.0));
        assert!(measure_shadowing(&op, &zero, -1.0, 1).is_err());
    }
}
