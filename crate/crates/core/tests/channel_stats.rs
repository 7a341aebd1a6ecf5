mod common;

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use wtomo::channel::{
    admissible_pairs, measure_shadowing, received_power, recover_shadowing, sample_links, PathLossParams,
};
use wtomo::experiments::{build_truth, Scenario};
use wtomo::geometry::{place_nodes, trace_link, OperatorRow, SensingOperator, VoxelGrid};
use wtomo::{DenseTensor, TensorShape};

#[test]
fn pair_frequencies_are_uniform() {
    let grid = VoxelGrid::unit([10, 10, 1]).unwrap();
    let nodes = place_nodes(&grid, 40).unwrap();
    let pairs = admissible_pairs(&nodes, false);
    assert_eq!(pairs.len(), 600);
    let draws = 10_000u64;
    let m = 60;
    let mut counts: HashMap<(usize, usize), u64> = pairs.iter().map(|&p| (p, 0)).collect();
    for seed in 0..draws {
        let links = sample_links(&nodes, &[m], seed).unwrap();
        let mut seen = std::collections::HashSet::new();
        for l in links {
            let key = (l.tx.min(l.rx), l.tx.max(l.rx));
            assert!(seen.insert(key), "pair repeated within an interval");
            *counts.get_mut(&key).expect("sampled pair is admissible") += 1;
        }
    }
    let p = m as f64 / pairs.len() as f64;
    let mean = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    let within3 = counts.values().filter(|&&c| (c as f64 - mean).abs() <= 3.0 * sigma).count();
    assert!(counts.values().all(|&c| (c as f64 - mean).abs() <= 5.0 * sigma));
    assert!(within3 as f64 >= 0.99 * pairs.len() as f64, "{within3} of 600 within 3 sigma");
}

#[test]
fn transmitter_choice_is_a_fair_coin() {
    let grid = VoxelGrid::unit([10, 10, 1]).unwrap();
    let nodes = place_nodes(&grid, 40).unwrap();
    let mut lower_first = 0u64;
    let total = 2000 * 60;
    for seed in 0..2000 {
        for l in sample_links(&nodes, &[60], seed).unwrap() {
            lower_first += u64::from(l.tx < l.rx);
        }
    }
    let frac = lower_first as f64 / total as f64;
    assert!((frac - 0.5).abs() <= 5.0 * (0.25 / total as f64).sqrt());
}

fn point_rows(count: usize) -> SensingOperator {
    let grid = VoxelGrid::unit([1, 1, 1]).unwrap();
    let rows = (0..count)
        .map(|_| OperatorRow {
            interval: 0,
            entries: vec![(0, 1.0)],
            link: None,
        })
        .collect();
    SensingOperator::from_rows(&grid, 1, rows).unwrap()
}

#[test]
fn noise_has_the_requested_moments() {
    let op = point_rows(100_000);
    let zero = DenseTensor::zeros(TensorShape::new(&[1, 1]).unwrap());
    let y = measure_shadowing(&op, &zero, 1.0, 99).unwrap().y;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 0.02, "{mean}");
    assert!((0.99..=1.01).contains(&std), "{std}");
}

#[test]
fn noise_entries_are_uncorrelated_across_seeds() {
    let rows = 5;
    let op = point_rows(rows);
    let zero = DenseTensor::zeros(TensorShape::new(&[1, 1]).unwrap());
    let draws = 10_000;
    let samples: Vec<Vec<f64>> = (0..draws)
        .map(|s| measure_shadowing(&op, &zero, 1.0, s).unwrap().y)
        .collect();
    let tol = 5.0 / (draws as f64).sqrt();
    for i in 0..rows {
        for j in 0..rows {
            let cov = samples.iter().map(|y| y[i] * y[j]).sum::<f64>() / draws as f64;
            if i == j {
                assert!((cov - 1.0).abs() <= 0.1, "var {cov}");
            } else {
                assert!(cov.abs() <= tol, "cov({i},{j}) = {cov}");
            }
        }
    }
}

#[test]
fn measured_shadowing_equals_the_received_power_model() {
    let sc = Scenario::preset("d2").unwrap();
    let truth = build_truth(&sc).unwrap();
    let grid = sc.grid_geometry().unwrap();
    let nodes = sc.node_set().unwrap();
    let links = sample_links(&nodes, &[200], 5).unwrap();
    let op = SensingOperator::build(&grid, &nodes, &links, 1).unwrap();
    let z1 = op.apply(&truth).unwrap();
    let params = PathLossParams::new(20.0, 3.0, 40.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (l, &z) in links.iter().zip(&z1) {
        let d = nodes.distance(l.tx, l.rx);
        let p = received_power(&params, d, z, &mut rng).unwrap();
        let y = recover_shadowing(&params, p, d).unwrap();
        assert!((y - z).abs() <= 1e-10);
    }
    let noiseless = measure_shadowing(&op, &truth, 0.0, 1).unwrap();
    assert_eq!(noiseless.y, z1);
}

#[test]
fn link_through_the_obstruction_loses_thirty_db() {
    let sc = Scenario::preset("d2").unwrap();
    let truth = build_truth(&sc).unwrap();
    let grid = sc.grid_geometry().unwrap();
    // straight along row n2 = 4, through x = 3..6 of the 3x3 block
    let row = trace_link(&grid, [0.0, 4.5, 0.5], [10.0, 4.5, 0.5]);
    let z1: f64 = row
        .iter()
        .map(|&(v, d)| {
            let c = grid.voxel_coords(v);
            d * truth.get(&[c[0], c[1]])
        })
        .sum();
    assert!((z1 - 30.0).abs() <= 1e-12);
    let params = PathLossParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let clear = received_power(&params, 10.0, 0.0, &mut rng).unwrap();
    let blocked = received_power(&params, 10.0, z1, &mut rng).unwrap();
    assert!((clear - blocked - 30.0).abs() <= 1e-12);
}

#[test]
fn measurements_are_deterministic() {
    let sc = Scenario::preset("d4").unwrap();
    let setup = wtomo::experiments::Setup::new(&sc.with_eta(1.0).unwrap()).unwrap();
    let a = setup.trial(3).unwrap();
    let b = setup.trial(3).unwrap();
    assert_eq!(a.measurements, b.measurements);
    assert_eq!(a.measurements.interval_counts, vec![300, 300, 300]);
    assert_ne!(setup.trial(4).unwrap().measurements.y, a.measurements.y);
}
