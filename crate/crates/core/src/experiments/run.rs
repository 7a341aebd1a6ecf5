use std::io::Write;

use rayon::prelude::*;

use super::scenario::{build_truth, Scenario};
use crate::channel::{admissible_pairs, measure_shadowing, sample_links_from, MeasurementSet};
use crate::error::{Error, Result};
use crate::geometry::SensingOperator;
use crate::seeds::{derive_seed, stream};
use crate::solvers::{solve, Solver, SolverReport};
use crate::tensor::DenseTensor;

/// Normalized error of each estimate against `truth`, `||X_hat - X|| / ||X||`.
pub fn normalized_errors(truth: &DenseTensor, estimates: &[DenseTensor]) -> Result<Vec<f64>> {
    let norm = truth.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::invalid("normalized error is undefined for a zero truth field"));
    }
    estimates
        .iter()
        .map(|e| Ok(truth.distance(e)? / norm))
        .collect()
}

/// Mean normalized error over a set of runs.
pub fn reconstruction_error(truth: &DenseTensor, estimates: &[DenseTensor]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::invalid("need at least one estimate"));
    }
    let errs = normalized_errors(truth, estimates)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Synthetic data for one run: the traced operator and its measurements.
#[derive(Clone, Debug)]
pub struct Trial {
    pub run: usize,
    pub seed: u64,
    pub operator: SensingOperator,
    pub measurements: MeasurementSet,
}

/// Seed of run `run` (1-based) under base seed `base`.
pub fn run_seed(base: u64, run: usize) -> u64 {
    derive_seed(base, run as u64)
}

/// Prepared geometry shared by every run of a scenario.
#[derive(Clone, Debug)]
pub struct Setup {
    pub scenario: Scenario,
    pub truth: DenseTensor,
    grid: crate::geometry::VoxelGrid,
    nodes: crate::geometry::NodeSet,
    pairs: Vec<(usize, usize)>,
}

impl Setup {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let grid = scenario.grid_geometry()?;
        let nodes = scenario.node_set()?;
        let pairs = admissible_pairs(&nodes, scenario.allow_same_side);
        let truth = build_truth(scenario)?;
        Ok(Setup {
            scenario: scenario.clone(),
            truth,
            grid,
            nodes,
            pairs,
        })
    }

    pub fn admissible_pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Draws links and noise for run `run` (1-based). The link and noise
    /// streams depend only on the base seed and the run index, so sweeps
    /// over M or eta reuse the same random streams at every grid point.
    pub fn trial(&self, run: usize) -> Result<Trial> {
        let seed = run_seed(self.scenario.seed, run);
        let counts = self.scenario.measurements_per_interval()?;
        let links = sample_links_from(&self.pairs, &counts, derive_seed(seed, stream::LINKS))?;
        let operator = SensingOperator::build(&self.grid, &self.nodes, &links, self.scenario.intervals())?;
        let measurements = measure_shadowing(
            &operator,
            &self.truth,
            self.scenario.eta,
            derive_seed(seed, stream::NOISE),
        )?;
        Ok(Trial {
            run,
            seed,
            operator,
            measurements,
        })
    }
}

#[derive(Clone, Debug)]
pub enum RunOutcome {
    Solved {
        epsilon: f64,
        iterations: usize,
        converged: bool,
        wall_ms: f64,
    },
    Failed {
        message: String,
    },
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub outcome: RunOutcome,
    /// Kept only when the caller asked for field dumps.
    pub estimate: Option<DenseTensor>,
}

impl RunRecord {
    pub fn epsilon(&self) -> Option<f64> {
        match self.outcome {
            RunOutcome::Solved { epsilon, .. } => Some(epsilon),
            RunOutcome::Failed { .. } => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.outcome {
            RunOutcome::Solved { converged: true, .. } => "ok",
            RunOutcome::Solved { converged: false, .. } => "max_iters",
            RunOutcome::Failed { .. } => "failed",
        }
    }
}

/// All runs of one solver at one `(M, eta)` grid point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub solver: Solver,
    pub measurements: usize,
    pub gamma: f64,
    pub eta: f64,
    pub runs: Vec<RunRecord>,
}

impl PointResult {
    pub fn epsilons(&self) -> Vec<f64> {
        self.runs.iter().filter_map(RunRecord::epsilon).collect()
    }

    /// Mean normalized error over the runs that produced an estimate. Failed
    /// runs are excluded, never imputed.
    pub fn epsilon_mean(&self) -> f64 {
        let e = self.epsilons();
        if e.is_empty() {
            f64::NAN
        } else {
            e.iter().sum::<f64>() / e.len() as f64
        }
    }

    /// Sample standard deviation (`n - 1` denominator); zero for one run.
    pub fn epsilon_std(&self) -> f64 {
        let e = self.epsilons();
        if e.len() < 2 {
            return if e.is_empty() { f64::NAN } else { 0.0 };
        }
        let mean = self.epsilon_mean();
        let var = e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (e.len() - 1) as f64;
        var.sqrt()
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.epsilon().is_none())
    }

    pub fn mean_wall_ms(&self) -> f64 {
        let w: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| match r.outcome {
                RunOutcome::Solved { wall_ms, .. } => Some(wall_ms),
                RunOutcome::Failed { .. } => None,
            })
            .collect();
        if w.is_empty() {
            f64::NAN
        } else {
            w.iter().sum::<f64>() / w.len() as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub scenario: String,
    pub order: usize,
    /// Ordered by grid point, then solver in scenario order.
    pub points: Vec<PointResult>,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
    pub keep_estimates: bool,
    /// Fill the `wall_ms` column. Off by default so that repeated runs give
    /// byte-identical CSVs.
    pub record_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            keep_estimates: false,
            record_time: false,
        }
    }
}

impl SweepResult {
    pub fn has_failures(&self) -> bool {
        self.points.iter().any(|p| p.failures().next().is_some())
    }

    /// One row per run: `scenario,solver,D,M,gamma,eta,run,epsilon_i,
    /// epsilon_mean,epsilon_std,iters,wall_ms,status`.
    pub fn write_csv<W: Write>(&self, mut w: W, options: &RunOptions) -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,solver,D,M,gamma,eta,run,epsilon_i,epsilon_mean,epsilon_std,iters,wall_ms,status"
        )?;
        for p in &self.points {
            let (mean, std) = (p.epsilon_mean(), p.epsilon_std());
            for r in &p.runs {
                let (eps, iters, wall) = match r.outcome {
                    RunOutcome::Solved {
                        epsilon,
                        iterations,
                        wall_ms,
                        ..
                    } => (
                        epsilon.to_string(),
                        iterations.to_string(),
                        if options.record_time { format!("{wall_ms:.3}") } else { String::new() },
                    ),
                    RunOutcome::Failed { .. } => (String::new(), String::new(), String::new()),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    self.scenario,
                    p.solver,
                    self.order,
                    p.measurements,
                    p.gamma,
                    p.eta,
                    r.run,
                    eps,
                    fmt_stat(mean),
                    fmt_stat(std),
                    iters,
                    wall,
                    r.status()
                )?;
            }
        }
        Ok(())
    }

    /// One row per grid point and solver.
    pub fn write_summary_csv<W: Write>(&self, mut w: W, options: &RunOptions) -> std::io::Result<()> {
        writeln!(w, "scenario,solver,D,M,gamma,eta,runs,failed,epsilon_mean,epsilon_std,wall_ms_mean")?;
        for p in &self.points {
            let wall = if options.record_time { format!("{:.3}", p.mean_wall_ms()) } else { String::new() };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.scenario,
                p.solver,
                self.order,
                p.measurements,
                p.gamma,
                p.eta,
                p.runs.len(),
                p.failures().count(),
                fmt_stat(p.epsilon_mean()),
                fmt_stat(p.epsilon_std()),
                wall
            )?;
        }
        Ok(())
    }

    /// Failed runs with their seeds and messages.
    pub fn write_failures_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario,solver,M,eta,run,seed,message")?;
        for p in &self.points {
            for r in p.failures() {
                if let RunOutcome::Failed { message } = &r.outcome {
                    let message = message.replace(['"', '\n'], " ");
                    writeln!(
                        w,
                        "{},{},{},{},{},{},\"{}\"",
                        self.scenario, p.solver, p.measurements, p.eta, r.run, r.seed, message
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn fmt_stat(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn solve_record(
    setup: &Setup,
    trial: &Trial,
    solver: Solver,
    keep: bool,
) -> Result<RunRecord> {
    let cfg = setup.scenario.solver;
    let outcome = solve(solver, &trial.operator, &trial.measurements.y, &cfg);
    let record = match outcome {
        Ok(SolverReport {
            estimate,
            iterations,
            converged,
            wall_time,
            ..
        }) => {
            let epsilon = normalized_errors(&setup.truth, std::slice::from_ref(&estimate))?[0];
            RunRecord {
                run: trial.run,
                seed: trial.seed,
                outcome: RunOutcome::Solved {
                    epsilon,
                    iterations,
                    converged,
                    wall_ms: wall_time.as_secs_f64() * 1e3,
                },
                estimate: keep.then_some(estimate),
            }
        }
        Err(e @ Error::SolverFailure { .. }) => RunRecord {
            run: trial.run,
            seed: trial.seed,
            outcome: RunOutcome::Failed { message: e.to_string() },
            estimate: None,
        },
        Err(e) => return Err(e),
    };
    Ok(record)
}

/// Runs every selected solver on the same data for each run of the
/// scenario, at its own `(M, eta)`.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<SweepResult> {
    run_points(std::slice::from_ref(scenario), options)
}

/// `scenario` at each total measurement count, every other setting fixed.
pub fn sweep_measurements(scenario: &Scenario, totals: &[usize], options: &RunOptions) -> Result<SweepResult> {
    if totals.is_empty() {
        return Err(Error::invalid("measurement list is empty"));
    }
    let variants = totals
        .iter()
        .map(|&m| scenario.clone().with_total_measurements(m))
        .collect::<Result<Vec<_>>>()?;
    run_points(&variants, options)
}

/// `scenario` at each noise level, every other setting fixed.
pub fn sweep_noise(scenario: &Scenario, etas: &[f64], options: &RunOptions) -> Result<SweepResult> {
    if etas.is_empty() {
        return Err(Error::invalid("noise list is empty"));
    }
    let variants = etas
        .iter()
        .map(|&eta| scenario.clone().with_eta(eta))
        .collect::<Result<Vec<_>>>()?;
    run_points(&variants, options)
}

fn run_points(variants: &[Scenario], options: &RunOptions) -> Result<SweepResult> {
    let first = variants.first().ok_or_else(|| Error::invalid("nothing to run"))?;
    let setups = variants.iter().map(Setup::new).collect::<Result<Vec<_>>>()?;
    for s in &setups {
        let counts = s.scenario.measurements_per_interval()?;
        if let Some(&m) = counts.iter().find(|&&m| m > s.admissible_pair_count()) {
            return Err(Error::invalid(format!(
                "{m} links per interval requested but only {} admissible pairs exist",
                s.admissible_pair_count()
            )));
        }
    }

    let jobs: Vec<(usize, usize)> = setups
        .iter()
        .enumerate()
        .flat_map(|(p, s)| (1..=s.scenario.runs).map(move |r| (p, r)))
        .collect();
    let work = |&(p, run): &(usize, usize)| -> Result<Vec<RunRecord>> {
        let setup = &setups[p];
        let trial = setup.trial(run)?;
        setup
            .scenario
            .solvers
            .iter()
            .map(|&solver| solve_record(setup, &trial, solver, options.keep_estimates))
            .collect()
    };
    let results: Vec<Vec<RunRecord>> = if options.jobs <= 1 {
        jobs.iter().map(work).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(work).collect::<Result<_>>())?
    };

    let mut points = Vec::new();
    let mut cursor = results.into_iter();
    for setup in &setups {
        let sc = &setup.scenario;
        let mut per_solver: Vec<Vec<RunRecord>> = vec![Vec::with_capacity(sc.runs); sc.solvers.len()];
        for records in cursor.by_ref().take(sc.runs) {
            for (slot, rec) in per_solver.iter_mut().zip(records) {
                slot.push(rec);
            }
        }
        for (&solver, runs) in sc.solvers.iter().zip(per_solver) {
            points.push(PointResult {
                solver,
                measurements: sc.total_measurements(),
                gamma: sc.gamma(),
                eta: sc.eta,
                runs,
            });
        }
    }
    Ok(SweepResult {
        scenario: first.name.clone(),
        order: first.order(),
        points,
    })
}
