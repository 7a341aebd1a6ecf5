use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wtomo::experiments::{
    self, io::save_tensor, spectrum_report, PointResult, RunOptions, Scenario, Setup, SweepResult,
};
use wtomo::solvers::{solve, Solver};
use wtomo::Error;

#[derive(Parser, Debug)]
#[command(name = "wtomo", version, about = "Simulate and reconstruct shadowing-loss fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every selected solver over N_run seeded trials.
    Run {
        #[command(flatten)]
        common: Common,
        /// Total measurements (split evenly over the time intervals).
        #[arg(long)]
        m: Option<usize>,
        /// Noise standard deviation in dB.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Sweep the total number of measurements.
    SweepM {
        #[command(flatten)]
        common: Common,
        /// Comma-separated measurement totals.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        /// Noise standard deviation in dB.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Sweep the noise standard deviation.
    SweepNoise {
        #[command(flatten)]
        common: Common,
        /// Comma-separated noise levels in dB.
        #[arg(long, value_delimiter = ',', required = true)]
        eta: Vec<f64>,
        /// Total measurements (split evenly over the time intervals).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Reconstruct a single trial and write the solver traces.
    Recover {
        #[command(flatten)]
        common: Common,
        /// Total measurements (split evenly over the time intervals).
        #[arg(long)]
        m: Option<usize>,
        /// Noise standard deviation in dB.
        #[arg(long)]
        eta: Option<f64>,
        /// Trial index (1-based) whose links and noise are drawn.
        #[arg(long, default_value_t = 1)]
        run: usize,
    },
    /// Ordered DCT and singular value spectra of the truth and a vector
    /// estimate, with truncation-error curves.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Total measurements (split evenly over the time intervals).
        #[arg(long)]
        m: Option<usize>,
        /// Noise standard deviation in dB.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        run: usize,
    },
    /// List the built-in scenarios.
    Presets,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file, with or without the `.scenario` extension, or a preset
    /// name (d2, d3, d4).
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated solvers: vector, matrix, tensor (aliases DCT, Matrix,
    /// Tensor).
    #[arg(long, value_delimiter = ',')]
    solver: Vec<Solver>,
    /// Output directory.
    #[arg(long, env = "WTOMO_OUT", default_value = "results")]
    out: PathBuf,
    /// Base seed; overrides the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials per grid point (reduced fidelity below 50).
    #[arg(long)]
    runs: Option<usize>,
    /// Iteration cap for every solver.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Write every estimate in the tensor dump format.
    #[arg(long)]
    dump_fields: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Fill the wall_ms columns (makes outputs run-dependent).
    #[arg(long)]
    record_time: bool,
    /// Print nothing but errors.
    #[arg(short, long, conflicts_with = "verbose")]
    quiet: bool,
    /// Print the resolved scenario before running.
    #[arg(short, long)]
    verbose: bool,
}

struct Context {
    scenario: Scenario,
    out: PathBuf,
    options: RunOptions,
    quiet: bool,
    verbose: bool,
}

impl Common {
    fn resolve(&self, m: Option<usize>, eta: Option<f64>) -> Result<Context, Error> {
        let mut sc = Scenario::load(&self.scenario)?;
        if !self.solver.is_empty() {
            let mut solvers = self.solver.clone();
            solvers.dedup();
            sc.solvers = solvers;
        }
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(runs) = self.runs {
            sc.runs = runs;
        }
        if let Some(it) = self.max_iters {
            sc.solver.max_iters = it;
        }
        if let Some(m) = m {
            sc = sc.with_total_measurements(m)?;
        }
        if let Some(eta) = eta {
            sc = sc.with_eta(eta)?;
        }
        if self.jobs == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        sc.validate()?;
        prepare_out_dir(&self.out)?;
        Ok(Context {
            scenario: sc,
            out: self.out.clone(),
            options: RunOptions {
                jobs: self.jobs,
                keep_estimates: self.dump_fields,
                record_time: self.record_time,
            },
            quiet: self.quiet,
            verbose: self.verbose,
        })
    }
}

fn prepare_out_dir(dir: &Path) -> Result<(), Error> {
    let fail = |e: io::Error| {
        Error::InvalidArgument(format!(
            "output directory {} is not writable ({e}); pass --out or set WTOMO_OUT",
            dir.display()
        ))
    };
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".wtomo-write-test");
    fs::write(&probe, b"").map_err(fail)?;
    let _ = fs::remove_file(probe);
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<(), Error> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::write(path, buf).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn eta_label(eta: f64) -> String {
    eta.to_string().replace('.', "p")
}

// Writes `<stem>.csv`, `<stem>_summary.csv`, field dumps and, when any run
// failed, `<stem>_failures.csv`. Returns whether there were failures.
fn emit_sweep(ctx: &Context, stem: &str, result: &SweepResult) -> Result<bool, Error> {
    let results = ctx.out.join(format!("{stem}.csv"));
    write_file(&results, |w| result.write_csv(w, &ctx.options))?;
    write_file(&ctx.out.join(format!("{stem}_summary.csv")), |w| {
        result.write_summary_csv(w, &ctx.options)
    })?;
    if ctx.options.keep_estimates {
        let dir = ctx.out.join("fields");
        fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let truth = experiments::build_truth(&ctx.scenario)?;
        save_tensor(&truth, &dir.join(format!("{}_truth.csv", result.scenario)))?;
        for p in &result.points {
            for r in &p.runs {
                if let Some(est) = &r.estimate {
                    let name = format!(
                        "{stem}_{}_M{}_eta{}_run{}.csv",
                        p.solver,
                        p.measurements,
                        eta_label(p.eta),
                        r.run
                    );
                    save_tensor(est, &dir.join(name))?;
                }
            }
        }
    }
    let failed = result.has_failures();
    if failed {
        let manifest = ctx.out.join(format!("{stem}_failures.csv"));
        write_file(&manifest, |w| result.write_failures_csv(w))?;
        eprintln!("some runs failed; see {}", manifest.display());
    }
    if !ctx.quiet {
        print_summary(&result.points);
        println!("wrote {}", results.display());
    }
    Ok(failed)
}

fn print_summary(points: &[PointResult]) {
    println!("{:<8} {:>6} {:>8} {:>6} {:>10} {:>10} {:>6}", "solver", "M", "gamma", "eta", "eps_mean", "eps_std", "failed");
    for p in points {
        println!(
            "{:<8} {:>6} {:>8.4} {:>6} {:>10.5} {:>10.5} {:>6}",
            p.solver.name(),
            p.measurements,
            p.gamma,
            p.eta,
            p.epsilon_mean(),
            p.epsilon_std(),
            p.failures().count()
        );
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Presets => {
            for name in Scenario::preset_names() {
                let sc = Scenario::preset(name)?;
                println!("{sc}");
            }
            Ok(false)
        }
        Command::Run { common, m, eta } => {
            let ctx = common.resolve(m, eta)?;
            if ctx.verbose {
                eprintln!("{}", ctx.scenario);
            }
            let result = experiments::run_scenario(&ctx.scenario, &ctx.options)?;
            emit_sweep(&ctx, &format!("{}_run", ctx.scenario.name), &result)
        }
        Command::SweepM { common, m, eta } => {
            let ctx = common.resolve(None, eta)?;
            if ctx.verbose {
                eprintln!("{} over M = {m:?}", ctx.scenario);
            }
            let result = experiments::sweep_measurements(&ctx.scenario, &m, &ctx.options)?;
            emit_sweep(&ctx, &format!("{}_sweep_m", ctx.scenario.name), &result)
        }
        Command::SweepNoise { common, eta, m } => {
            let ctx = common.resolve(m, None)?;
            if ctx.verbose {
                eprintln!("{} over eta = {eta:?}", ctx.scenario);
            }
            let result = experiments::sweep_noise(&ctx.scenario, &eta, &ctx.options)?;
            emit_sweep(&ctx, &format!("{}_sweep_noise", ctx.scenario.name), &result)
        }
        Command::Recover { common, m, eta, run } => recover(common.resolve(m, eta)?, run),
        Command::Spectrum { common, m, eta, run } => spectrum(common.resolve(m, eta)?, run),
    }
}

fn recover(ctx: Context, run: usize) -> Result<bool, Error> {
    if run == 0 {
        return Err(Error::InvalidArgument("--run is 1-based".into()));
    }
    let setup = Setup::new(&ctx.scenario)?;
    let trial = setup.trial(run)?;
    let stem = format!("{}_recover", ctx.scenario.name);
    write_file(&ctx.out.join(format!("{stem}_measurements.csv")), |w| {
        trial.measurements.write_csv(w)
    })?;
    let mut lines = vec!["scenario,solver,D,M,gamma,eta,run,epsilon,objective,residual,iters,converged".to_string()];
    let mut failed = false;
    for &solver in &ctx.scenario.solvers {
        let report = match solve(solver, &trial.operator, &trial.measurements.y, &ctx.scenario.solver) {
            Ok(r) => r,
            Err(e @ Error::SolverFailure { .. }) => {
                eprintln!("{solver}: {e}");
                let manifest = ctx.out.join(format!("{stem}_{solver}_failure.txt"));
                write_file(&manifest, |w| writeln!(w, "{e}"))?;
                failed = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        let eps = experiments::normalized_errors(&setup.truth, std::slice::from_ref(&report.estimate))?[0];
        write_file(&ctx.out.join(format!("{stem}_{solver}_trace.csv")), |w| {
            report.write_trace_csv(w)
        })?;
        if ctx.options.keep_estimates {
            save_tensor(&report.estimate, &ctx.out.join(format!("{stem}_{solver}_estimate.csv")))?;
        }
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            ctx.scenario.name,
            solver,
            ctx.scenario.order(),
            ctx.scenario.total_measurements(),
            ctx.scenario.gamma(),
            ctx.scenario.eta,
            run,
            eps,
            report.objective,
            report.residual,
            report.iterations,
            report.converged
        ));
        if !ctx.quiet {
            println!(
                "{:<8} eps={eps:.5} objective={:.6} iterations={} converged={}",
                solver.name(),
                report.objective,
                report.iterations,
                report.converged
            );
        }
    }
    if ctx.options.keep_estimates {
        save_tensor(&setup.truth, &ctx.out.join(format!("{stem}_truth.csv")))?;
        write_file(&ctx.out.join(format!("{stem}_operator.csv")), |w| trial.operator.write_csv(w))?;
    }
    let report_path = ctx.out.join(format!("{stem}.csv"));
    write_file(&report_path, |w| {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    if !ctx.quiet {
        println!("wrote {}", report_path.display());
    }
    Ok(failed)
}

fn spectrum(ctx: Context, run: usize) -> Result<bool, Error> {
    if run == 0 {
        return Err(Error::InvalidArgument("--run is 1-based".into()));
    }
    if ctx.scenario.order() != 2 {
        return Err(Error::InvalidArgument(format!(
            "spectrum needs a planar scenario without time intervals, {} has order {}",
            ctx.scenario.name,
            ctx.scenario.order()
        )));
    }
    let setup = Setup::new(&ctx.scenario)?;
    let trial = setup.trial(run)?;
    let report = solve(Solver::Vector, &trial.operator, &trial.measurements.y, &ctx.scenario.solver)?;
    let spectra = spectrum_report(&setup.truth, &report.estimate)?;
    let stem = format!("{}_spectrum", ctx.scenario.name);
    write_file(&ctx.out.join(format!("{stem}.csv")), |w| spectra.write_spectrum_csv(w))?;
    write_file(&ctx.out.join(format!("{stem}_compaction.csv")), |w| {
        spectra.write_compaction_csv(w)
    })?;
    if ctx.options.keep_estimates {
        save_tensor(&report.estimate, &ctx.out.join(format!("{stem}_vector_estimate.csv")))?;
        save_tensor(&setup.truth, &ctx.out.join(format!("{stem}_truth.csv")))?;
    }
    if !ctx.quiet {
        println!(
            "truth sigma_1={:.4} sigma_2={:.3e}; estimate sigma_1={:.4} sigma_2={:.4}",
            spectra.truth_singular_values[0],
            spectra.truth_singular_values[1],
            spectra.estimate_singular_values[0],
            spectra.estimate_singular_values[1]
        );
        println!("wrote {}", ctx.out.join(format!("{stem}.csv")).display());
    }
    Ok(false)
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e @ Error::SolverFailure { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
