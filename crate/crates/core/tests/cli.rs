use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wtomo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wtomo"))
        .args(args)
        .env("WTOMO_OUT", out)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn run_writes_one_row_per_trial_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "--scenario", "presets/d2", "--solver", "matrix", "--seed", "7", "-q"];
    let first = wtomo(&args, a.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(wtomo(&args, b.path()).status.success());
    let csv = read(a.path().join("d2_run.csv"));
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("scenario,solver,D,M,gamma,eta,run,epsilon_i,epsilon_mean,epsilon_std,iters,wall_ms,status\n"));
    assert!(csv.lines().skip(1).all(|l| l.starts_with("d2,matrix,2,60,0.6,0,")));
    assert_eq!(csv, read(b.path().join("d2_run.csv")));
    assert_eq!(read(a.path().join("d2_run_summary.csv")), read(b.path().join("d2_run_summary.csv")));
}

#[test]
fn noise_sweep_covers_each_level_and_solver() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtomo(
        &["sweep-noise", "--scenario", "presets/d2", "--solver", "vector,Matrix", "--eta", "0,0.5,1,2", "--runs", "3", "-q"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read(dir.path().join("d2_sweep_noise_summary.csv"));
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    for (row, (solver, eta)) in rows.iter().zip(
        ["0", "0.5", "1", "2"]
            .iter()
            .flat_map(|e| ["vector", "matrix"].map(move |s| (s, *e))),
    ) {
        assert!(row.starts_with(&format!("d2,{solver},2,60,0.6,{eta},3,0,")), "{row}");
    }
    assert_eq!(read(dir.path().join("d2_sweep_noise.csv")).lines().count(), 1 + 8 * 3);
}

#[test]
fn recover_dumps_estimate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtomo(
        &["recover", "--scenario", "presets/d2", "--solver", "vector", "--m", "60", "--dump-fields"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = read(dir.path().join("d2_recover_vector_estimate.csv"));
    assert!(est.starts_with("shape,10,10\n"));
    assert_eq!(est.lines().count(), 101);
    let trace = read(dir.path().join("d2_recover_vector_trace.csv"));
    assert!(trace.starts_with("iteration,objective,residual\n"));
    let report = read(dir.path().join("d2_recover.csv"));
    assert_eq!(report.lines().count(), 2);
    assert!(read(dir.path().join("d2_recover_measurements.csv")).contains("m,time_index,tx,rx,y_dB"));
    let operator = read(dir.path().join("d2_recover_operator.csv"));
    assert!(operator.starts_with("row,time_index,voxel_flat_index,delta\n0,0,"));
    assert!(operator.lines().skip(1).all(|l| l.split(',').next().unwrap().parse::<usize>().unwrap() < 60));
}

#[test]
fn run_can_dump_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtomo(&["run", "--scenario", "d2", "--runs", "2", "--dump-fields", "-q"], dir.path());
    assert!(out.status.success());
    let fields = dir.path().join("fields");
    let mut names: Vec<String> = fs::read_dir(&fields)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "d2_run_matrix_M60_eta0_run1.csv",
            "d2_run_matrix_M60_eta0_run2.csv",
            "d2_run_vector_M60_eta0_run1.csv",
            "d2_run_vector_M60_eta0_run2.csv",
            "d2_truth.csv",
        ]
    );
}

#[test]
fn spectrum_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtomo(&["spectrum", "--scenario", "d2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(dir.path().join("d2_spectrum.csv")).lines().count(), 101);
    let comp = read(dir.path().join("d2_spectrum_compaction.csv"));
    assert!(comp.starts_with("k,kappa_v,kappa_m\n0,30,30\n"));
    let fail = wtomo(&["spectrum", "--scenario", "d3"], dir.path());
    assert_eq!(fail.status.code(), Some(2));
}

#[test]
fn presets_lists_the_three_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtomo(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("d2: D=2 grid 10x10x1x1, 40 nodes, M=60"));
    assert!(text.contains("d3: D=3 grid 10x10x5x1, 200 nodes, M=300"));
    assert!(text.contains("d4: D=4 grid 10x10x5x3, 200 nodes, M=900"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| wtomo(args, dir.path()).status.code();
    assert_eq!(code(&["run", "--scenario", "d2", "--bogus"]), Some(2));
    assert_eq!(code(&["run", "--scenario", "no/such/file"]), Some(2));
    assert_eq!(code(&["run", "--scenario", "d2", "--solver", "lasso"]), Some(2));
    assert_eq!(code(&["run", "--scenario", "d2", "--m", "abc"]), Some(2));
    assert_eq!(code(&["run", "--scenario", "d3", "--solver", "matrix"]), Some(2));
    assert_eq!(code(&["sweep-m", "--scenario", "d2"]), Some(2));
    let file = dir.path().join("plain-file");
    fs::write(&file, "").unwrap();
    let out = wtomo(&["run", "--scenario", "d2", "--out", file.join("sub").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not writable"));
}

#[test]
fn solver_failures_exit_with_one_and_leave_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("tight.scenario");
    let text = read(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets/d3.scenario"))
        .replace("cg_max_iters = 500", "cg_max_iters = 1")
        .replace("runs = 50", "runs = 2");
    fs::write(&scenario, &text).unwrap();
    let before = read(&scenario);
    let out = wtomo(&["run", "--scenario", scenario.to_str().unwrap(), "-q"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let manifest = read(dir.path().join("d3_run_failures.csv"));
    assert!(manifest.starts_with("scenario,solver,M,eta,run,seed,message\n"));
    assert_eq!(manifest.lines().count(), 3);
    let results = read(dir.path().join("d3_run.csv"));
    assert!(results.lines().any(|l| l.starts_with("d3,vector,") && l.ends_with(",ok")));
    assert!(results.lines().any(|l| l.starts_with("d3,tensor,") && l.ends_with(",failed")));
    assert_eq!(read(&scenario), before, "scenario file untouched");
}
