//! Problem wiring, trace emission and run summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use rhm_core::problems::{
    fragmented_hypercube, random_spd_dataset, QbFiniteSum, QuadBilinear, QuadBilinearParams, Rgpca, RgpcaData, Srwd,
    TraceLog,
};
use rhm_core::{run_solver, HamiltonianOracle, HvpMode, Mat, MinMaxProblem, SolverConfig, SolverStatus, SolverTrace};

use crate::config::{Anchors, Experiment, ExperimentConfig, HvpChoice};
use crate::format::fmt_f64;
use crate::CliError;

pub const CSV_COLUMNS: [&str; 6] = ["iter", "time_s", "step", "grad_norm", "hamiltonian", "opt_gap"];

/// Builds the problem instance described by `cfg`.
pub fn build_problem(cfg: &ExperimentConfig) -> rhm_core::Result<Box<dyn MinMaxProblem>> {
    let p = &cfg.params;
    Ok(match cfg.experiment {
        Experiment::QuadBilinear => Box::new(QuadBilinear::new(QuadBilinearParams::new(p.d, p.c_q, p.c_l)?)),
        Experiment::StochasticQb => Box::new(QbFiniteSum::new(
            QuadBilinearParams::new(p.d, p.c_q, p.c_l)?,
            p.n,
            p.spread,
            cfg.seed,
        )?),
        Experiment::Tracelog => Box::new(match p.anchors {
            Anchors::Identity => TraceLog::new(Mat::identity(p.d, p.d), Mat::identity(p.d, p.d))?,
            Anchors::Random => TraceLog::random(p.d, p.mu0, p.mu1, cfg.seed)?,
        }),
        Experiment::Rgpca => Box::new(Rgpca::new(RgpcaData::new(
            random_spd_dataset(p.n, p.d, p.mu0, p.mu1, cfg.seed)?,
            p.alpha,
        )?)),
        Experiment::Srwd => Box::new(Srwd::new(fragmented_hypercube(p.n, p.d, p.k, cfg.seed)?.with_subspace(p.r, p.eps)?)),
    })
}

fn oracle<'a>(cfg: &ExperimentConfig, problem: &'a dyn MinMaxProblem) -> rhm_core::Result<HamiltonianOracle<'a>> {
    match cfg.hvp {
        HvpChoice::Auto => Ok(HamiltonianOracle::new(problem)),
        HvpChoice::Analytic => HamiltonianOracle::with_mode(problem, HvpMode::Analytic),
        HvpChoice::Fd => HamiltonianOracle::with_mode(problem, HvpMode::FiniteDifference),
    }
}

/// Result of one solver within an experiment.
#[derive(Debug)]
pub struct SolverRun {
    pub config: SolverConfig,
    pub outcome: Result<SolverTrace, rhm_core::Error>,
    pub wall_time_s: f64,
}

impl SolverRun {
    pub fn status(&self) -> SolverStatus {
        self.outcome.as_ref().map_or(SolverStatus::Error, |t| t.status)
    }

    pub fn error(&self) -> Option<String> {
        match &self.outcome {
            Ok(t) => t.error.as_ref().map(|e| e.to_string()),
            Err(e) => Some(e.to_string()),
        }
    }
}

/// Every solver of an experiment, in config order.
#[derive(Debug)]
pub struct ExperimentRun {
    pub has_opt_gap: bool,
    pub runs: Vec<SolverRun>,
}

/// Runs every configured solver from the same starting point.
pub fn execute(cfg: &ExperimentConfig, parallel: bool) -> Result<ExperimentRun, CliError> {
    let problem = build_problem(cfg)?;
    let problem: &dyn MinMaxProblem = problem.as_ref();
    let p0 = problem.initial_point(cfg.seed);
    let has_opt_gap = problem.opt_gap(&p0).is_some();
    let oracle = oracle(cfg, problem)?;
    let one = |c: &SolverConfig| {
        let start = Instant::now();
        let outcome = run_solver(&oracle, &p0, c);
        SolverRun { config: c.clone(), outcome, wall_time_s: start.elapsed().as_secs_f64() }
    };
    let runs = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg.solvers.iter().map(|c| s.spawn(|| one(c))).collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
        })
    } else {
        cfg.solvers.iter().map(one).collect()
    };
    Ok(ExperimentRun { has_opt_gap, runs })
}

/// CSV header for a problem with or without an optimality gap.
pub fn csv_header(has_opt_gap: bool) -> &'static [&'static str] {
    if has_opt_gap {
        &CSV_COLUMNS
    } else {
        &CSV_COLUMNS[..5]
    }
}

/// One string row per trace record, matching `csv_header`.
pub fn trace_rows(trace: &SolverTrace, has_opt_gap: bool) -> Vec<Vec<String>> {
    trace
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.iter.to_string(),
                fmt_f64(r.elapsed_seconds),
                fmt_f64(r.step_size),
                fmt_f64(r.grad_norm),
                fmt_f64(r.hamiltonian),
            ];
            if has_opt_gap {
                row.push(r.opt_gap.map_or(String::new(), fmt_f64));
            }
            row
        })
        .collect()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Csv { path: path.to_path_buf(), source: e })?;
    let err = |e| CliError::Csv { path: path.to_path_buf(), source: e };
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: String,
    pub status: String,
    pub iterations: usize,
    pub final_grad_norm: Option<f64>,
    pub final_opt_gap: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
    /// Trace file name inside the output directory.
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub seed: u64,
    pub solvers: Vec<SolverSummary>,
}

impl RunSummary {
    /// True when every solver converged or hit its iteration cap.
    pub fn all_ok(&self) -> bool {
        self.solvers.iter().all(|s| s.status == "converged" || s.status == "max_iters")
    }
}

fn summarize(cfg: &ExperimentConfig, run: &ExperimentRun) -> RunSummary {
    let solvers = run
        .runs
        .iter()
        .map(|r| {
            let trace = r.outcome.as_ref().ok();
            let last = trace.map(|t| t.last());
            SolverSummary {
                solver: r.config.method.tag().into(),
                status: r.status().tag().into(),
                iterations: trace.map_or(0, |t| t.iterations()),
                final_grad_norm: last.map(|l| l.grad_norm),
                final_opt_gap: last.and_then(|l| l.opt_gap),
                wall_time_s: r.wall_time_s,
                error: r.error(),
                csv: trace.map(|_| format!("{}.csv", r.config.method)),
            }
        })
        .collect();
    RunSummary { experiment: cfg.experiment.tag().into(), seed: cfg.seed, solvers }
}

/// Output directory: explicit flag, then `RHM_OUT`, then the config, then `rhm_out`.
pub fn resolve_out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("RHM_OUT").map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("rhm_out"))
}

/// Runs the experiment, writing `<solver>.csv` files and `summary.json` to `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, parallel: bool) -> Result<RunSummary, CliError> {
    let run = execute(cfg, parallel)?;
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    let header = csv_header(run.has_opt_gap);
    for r in &run.runs {
        if let Ok(trace) = &r.outcome {
            write_csv(&out.join(format!("{}.csv", r.config.method)), header, &trace_rows(trace, run.has_opt_gap))?;
        }
    }
    let summary = summarize(cfg, &run);
    let path = out.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|source| CliError::Io { path, source })?;
    Ok(summary)
}
