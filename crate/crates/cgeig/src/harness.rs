//! Grid runs: solvers × seeds over one problem and preconditioner.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use cgeig_core::precond::{incomplete_cholesky, jacobi_preconditioner, shifted_inverse, Preconditioner, DENSE_CAP};
use cgeig_core::problems::{
    cluster_spectrum, dense_oracle, gen_diag, gen_laplace1d, gen_laplace2d, gen_slit2d, shift_invert_lanczos,
    TestProblem,
};
use cgeig_core::solvers::{solve, Method, SolveResult};
use cgeig_core::{HermitianOperator, HermitianPencil};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PrecondSpec, ProblemSpec, RunConfig, SolverSpec};
use crate::error::{HarnessError, Result};
use crate::guess::{initial_guess, GuessStyle};
use crate::mtx::read_mtx;
use crate::trace::write_csv;

/// A problem ready to solve, with the reference `λ₁` when the oracle ran.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub pencil: HermitianPencil<f64>,
    pub lambda1: Option<f64>,
}

fn from_test_problem(p: TestProblem<f64>) -> (String, HermitianPencil<f64>, Option<f64>) {
    let l1 = p.exact.as_ref().and_then(|e| e.first().copied());
    (p.name, p.pencil, l1)
}

/// Smallest eigenvalue: dense up to the dense cap, shift-invert Lanczos at
/// `σ = 0` above it.
pub fn reference_lambda1(pencil: &HermitianPencil<f64>) -> Result<f64> {
    let n = pencil.dim();
    if n <= DENSE_CAP {
        return Ok(dense_oracle(pencil)?.values[0]);
    }
    let x0: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
    let vals = shift_invert_lanczos(pencil, 0.0, 1, 300.min(n), &x0)?;
    Ok(vals[0].0)
}

pub fn build_problem(spec: &ProblemSpec, oracle: bool) -> Result<Problem> {
    let (name, pencil, exact) = match spec {
        ProblemSpec::Diag { spectrum } => from_test_problem(gen_diag(spectrum)?),
        ProblemSpec::Cluster { gap, top } => from_test_problem(gen_diag(&cluster_spectrum(*gap, *top))?),
        ProblemSpec::Laplace1d { n } => from_test_problem(gen_laplace1d(*n)?),
        ProblemSpec::Laplace2d { nx, ny } => from_test_problem(gen_laplace2d(*nx, *ny)?),
        ProblemSpec::Slit2d { nx, ny, slit } => from_test_problem(gen_slit2d(*nx, *ny, (slit[0], slit[1]))?),
        ProblemSpec::Mtx { a, m } => {
            let a_op = HermitianOperator::from_csr(read_mtx(a)?)?;
            let pencil = match m {
                Some(m) => HermitianPencil::new(a_op, HermitianOperator::from_csr(read_mtx(m)?)?)?,
                None => HermitianPencil::standard(a_op),
            };
            let name = a.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mtx".into());
            (name, pencil, None)
        }
    };
    let lambda1 = match (oracle, exact) {
        (false, _) => None,
        (true, Some(l)) => Some(l),
        (true, None) => Some(reference_lambda1(&pencil)?),
    };
    Ok(Problem { name, pencil, lambda1 })
}

pub fn build_preconditioner(spec: &PrecondSpec, pencil: &HermitianPencil<f64>) -> Result<Preconditioner<f64>> {
    Ok(match *spec {
        PrecondSpec::Identity => Preconditioner::identity(pencil.dim()),
        PrecondSpec::Jacobi => jacobi_preconditioner(pencil.a())?,
        PrecondSpec::Ichol { droptol, sigma } => incomplete_cholesky(pencil, droptol, sigma)?,
        PrecondSpec::ShiftedInverse { sigma } => shifted_inverse(pencil, sigma)?,
    })
}

/// One grid cell.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub method: Method,
    pub seed: u64,
    pub result: std::result::Result<SolveResult<f64>, String>,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub method: String,
    pub seed: u64,
    /// Steps taken; the history has one more row, for `x⁽⁰⁾`.
    pub steps: Option<usize>,
    pub steps_to_tol: Option<usize>,
    pub converged: bool,
    pub theta_final: Option<f64>,
    pub theta_err: Option<f64>,
    pub matvec_a: Option<usize>,
    pub matvec_m: Option<usize>,
    pub matvec_t: Option<usize>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub problem: String,
    pub dim: usize,
    pub lambda1: Option<f64>,
    pub runs: Vec<RunOutcome>,
}

impl GridReport {
    pub fn all_failed(&self) -> bool {
        self.runs.iter().all(|r| r.result.is_err())
    }

    pub fn summary(&self, tol_of: impl Fn(&str) -> f64) -> Vec<SummaryRow> {
        self.runs
            .iter()
            .map(|r| {
                let wall_ms = r.wall.as_secs_f64() * 1e3;
                match &r.result {
                    Ok(s) => SummaryRow {
                        label: r.label.clone(),
                        method: r.method.name().into(),
                        seed: r.seed,
                        steps: Some(s.history.len() - 1),
                        steps_to_tol: s.history.steps_to(tol_of(&r.label)),
                        converged: s.converged,
                        theta_final: Some(s.theta_final),
                        theta_err: self.lambda1.map(|l| s.theta_final - l),
                        matvec_a: Some(s.counts.a),
                        matvec_m: Some(s.counts.m),
                        matvec_t: Some(s.counts.t),
                        wall_ms,
                        error: None,
                    },
                    Err(e) => SummaryRow {
                        label: r.label.clone(),
                        method: r.method.name().into(),
                        seed: r.seed,
                        steps: None,
                        steps_to_tol: None,
                        converged: false,
                        theta_final: None,
                        theta_err: None,
                        matvec_a: None,
                        matvec_m: None,
                        matvec_t: None,
                        wall_ms,
                        error: Some(e.clone()),
                    },
                }
            })
            .collect()
    }
}

/// Median of a sample; the mean of the two middle values for even sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

/// Median steps-to-tolerance per label, in first-appearance order. Runs that
/// failed or never reached the tolerance count as their step cap.
pub fn median_steps(rows: &[SummaryRow], cap: impl Fn(&str) -> usize) -> Vec<(String, f64)> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
        .into_iter()
        .map(|l| {
            let v: Vec<f64> =
                rows.iter().filter(|r| r.label == l).map(|r| r.steps_to_tol.unwrap_or_else(|| cap(l)) as f64).collect();
            (l.to_string(), median(&v).unwrap_or(f64::NAN))
        })
        .collect()
}

/// Runs every (solver, seed) cell. Cells sharing a seed share `x⁽⁰⁾`.
pub fn run_cells(
    problem: &Problem,
    t: &Preconditioner<f64>,
    solvers: &[SolverSpec],
    seeds: &[u64],
    style: GuessStyle,
    workers: usize,
) -> Result<Vec<RunOutcome>> {
    let mut cells = Vec::new();
    for s in solvers {
        for &seed in seeds {
            cells.push((s, seed, s.to_solver_config(seed, problem.lambda1)?));
        }
    }
    let run = |(spec, seed, cfg): &(&SolverSpec, u64, cgeig_core::solvers::SolverConfig)| {
        let x0 = initial_guess(problem.pencil.m(), *seed, style);
        let start = Instant::now();
        let result = solve(&problem.pencil, t, &x0, cfg).map_err(|e| e.to_string());
        RunOutcome { label: spec.label(), method: cfg.method, seed: *seed, result, wall: start.elapsed() }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(run).collect()))
}

pub fn run_grid(cfg: &RunConfig) -> Result<GridReport> {
    let problem = build_problem(&cfg.problem, cfg.run.oracle)?;
    let t = build_preconditioner(&cfg.preconditioner, &problem.pencil)?;
    let runs = run_cells(&problem, &t, &cfg.solvers, &cfg.run.seeds, cfg.run.initial_guess, cfg.run.workers)?;
    Ok(GridReport { problem: problem.name, dim: problem.pencil.dim(), lambda1: problem.lambda1, runs })
}

/// File stem of a run's trace.
pub fn trace_name(label: &str, seed: u64) -> String {
    let clean: String =
        label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("{clean}_seed{seed}.csv")
}

/// Writes one trace per successful run plus `summary.csv`.
pub fn write_outputs(report: &GridReport, rows: &[SummaryRow], out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    for r in &report.runs {
        if let Ok(s) = &r.result {
            write_csv(&out.join(trace_name(&r.label, r.seed)), &s.history)?;
        }
    }
    let path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::Csv(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))
}

/// Plain-text table of the summary and per-label medians.
pub fn format_table(report: &GridReport, rows: &[SummaryRow], medians: &[(String, f64)]) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "problem {} (n = {})", report.problem, report.dim);
    if let Some(l) = report.lambda1 {
        let _ = writeln!(s, "reference lambda1 = {l:.12e}");
    }
    let _ = writeln!(
        s,
        "{:<16} {:>6} {:>7} {:>9} {:>11} {:>8} {:>8} {:>8}",
        "label", "seed", "steps", "to-tol", "theta-err", "A", "M", "T"
    );
    for r in rows {
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        match &r.error {
            None => {
                let _ = writeln!(
                    s,
                    "{:<16} {:>6} {:>7} {:>9} {:>11} {:>8} {:>8} {:>8}",
                    r.label,
                    r.seed,
                    opt(r.steps),
                    opt(r.steps_to_tol),
                    r.theta_err.map_or("-".to_string(), |e| format!("{e:.2e}")),
                    opt(r.matvec_a),
                    opt(r.matvec_m),
                    opt(r.matvec_t),
                );
            }
            Some(e) => {
                let _ = writeln!(s, "{:<16} {:>6} failed: {e}", r.label, r.seed);
            }
        }
    }
    for (l, m) in medians {
        let _ = writeln!(s, "median steps-to-tol {l}: {m}");
    }
    s
}
