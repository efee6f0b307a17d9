use std::path::PathBuf;
use std::process::ExitCode;

use cgeig::config::{Overrides, RunConfig};
use cgeig::harness::{
    build_preconditioner, build_problem, format_table, median_steps, run_grid, trace_name, write_outputs,
};
use cgeig_core::precond::{quality_metrics, DENSE_CAP};
use cgeig_core::problems::{dense_oracle, shift_invert_lanczos};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cgeig", version, about = "Preconditioned CG-type eigensolvers for A x = lambda M x")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One run: the first solver and first seed of the config.
    Solve(RunArgs),
    /// Every solver against every seed.
    Grid(RunArgs),
    /// Preconditioner quality (dense, n <= 512).
    Metrics {
        #[command(flatten)]
        common: CommonArgs,
        /// Shift sigma below lambda1.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Smallest eigenvalues of the configured problem.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// How many eigenvalues to print.
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long, value_enum)]
    oracle: Option<OnOff>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            tol: self.tol,
            max_iters: self.max_iters,
            method: self.method.clone(),
            oracle: self.oracle.map(|o| matches!(o, OnOff::On)),
            out: self.out.clone(),
        }
    }
}

fn load(common: &CommonArgs, o: Option<Overrides>) -> cgeig::Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(o) = o {
        cfg.apply(&o)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> cgeig::Result<ExitCode> {
    match cli.cmd {
        Cmd::Solve(args) => {
            let mut cfg = load(&args.common, Some(args.overrides()))?;
            cfg.solvers.truncate(1);
            cfg.run.seeds.truncate(1);
            grid(cfg)
        }
        Cmd::Grid(args) => grid(load(&args.common, Some(args.overrides()))?),
        Cmd::Metrics { common, sigma } => {
            let cfg = load(&common, None)?;
            let p = build_problem(&cfg.problem, false)?;
            let t = build_preconditioner(&cfg.preconditioner, &p.pencil)?;
            let q = quality_metrics(&p.pencil, &t, sigma)?;
            let v = serde_json::json!({
                "problem": p.name, "n": p.pencil.dim(), "sigma": q.sigma, "kappa": q.kappa, "eta": q.eta,
                "beta_min": q.beta_min, "beta_max": q.beta_max, "mu1": q.mu1, "alpha1": q.alpha1, "alpha_n": q.alpha_n,
                "lambda1": q.lambda1, "lambda2": q.lambda2, "lambda_n": q.lambda_n,
            });
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Oracle { common, count } => {
            let cfg = load(&common, None)?;
            let p = build_problem(&cfg.problem, false)?;
            let n = p.pencil.dim();
            let (values, method): (Vec<f64>, &str) = if n <= DENSE_CAP {
                (dense_oracle(&p.pencil)?.values.into_iter().take(count).collect(), "dense")
            } else {
                let x0: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
                let v = shift_invert_lanczos(&p.pencil, 0.0, count, 300.min(n), &x0)?;
                (v.into_iter().map(|(l, _)| l).collect(), "shift-invert-lanczos")
            };
            let v = serde_json::json!({ "problem": p.name, "n": n, "method": method, "values": values });
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn grid(cfg: RunConfig) -> cgeig::Result<ExitCode> {
    let report = run_grid(&cfg)?;
    let tol = |label: &str| {
        cfg.solvers
            .iter()
            .find(|s| s.label() == label)
            .and_then(|s| s.tol)
            .unwrap_or(cgeig_core::solvers::SolverConfig::default().tol_residual)
    };
    let cap = |label: &str| {
        cfg.solvers
            .iter()
            .find(|s| s.label() == label)
            .and_then(|s| s.max_iters)
            .unwrap_or(cgeig_core::solvers::SolverConfig::default().max_iters)
    };
    let rows = report.summary(tol);
    write_outputs(&report, &rows, &cfg.run.out)?;
    print!("{}", format_table(&report, &rows, &median_steps(&rows, cap)));
    for r in &report.runs {
        if r.result.is_ok() {
            println!("trace {}", cfg.run.out.join(trace_name(&r.label, r.seed)).display());
        }
    }
    Ok(if report.all_failed() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
