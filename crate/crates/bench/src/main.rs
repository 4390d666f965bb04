use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use splr::datagen::{generate, GenSpec, Generated, GroundTruth, Model, TruthFile};
use splr::problem::{AnyProblem, InstanceFile};
use splr::Scalar;
use splr_bench::{read_csv, run_experiment, write_csv, ExperimentConfig, ResultRow, SolverConfigs, SolverKind};

#[derive(Parser)]
#[command(name = "splr", version, about = "Sparse and low-rank matrix recovery solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance and its ground truth.
    Generate {
        #[arg(long)]
        model: Model,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of measurements (model default when omitted).
        #[arg(long)]
        n_meas: Option<usize>,
        /// Output directory for `instance.json` and `truth.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Solve an instance file with one solver.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "adc_sidca")]
        solver: SolverKind,
        /// Ground-truth sidecar; enables MRE.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Solver configuration as JSON (same shape as the `configs` entry of an experiment).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the solution and trace as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config; exits nonzero unless every run converged.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker-pool width (the SPLR_THREADS variable wins over both).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Summarize one or more result CSV files per (model, dims, noise, solver).
    Report {
        csv: Vec<PathBuf>,
        /// Also write the merged rows to this CSV.
        #[arg(long)]
        merged: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Generate { model, m, n, eta, seed, n_meas, out } => {
            let mut g = GenSpec::new(model, if m == 0 { n } else { m }, n, eta, seed);
            g.n_meas = n_meas;
            std::fs::create_dir_all(&out)?;
            let (inst, truth) = match generate(&g)? {
                Generated::Real(p, t) => (p.to_instance(), t.to_file(seed)),
                Generated::Complex(p, t) => (p.to_instance(), t.to_file(seed)),
            };
            std::fs::write(out.join("instance.json"), serde_json::to_string(&inst)?)?;
            std::fs::write(out.join("truth.json"), serde_json::to_string(&truth)?)?;
            println!("wrote {} (r = {}, s = {}, N = {})", out.display(), inst.r, inst.s, inst.n_meas);
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { instance, solver, truth, config, out } => {
            let inst: InstanceFile = serde_json::from_str(&std::fs::read_to_string(&instance)?)?;
            let truth: Option<TruthFile> = match truth {
                Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
                None => None,
            };
            let cfgs: SolverConfigs = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => SolverConfigs::default(),
            };
            let ok = match AnyProblem::from_instance(&inst)? {
                AnyProblem::Real(p) => solve_one(&p, solver, &cfgs, truth.as_ref(), out)?,
                AnyProblem::Complex(p) => solve_one(&p, solver, &cfgs, truth.as_ref(), out)?,
            };
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Bench { config, out_dir, threads } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if out_dir.is_some() {
                cfg.output_dir = out_dir;
            }
            if threads.is_some() {
                cfg.threads = threads;
            }
            let rows = run_experiment(&cfg)?;
            print_rows(&rows);
            Ok(if rows.iter().all(ResultRow::succeeded) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report { csv, merged } => {
            let mut rows = Vec::new();
            for p in &csv {
                rows.extend(read_csv(p)?);
            }
            if let Some(p) = merged {
                write_csv(&p, &rows)?;
            }
            print_summary(&rows);
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[derive(serde::Serialize)]
struct SolutionFile {
    solver: String,
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    objective: f64,
    rank: usize,
    nnz: usize,
    vio_r: f64,
    vio_s: f64,
    converged: bool,
    time_s: f64,
    flags: Vec<String>,
    trace: Vec<splr::report::TraceRecord>,
}

fn solve_one<T: Scalar>(
    spec: &splr::ProblemSpec<T>,
    kind: SolverKind,
    cfgs: &SolverConfigs,
    truth: Option<&TruthFile>,
    out: Option<PathBuf>,
) -> Result<bool, Box<dyn std::error::Error>> {
    let truth: GroundTruth<T> = match truth {
        Some(t) => GroundTruth::from_file(t),
        None => GroundTruth { u: DMatrix::zeros(spec.shape().0, spec.shape().1), rank: 0, nnz: 0, x: None, achieved_density: None, flags: Vec::new() },
    };
    let report = splr_bench::runner::solve_report(spec, kind, cfgs)?;
    let mre = splr_bench::metric_mre(&report.solution, &truth.u)?;
    println!(
        "{}: obj {:.6e}  rank {}  nnz {}  vio ({:.2e}, {:.2e})  time {:.2}s  converged {}",
        kind, report.objective, report.rank, report.nnz, report.vio_r, report.vio_s, report.time_s, report.converged
    );
    if truth.rank > 0 {
        println!("MRE {mre:.3e} (truth rank {}, nnz {})", truth.rank, truth.nnz);
    }
    if let Some(p) = out {
        let (rows, cols) = report.solution.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                re.push(report.solution[(i, j)].real());
                if T::IS_COMPLEX {
                    im.push(report.solution[(i, j)].imaginary());
                }
            }
        }
        let file = SolutionFile {
            solver: report.solver.clone(),
            rows,
            cols,
            re,
            im,
            objective: report.objective,
            rank: report.rank,
            nnz: report.nnz,
            vio_r: report.vio_r,
            vio_s: report.vio_s,
            converged: report.converged,
            time_s: report.time_s,
            flags: report.flags.clone(),
            trace: report.trace.clone(),
        };
        std::fs::write(p, serde_json::to_string(&file)?)?;
    }
    Ok(report.converged)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into())
}

fn print_rows(rows: &[ResultRow]) {
    println!(
        "{:<16} {:>9} {:>6} {:>8} {:<10} {:>9} {:>6} {:>9} {:>9} {:>9} {:>10} {:>9}",
        "model", "m,n", "eta", "r,s", "solver", "time/s", "iter", "MRE", "RE", "RPRE", "obj", "R,S"
    );
    for r in rows {
        let rs = match (r.rank, r.nnz) {
            (Some(a), Some(b)) => format!("{a},{b}"),
            _ => "-".into(),
        };
        println!(
            "{:<16} {:>9} {:>6} {:>8} {:<10} {:>9.2} {:>6} {:>9} {:>9} {:>9} {:>10} {:>9}{}",
            r.model,
            format!("{},{}", r.m, r.n),
            r.eta,
            format!("{},{}", r.r, r.s),
            r.solver,
            r.time_s,
            r.outer_iterations,
            fmt_opt(r.mre),
            fmt_opt(r.re),
            fmt_opt(r.rpre),
            fmt_opt(r.obj),
            rs,
            r.error.as_ref().map(|e| format!("  error: {e}")).unwrap_or_default()
        );
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

fn print_summary(rows: &[ResultRow]) {
    let mut groups: BTreeMap<(String, usize, usize, String, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.model.clone(), r.m, r.n, format!("{}", r.eta), r.solver.clone())).or_default().push(r);
    }
    println!(
        "{:<16} {:>9} {:>6} {:<10} {:>5} {:>9} {:>8} {:>9} {:>9} {:>9} {:>10} {:>7}",
        "model", "m,n", "eta", "solver", "runs", "time/s", "iter", "MRE", "RE", "RPRE", "obj", "exact"
    );
    for ((model, m, n, eta, solver), rs) in groups {
        let exact = rs.iter().filter(|r| r.rank == Some(r.r) && r.nnz == Some(r.s)).count();
        println!(
            "{:<16} {:>9} {:>6} {:<10} {:>5} {:>9.2} {:>8.1} {:>9} {:>9} {:>9} {:>10} {:>7}",
            model,
            format!("{m},{n}"),
            eta,
            solver,
            rs.len(),
            mean(rs.iter().map(|r| r.time_s)).unwrap_or(0.0),
            mean(rs.iter().map(|r| r.outer_iterations as f64)).unwrap_or(0.0),
            fmt_opt(mean(rs.iter().filter_map(|r| r.mre))),
            fmt_opt(mean(rs.iter().filter_map(|r| r.re))),
            fmt_opt(mean(rs.iter().filter_map(|r| r.rpre))),
            fmt_opt(mean(rs.iter().filter_map(|r| r.obj))),
            format!("{exact}/{}", rs.len())
        );
    }
}
