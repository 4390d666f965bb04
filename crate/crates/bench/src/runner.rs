//! Parallel experiment runner.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use splr::adc::{adc_solve, AdcConfig};
use splr::baselines::{admm_cspl_solve, ppalm_solve, sdcam_solve, AdmmConfig, PpalmConfig, SdcamConfig};
use splr::datagen::{generate, GenSpec, Generated, GroundTruth};
use splr::{ProblemSpec, Scalar, SolveReport};

use crate::config::{ExperimentConfig, SolverConfigs, SolverKind};
use crate::error::{BenchError, Result};
use crate::metrics::{metric_mre, metric_phase};
use crate::results::{write_csv, write_json, ResultRow};

/// Environment variable overriding the worker-pool width.
pub const THREADS_ENV: &str = "SPLR_THREADS";

/// Pool width: `SPLR_THREADS`, then the config, then the machine's parallelism.
pub fn thread_count(cfg: &ExperimentConfig) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs one solver with the configured or default parameters.
pub fn solve_report<T: Scalar>(
    spec: &ProblemSpec<T>,
    kind: SolverKind,
    cfgs: &SolverConfigs,
) -> splr::Result<SolveReport<T>> {
    match kind {
        SolverKind::AdcSidca => {
            let cfg = cfgs.adc_sidca.clone().unwrap_or_else(|| AdcConfig::for_space(spec.space));
            adc_solve(spec, &cfg, None)
        }
        SolverKind::Sdcam => {
            let cfg = cfgs.sdcam.clone().unwrap_or_else(|| SdcamConfig::for_space(spec.space));
            sdcam_solve(spec, &cfg, None)
        }
        SolverKind::Ppalm => {
            let cfg = cfgs.ppalm.clone().unwrap_or_else(|| PpalmConfig::for_space(spec.space));
            ppalm_solve(spec, &cfg, None, None)
        }
        SolverKind::AdmmCspl => admm_cspl_solve(spec, &cfgs.admm_cspl.clone().unwrap_or_else(AdmmConfig::default)),
    }
}

struct Run<T: Scalar> {
    report: SolveReport<T>,
    time_s: f64,
}

fn timed<T: Scalar>(spec: &ProblemSpec<T>, kind: SolverKind, cfgs: &SolverConfigs) -> splr::Result<Run<T>> {
    let clock = Instant::now();
    let report = solve_report(spec, kind, cfgs)?;
    Ok(Run { report, time_s: clock.elapsed().as_secs_f64() })
}

fn blank_row<T: Scalar>(instance: usize, gen: &GenSpec, spec: &ProblemSpec<T>, kind: SolverKind, rep: usize) -> ResultRow {
    let (m, n) = spec.shape();
    ResultRow {
        instance,
        model: gen.model.name().to_string(),
        m,
        n,
        n_meas: spec.op.len(),
        eta: gen.eta,
        seed: gen.seed,
        repetition: rep,
        r: spec.r,
        s: spec.s,
        solver: kind.name().to_string(),
        time_s: 0.0,
        outer_iterations: 0,
        inner_iterations: 0,
        mre: None,
        re: None,
        rpre: None,
        spa: None,
        obj: None,
        rank: None,
        nnz: None,
        vio_r: None,
        vio_s: None,
        converged: false,
        flags: String::new(),
        error: None,
    }
}

fn fill_row<T: Scalar>(row: &mut ResultRow, run: &Run<T>, truth: &GroundTruth<T>) -> Result<()> {
    let rep = &run.report;
    row.time_s = run.time_s;
    row.outer_iterations = rep.outer_iterations;
    row.inner_iterations = rep.inner_iterations;
    row.mre = Some(metric_mre(&rep.solution, &truth.u)?);
    row.obj = Some(rep.objective);
    row.rank = Some(rep.rank);
    row.nnz = Some(rep.nnz);
    row.vio_r = Some(rep.vio_r);
    row.vio_s = Some(rep.vio_s);
    row.converged = rep.converged;
    row.flags = rep.flags.join("; ");
    Ok(())
}

/// Solves one generated instance with one solver and computes its metrics. Failures are
/// recorded in the row's `error` column. Returns the row and the serialized trace.
pub fn solve_generated(
    instance: usize,
    gen: &GenSpec,
    generated: &Generated,
    kind: SolverKind,
    cfgs: &SolverConfigs,
    rep: usize,
) -> (ResultRow, Option<String>) {
    match generated {
        Generated::Real(spec, truth) => {
            let mut row = blank_row(instance, gen, spec, kind, rep);
            let trace = match timed(spec, kind, cfgs) {
                Ok(run) => {
                    if let Err(e) = fill_row(&mut row, &run, truth) {
                        row.error = Some(e.to_string());
                    }
                    serde_json::to_string(&run.report.trace).ok()
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    None
                }
            };
            (row, trace)
        }
        Generated::Complex(spec, truth) => {
            let mut row = blank_row(instance, gen, spec, kind, rep);
            let trace = match timed(spec, kind, cfgs) {
                Ok(run) => {
                    let phase = fill_row(&mut row, &run, truth).and_then(|_| match &truth.x {
                        Some(x) => metric_phase(spec, &run.report.solution, x).map(Some),
                        None => Ok(None),
                    });
                    match phase {
                        Ok(Some(pm)) => {
                            row.re = Some(pm.re);
                            row.rpre = Some(pm.rpre);
                            row.spa = Some(pm.spa);
                        }
                        Ok(None) => {}
                        Err(e) => row.error = Some(e.to_string()),
                    }
                    serde_json::to_string(&run.report.trace).ok()
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    None
                }
            };
            (row, trace)
        }
    }
}

/// Generates every instance, runs every selected solver on it, and writes `results.csv` and
/// `results.json` (plus traces when archiving) to the output directory, if one is set. Rows are
/// ordered by (instance, repetition, solver order in the config) regardless of pool width.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let gens = cfg.expanded_instances();
    let generated: Vec<Generated> =
        pool.install(|| gens.par_iter().map(generate).collect::<splr::Result<Vec<_>>>())?;
    let jobs: Vec<(usize, usize, SolverKind)> = (0..gens.len())
        .flat_map(|i| (0..cfg.repetitions).flat_map(move |rep| cfg.solvers.iter().map(move |&k| (i, rep, k))))
        .collect();
    let outputs: Vec<(ResultRow, Option<String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, rep, kind)| solve_generated(i, &gens[i], &generated[i], kind, &cfg.configs, rep))
            .collect()
    });
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, cfg.archive_traces, &outputs)?;
    }
    Ok(outputs.into_iter().map(|(r, _)| r).collect())
}

fn write_outputs(dir: &Path, archive: bool, outputs: &[(ResultRow, Option<String>)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<ResultRow> = outputs.iter().map(|(r, _)| r.clone()).collect();
    write_csv(&dir.join("results.csv"), &rows)?;
    write_json(&dir.join("results.json"), &rows)?;
    if archive {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir)?;
        for (row, trace) in outputs {
            if let Some(t) = trace {
                let name = format!("{}_{}_{}_{}.json", row.instance, row.seed, row.solver, row.repetition);
                std::fs::write(tdir.join(name), t)?;
            }
        }
    }
    Ok(())
}
