use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{bounded_low_rank_set, low_rank_set, sparse_set};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemSpec;
use crate::prox::project;
use crate::report::{violation_metrics, SdcamStageRecord, SolveReport, TraceRecord};
use crate::scalar::Scalar;
use crate::space::{ConstraintSet, SpaceTag};

/// Which constraint is smoothed: `Rank` smooths the cardinality set and keeps the rank set hard
/// (the default); `Card` swaps the roles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdcamVariant {
    Rank,
    Card,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdcamConfig {
    pub mu0: f64,
    pub mu_decay: f64,
    pub eps0: f64,
    pub eps_decay: f64,
    pub vio_tol: f64,
    pub mu_floor: f64,
    /// Nonmonotone window length.
    pub window: usize,
    pub step_grow: f64,
    pub step_shrink: f64,
    /// Sufficient-decrease constant of the nonmonotone test.
    pub sigma: f64,
    pub l_min: f64,
    pub max_inner: usize,
    pub round_output: bool,
    pub variant: SdcamVariant,
}

impl SdcamConfig {
    pub fn for_space(space: SpaceTag) -> Self {
        let base = SdcamConfig {
            mu0: 50.0,
            mu_decay: 5.0,
            eps0: 1e-4,
            eps_decay: 1.5,
            vio_tol: 1e-9,
            mu_floor: 1e-9,
            window: 5,
            step_grow: 2.0,
            step_shrink: 0.5,
            sigma: 1e-4,
            l_min: 1e-8,
            max_inner: 2000,
            round_output: true,
            variant: SdcamVariant::Rank,
        };
        match space {
            SpaceTag::NonnegRect => base,
            SpaceTag::PsdReal => SdcamConfig { mu0: 100.0, eps_decay: 1.2, ..base },
            SpaceTag::PsdHermitian => SdcamConfig { mu_floor: 1e-10, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || !(self.mu_decay > 1.0) || !(self.eps_decay > 1.0) || !(self.mu0 > 0.0) {
            return Err(Error::InvalidParameter("invalid SDCAM configuration".into()));
        }
        Ok(())
    }
}

struct Split {
    smooth: ConstraintSet,
    hard: ConstraintSet,
}

fn split<T: Scalar>(spec: &ProblemSpec<T>, variant: SdcamVariant) -> Split {
    match variant {
        SdcamVariant::Rank => Split { smooth: sparse_set(spec), hard: bounded_low_rank_set(spec) },
        SdcamVariant::Card => {
            let hard = if spec.space.is_psd() {
                // Bounded cardinality; the cone is enforced through the smoothed set.
                ConstraintSet::CardBox(spec.s, spec.tau)
            } else {
                ConstraintSet::CardInOrthant(spec.s)
            };
            Split { smooth: low_rank_set(spec), hard }
        }
    }
}

/// `F_mu(U) = l(U) + dist^2(U, smooth set) / (2 mu)`.
fn f_mu<T: Scalar>(spec: &ProblemSpec<T>, sp: &Split, u: &DMatrix<T>, mu: f64) -> Result<f64> {
    let p = project(u, sp.smooth)?;
    Ok(spec.least_squares_value(u)? + linalg::dist(u, &p).powi(2) / (2.0 * mu))
}

/// Smoothing of one constraint by its Moreau envelope, with the other kept as a hard
/// constraint, solved along a decreasing `mu` schedule.
pub fn sdcam_solve<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &SdcamConfig,
    u0: Option<&DMatrix<T>>,
) -> Result<SolveReport<T>> {
    cfg.validate()?;
    let clock = Instant::now();
    let sp = split(spec, cfg.variant);
    let u_init = match u0 {
        Some(u) => u.clone(),
        None => spec.zeros(),
    };
    let mut current = u_init.clone();
    let mut trace = Vec::new();
    let mut flags = Vec::new();
    let mut inner_total = 0;
    let mut converged = false;
    let mut l_prev = cfg.l_min;
    let mut t = 0;
    loop {
        let mu = cfg.mu0 / cfg.mu_decay.powi(t as i32);
        if mu <= cfg.mu_floor {
            break;
        }
        let eps = cfg.eps0 / cfg.eps_decay.powi(t as i32);
        let f_anchor_cur = f_mu(spec, &sp, &current, mu)?;
        let f_init = f_mu(spec, &sp, &u_init, mu)?;
        let mut u = if f_anchor_cur <= f_init { current.clone() } else { u_init.clone() };
        let f0 = f_anchor_cur.min(f_init);
        let mut fu = f0;
        let mut history: VecDeque<f64> = VecDeque::from(vec![fu]);
        let mut capped = true;
        let mut l_iter = 0;
        while l_iter < cfg.max_inner {
            l_iter += 1;
            let ps = project(&u, sp.smooth)?;
            let mut grad = spec.least_squares_grad(&u)? + (&u - &ps) / T::from_real(mu);
            if spec.space.is_psd() {
                linalg::symmetrize_mut(&mut grad);
            }
            let f_ref = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut l = (cfg.step_shrink * l_prev).max(cfg.l_min);
            let (next, f_next) = loop {
                let cand = project(&(&u - &grad / T::from_real(l)), sp.hard)?;
                let fc = f_mu(spec, &sp, &cand, mu)?;
                let d2 = linalg::dist(&cand, &u).powi(2);
                if fc <= f_ref - 0.5 * cfg.sigma * d2 || l > 1e20 {
                    break (cand, fc);
                }
                l *= cfg.step_grow;
            };
            l_prev = l;
            let step = linalg::dist(&next, &u);
            let rel = step / linalg::fro_norm(&u).max(1.0);
            u = next;
            fu = f_next;
            history.push_back(fu);
            if history.len() > cfg.window {
                history.pop_front();
            }
            // Stationarity proxy: the prox-gradient residual L * ||U+ - U||, scaled like the step test.
            let stationarity = l * rel;
            if rel <= eps && stationarity <= eps && fu <= f0 {
                capped = false;
                break;
            }
        }
        inner_total += l_iter;
        if capped {
            flags.push(format!("inner iteration cap at stage {t}"));
        }
        current = u;
        let (vio_r, vio_s) = violation_metrics(&current, spec);
        trace.push(TraceRecord::Sdcam(SdcamStageRecord {
            t,
            mu,
            inner_iterations: l_iter,
            f_anchor: f0,
            f_mu: fu,
            vio_r,
            vio_s,
            inner_capped: capped,
        }));
        t += 1;
        if vio_r.max(vio_s) <= cfg.vio_tol {
            converged = true;
            break;
        }
    }
    SolveReport::finish(
        "sdcam",
        spec,
        current,
        cfg.round_output,
        clock.elapsed().as_secs_f64(),
        t,
        inner_total,
        converged,
        flags,
        trace,
    )
}
