//! Asymptotic DC driver: continuation in the smoothing parameter `mu` and the penalty `c`,
//! with each `(mu, c)` problem handled by the sieving DCA.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::prox;
use crate::report::{violation_metrics, AdcStageRecord, SolveReport, TraceRecord};
use crate::scalar::Scalar;
use crate::sidca::{sidca_solve, SidcaConfig};
use crate::space::SpaceTag;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdcConfig {
    pub mu0: f64,
    /// `mu_t = mu0 / mu_decay^t`.
    pub mu_decay: f64,
    pub c0: f64,
    /// `c_t = c_growth^t c0`.
    pub c_growth: f64,
    /// Escalation factor inside a stage.
    pub rho: f64,
    /// `eps_t = eps0 / eps_decay^t`, the DCA tolerance.
    pub eps0: f64,
    pub eps_decay: f64,
    /// Penalty-residual target `pen_eps0 / pen_eps_decay^t`.
    pub pen_eps0: f64,
    pub pen_eps_decay: f64,
    pub vio_tol: f64,
    pub mu_floor: f64,
    /// Abort once escalations exceed this multiple of the theoretical count.
    pub escalation_safety: f64,
    /// Round the final iterate onto the rank and cardinality sets.
    pub round_output: bool,
    /// Continue from the DCA's final trial point instead of its last stability center when
    /// the trial point does not increase `J_{mu,c}` over the start point.
    pub pass_trial_point: bool,
    pub sidca: SidcaConfig,
}

impl AdcConfig {
    pub fn nonneg() -> Self {
        AdcConfig {
            mu0: 50.0,
            mu_decay: 5.0,
            c0: 1e-2,
            c_growth: 4.0,
            rho: 4.0,
            eps0: 1e-4,
            eps_decay: 1.5,
            pen_eps0: 1e-3,
            pen_eps_decay: 2.0,
            vio_tol: 1e-9,
            mu_floor: 1e-9,
            escalation_safety: 4.0,
            round_output: true,
            pass_trial_point: true,
            sidca: SidcaConfig::default(),
        }
    }

    pub fn psd() -> Self {
        AdcConfig { mu0: 100.0, eps_decay: 1.2, ..Self::nonneg() }
    }

    pub fn phase_retrieval() -> Self {
        AdcConfig { mu_floor: 1e-10, ..Self::nonneg() }
    }

    /// Default schedule for a space: orthant and real PSD defaults, phase retrieval for Hermitian.
    pub fn for_space(space: SpaceTag) -> Self {
        match space {
            SpaceTag::NonnegRect => Self::nonneg(),
            SpaceTag::PsdReal => Self::psd(),
            SpaceTag::PsdHermitian => Self::phase_retrieval(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0 > 0.0
            && self.mu_decay > 1.0
            && self.c0 > 0.0
            && self.c_growth >= 1.0
            && self.rho > 1.0
            && self.eps0 > 0.0
            && self.eps_decay > 1.0
            && self.pen_eps0 > 0.0
            && self.pen_eps_decay > 1.0
            && self.vio_tol >= 0.0
            && self.mu_floor > 0.0;
        if !ok {
            return Err(Error::InvalidParameter("inconsistent ADC schedule".into()));
        }
        self.sidca.validate()
    }

    pub fn mu(&self, t: usize) -> f64 {
        self.mu0 / self.mu_decay.powi(t as i32)
    }

    pub fn c(&self, t: usize) -> f64 {
        self.c0 * self.c_growth.powi(t as i32)
    }

    pub fn eps(&self, t: usize) -> f64 {
        self.eps0 / self.eps_decay.powi(t as i32)
    }

    pub fn pen_eps(&self, t: usize) -> f64 {
        self.pen_eps0 / self.pen_eps_decay.powi(t as i32)
    }
}

/// Upper bound on the number of escalations `c <- rho c` needed at a stage:
/// `max(floor((ln(l0 - l_low) - ln(pen_eps c_t)) / ln rho + 1), 1)`.
pub fn escalation_bound(ell0: f64, ell_low: f64, pen_eps: f64, c_t: f64, rho: f64) -> usize {
    let gap = ell0 - ell_low;
    if !(gap > 0.0) {
        return 1;
    }
    let v = ((gap.ln() - (pen_eps * c_t).ln()) / rho.ln() + 1.0).floor();
    if v.is_finite() && v > 1.0 {
        v as usize
    } else {
        1
    }
}

/// Exact-penalty estimate `max(c_bar, ||A||^2 eps/2 + sqrt(2 J) ||A|| + eps/(2 mu) + phi tau)`,
/// where `c_bar = (J_mu(Pi_R(U)) - J_mu(U)) / eps` at the incumbent `U` when one is given.
pub fn exact_penalty_diagnostic<T: Scalar>(
    spec: &ProblemSpec<T>,
    mu: f64,
    best_j: f64,
    eps: f64,
    incumbent: Option<&DMatrix<T>>,
) -> Result<f64> {
    let a = spec.op.fro_norm();
    let bound = 0.5 * a * a * eps + (2.0 * best_j.max(0.0)).sqrt() * a + eps / (2.0 * mu)
        + spec.phi() as f64 * spec.tau;
    let c_bar = match incumbent {
        Some(u) => {
            let feas = prox::project_feasible(u, spec)?;
            let jf = prox::j_values(&feas, spec, mu, 0.0)?.j_mu;
            let ju = prox::j_values(u, spec, mu, 0.0)?.j_mu;
            (jf - ju) / eps
        }
        None => f64::NEG_INFINITY,
    };
    Ok(bound.max(c_bar))
}

/// Solves the sparse low-rank recovery problem from the feasible point `u0` (zero when `None`).
pub fn adc_solve<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &AdcConfig,
    u0: Option<&DMatrix<T>>,
) -> Result<SolveReport<T>> {
    cfg.validate()?;
    let clock = Instant::now();
    let u_init = match u0 {
        Some(u) => u.clone(),
        None => spec.zeros(),
    };
    let ell0 = spec.least_squares_value(&u_init)?;
    let mut ell_best = ell0;
    let mut current = u_init.clone();
    let mut trace = Vec::new();
    let mut flags = Vec::new();
    let mut inner_total = 0;
    let mut converged = false;
    let mut t = 0;

    let (vr, vs) = violation_metrics(&current, spec);
    if vr.max(vs) <= cfg.vio_tol && ell0 == 0.0 {
        // Zero residual at a feasible point is globally optimal.
        return SolveReport::finish("adc_sidca", spec, current, cfg.round_output, 0.0, 0, 0, true, flags, trace);
    }

    loop {
        let mu = cfg.mu(t);
        if mu <= cfg.mu_floor {
            break;
        }
        let eps_t = cfg.eps(t);
        let pen_eps = cfg.pen_eps(t);
        let c_t = cfg.c(t);
        let sidca_cfg = SidcaConfig { eps: eps_t, eps0: eps_t, ..cfg.sidca.clone() };

        // Warm start from the projection of the previous outer iterate when it is no worse.
        let cand = prox::project_feasible(&current, spec)?;
        let anchor = if prox::j_values(&cand, spec, mu, 0.0)?.j_mu
            <= prox::j_values(&u_init, spec, mu, 0.0)?.j_mu
        {
            cand
        } else {
            u_init.clone()
        };

        let limit_base = escalation_bound(ell0, 0.0, pen_eps, c_t, cfg.rho);
        let limit = ((limit_base as f64) * cfg.escalation_safety).ceil() as usize;
        let mut c = c_t;
        let mut prev = anchor.clone();
        let mut i = 0;
        loop {
            let start = if i == 0 {
                anchor.clone()
            } else if prox::j_values(&prev, spec, mu, c)?.j_mu_c <= prox::j_values(&anchor, spec, mu, c)?.j_mu_c {
                prev.clone()
            } else {
                anchor.clone()
            };
            let out = sidca_solve(spec, mu, c, &start, &sidca_cfg, None)?;
            inner_total += out.iterations;
            if out.stagnated {
                flags.push(format!("sidca stopped at the dual accuracy floor at t={t}, i={i}"));
            } else if !out.terminated {
                flags.push(format!("sidca hit its iteration cap at t={t}, i={i}"));
            }
            let j_start = prox::j_values(&start, spec, mu, c)?.j_mu_c;
            let mut next = out.center;
            let mut jv = prox::j_values(&next, spec, mu, c)?;
            if cfg.pass_trial_point && (out.terminated || out.stagnated) {
                let jt = prox::j_values(&out.last_v, spec, mu, c)?;
                if jt.j_mu_c <= j_start {
                    next = out.last_v;
                    jv = jt;
                }
            }
            ell_best = ell_best.min(jv.ell);
            let (vio_r, vio_s) = violation_metrics(&next, spec);
            trace.push(TraceRecord::Adc(AdcStageRecord {
                t,
                i,
                mu,
                c,
                sidca_iterations: out.iterations,
                serious_steps: out.serious_steps,
                ssn_iterations: out.ssn_iterations,
                penalty: jv.penalty,
                vio_r,
                vio_s,
                j_mu: jv.j_mu,
                ell: jv.ell,
                elapsed_s: clock.elapsed().as_secs_f64(),
            }));
            prev = next;
            if jv.penalty <= pen_eps {
                break;
            }
            i += 1;
            let observed = escalation_bound(ell0, ell_best, pen_eps, c_t, cfg.rho);
            if i > observed {
                let note = format!("stage {t}: {i} escalations exceed the observed-objective bound {observed}");
                if !flags.contains(&note) {
                    log::debug!("{note}");
                    flags.push(note);
                }
            }
            if i > limit {
                return Err(Error::PenaltyEscalation { stage: t, escalations: i, limit });
            }
            c *= cfg.rho;
        }
        current = prev;
        t += 1;
        let (vio_r, vio_s) = violation_metrics(&current, spec);
        if vio_r.max(vio_s) <= cfg.vio_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        flags.push("smoothing parameter reached its floor before the violation tolerance".into());
    }
    SolveReport::finish(
        "adc_sidca",
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
