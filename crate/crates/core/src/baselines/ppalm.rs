use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{low_rank_set, sparse_set};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemSpec;
use crate::prox::project;
use crate::report::{violation_metrics, PpalmStageRecord, SolveReport, TraceRecord};
use crate::scalar::Scalar;
use crate::space::SpaceTag;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PpalmConfig {
    pub rho0: f64,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Lipschitz constant of the gradient of `l`; estimated by power iteration when `None`.
    pub lipschitz: Option<f64>,
    pub eps0: f64,
    pub eps_decay: f64,
    pub rho_cap: f64,
    pub vio_tol: f64,
    pub max_inner: usize,
    pub round_output: bool,
}

impl PpalmConfig {
    pub fn matrix_recovery() -> Self {
        PpalmConfig {
            rho0: 0.05,
            sigma: 1.5,
            gamma1: 1.01,
            gamma2: 1.01,
            lipschitz: None,
            eps0: 1e-5,
            eps_decay: 1.2,
            rho_cap: 1e9,
            vio_tol: 1e-9,
            max_inner: 5000,
            round_output: true,
        }
    }

    pub fn phase_retrieval() -> Self {
        PpalmConfig { rho0: 0.1, sigma: 2.0, eps0: 1e-4, eps_decay: 1.5, rho_cap: 1e10, ..Self::matrix_recovery() }
    }

    pub fn for_space(space: SpaceTag) -> Self {
        match space {
            SpaceTag::PsdHermitian => Self::phase_retrieval(),
            _ => Self::matrix_recovery(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rho0 > 0.0
            && self.sigma > 1.0
            && self.gamma1 > 1.0
            && self.gamma2 > 1.0
            && self.eps0 > 0.0
            && self.eps_decay > 1.0
            && self.max_inner > 0
            && self.lipschitz.is_none_or(|l| l > 0.0);
        if !ok {
            return Err(Error::InvalidParameter("invalid PPALM configuration".into()));
        }
        Ok(())
    }
}

/// Per-step bookkeeping of the penalty function, used to check PALM's descent property.
#[derive(Clone, Debug, Default)]
pub struct PpalmDiagnostics {
    pub lipschitz: f64,
    pub inner_steps: usize,
    /// Largest `Phi_rho(next) - Phi_rho(prev)` over all inner steps, relative to `max(1, |Phi|)`.
    pub max_phi_increase: f64,
    /// Largest violation of the membership `U in C_s`, `V in C_r` after any step.
    pub max_membership_error: f64,
}

/// Largest eigenvalue of `A^* A` by power iteration.
pub fn power_iteration_lmax<T: Scalar>(spec: &ProblemSpec<T>, iters: usize, tol: f64) -> Result<f64> {
    let (m, n) = spec.shape();
    let mut x = DMatrix::<T>::from_fn(m, n, |i, j| {
        // Deterministic, non-degenerate start.
        T::from_real(1.0 + ((i * 7 + j * 13) % 11) as f64 / 11.0)
    });
    if spec.space.is_psd() {
        linalg::symmetrize_mut(&mut x);
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        let nx = linalg::fro_norm(&x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        x /= T::from_real(nx);
        let y = spec.op.adjoint(&spec.op.apply(&x)?)?;
        let next = linalg::inner(&x, &y);
        let done = (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        x = y;
        if done {
            break;
        }
    }
    Ok(lambda)
}

fn phi_value<T: Scalar>(spec: &ProblemSpec<T>, u: &DMatrix<T>, v: &DMatrix<T>, rho: f64) -> Result<f64> {
    Ok(spec.least_squares_value(u)? + 0.5 * rho * linalg::dist(u, v).powi(2))
}

pub fn ppalm_solve<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &PpalmConfig,
    u0: Option<&DMatrix<T>>,
    v0: Option<&DMatrix<T>>,
) -> Result<SolveReport<T>> {
    ppalm_solve_with_diagnostics(spec, cfg, u0, v0).map(|(r, _)| r)
}

/// Penalty PALM on `Phi_rho(U, V) = l(U) + rho/2 ||U - V||^2` with `U` kept in the sparse set
/// and `V` in the low-rank set; `rho` grows geometrically until `U` is feasible.
pub fn ppalm_solve_with_diagnostics<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &PpalmConfig,
    u0: Option<&DMatrix<T>>,
    v0: Option<&DMatrix<T>>,
) -> Result<(SolveReport<T>, PpalmDiagnostics)> {
    cfg.validate()?;
    let clock = Instant::now();
    let s_set = sparse_set(spec);
    let r_set = low_rank_set(spec);
    let lip = match cfg.lipschitz {
        Some(l) => l,
        None => power_iteration_lmax(spec, 50, 1e-6)?,
    };
    let mut diag = PpalmDiagnostics { lipschitz: lip, ..Default::default() };
    let mut u = project(&u0.cloned().unwrap_or_else(|| spec.zeros()), s_set)?;
    let mut v = project(&v0.cloned().unwrap_or_else(|| spec.zeros()), r_set)?;
    let mut rho = cfg.rho0;
    let mut trace = Vec::new();
    let mut flags = Vec::new();
    let mut inner_total = 0;
    let mut converged = false;
    let mut k = 0;
    loop {
        let eps = cfg.eps0 / cfg.eps_decay.powi(k as i32);
        let t1 = cfg.gamma1 * (lip + rho);
        let t2 = cfg.gamma2 * rho;
        let mut phi = phi_value(spec, &u, &v, rho)?;
        let mut l = 0;
        let mut capped = true;
        while l < cfg.max_inner {
            l += 1;
            let grad = spec.least_squares_grad(&u)? + (&u - &v) * T::from_real(rho);
            let u_next = project(&(&u - grad / T::from_real(t1)), s_set)?;
            let v_next = project(&(&v - (&v - &u_next) * T::from_real(rho / t2)), r_set)?;
            let du = linalg::dist(&u_next, &u) / linalg::fro_norm(&u).max(1.0);
            let dv = linalg::dist(&v_next, &v) / linalg::fro_norm(&v).max(1.0);
            let phi_next = phi_value(spec, &u_next, &v_next, rho)?;
            diag.max_phi_increase = diag.max_phi_increase.max((phi_next - phi) / phi.abs().max(1.0));
            let member = linalg::dist(&u_next, &project(&u_next, s_set)?)
                .max(linalg::dist(&v_next, &project(&v_next, r_set)?));
            diag.max_membership_error = diag.max_membership_error.max(member);
            u = u_next;
            v = v_next;
            phi = phi_next;
            if du.max(dv) <= eps {
                capped = false;
                break;
            }
        }
        inner_total += l;
        diag.inner_steps += l;
        if capped {
            flags.push(format!("inner iteration cap at k = {k}"));
        }
        let (vio_r, vio_s) = violation_metrics(&u, spec);
        trace.push(TraceRecord::Ppalm(PpalmStageRecord {
            k,
            rho,
            inner_iterations: l,
            ell: spec.least_squares_value(&u)?,
            vio_r,
            vio_s,
        }));
        k += 1;
        if vio_r.max(vio_s) <= cfg.vio_tol {
            converged = true;
            break;
        }
        rho *= cfg.sigma;
        if rho > cfg.rho_cap {
            flags.push(format!("penalty cap {:e} reached", cfg.rho_cap));
            break;
        }
    }
    let report = SolveReport::finish(
        "ppalm",
        spec,
        u,
        cfg.round_output,
        clock.elapsed().as_secs_f64(),
        k,
        inner_total,
        converged,
        flags,
        trace,
    )?;
    Ok((report, diag))
}
