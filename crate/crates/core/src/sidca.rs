//! Inexact DCA with a sieving test on the approximate subproblem solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemSpec;
use crate::prox;
use crate::scalar::Scalar;
use crate::ssn::{self, CertificateStrategy, SsnOptions, Subproblem};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SidcaConfig {
    /// Sieving parameter in `(0, 1)`.
    pub kappa: f64,
    /// Outer tolerance on the step and on the certificate.
    pub eps: f64,
    /// Initial inexactness.
    pub eps0: f64,
    /// Decay after serious steps.
    pub rho1: f64,
    /// Decay after null steps.
    pub rho2: f64,
    pub k0: f64,
    pub max_iter: usize,
    /// Measure the step relative to `max(1, ||U||)`.
    pub relative_step: bool,
    pub strategy: CertificateStrategy,
    pub ssn: SsnOptions,
}

impl Default for SidcaConfig {
    fn default() -> Self {
        SidcaConfig {
            kappa: 0.1,
            eps: 1e-4,
            eps0: 1e-4,
            rho1: 0.9,
            rho2: 0.99,
            k0: 20.0,
            max_iter: 5000,
            relative_step: true,
            strategy: CertificateStrategy::Cheap,
            ssn: SsnOptions::default(),
        }
    }
}

impl SidcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidParameter("kappa must lie in (0,1)".into()));
        }
        if !(self.rho1 > 0.0 && self.rho1 <= self.rho2 && self.rho2 < 1.0) {
            return Err(Error::InvalidParameter("need 0 < rho1 <= rho2 < 1".into()));
        }
        if !(self.eps0 > 0.0) || self.eps < 0.0 || !(self.k0 > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// `eps_{k+1} = eps_k max(rho, k/(k0+k))` with `rho = rho1` after serious steps, `rho2` otherwise.
pub fn next_inexactness(eps: f64, k: usize, serious: bool, cfg: &SidcaConfig) -> f64 {
    let rho = if serious { cfg.rho1 } else { cfg.rho2 };
    let k = k as f64;
    eps * rho.max(k / (cfg.k0 + k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Serious,
    Null,
    Terminate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SidcaTraceRecord {
    pub k: usize,
    pub kind: StepKind,
    /// `J_{mu,c}` at the stability center before the step.
    pub j_before: f64,
    /// `J_{mu,c}` at the stability center after the step.
    pub j_after: f64,
    /// `||V - U||_F`.
    pub step_norm: f64,
    pub delta_bound: f64,
    pub delta_exact: Option<f64>,
    /// Inexactness target the certificate was checked against.
    pub eps_k: f64,
    pub certificate_accepted: bool,
    /// `||U~ - Pi(U~ - mu grad F(U~) + mu Delta~)||_F` when the residual was materialized.
    pub fixed_point_residual: Option<f64>,
    pub ssn_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SidcaOutcome<T: Scalar> {
    /// Last stability center.
    pub center: DMatrix<T>,
    pub center_j: f64,
    /// Last trial point `V`.
    pub last_v: DMatrix<T>,
    pub z: DVector<f64>,
    pub terminated: bool,
    /// Stopped because null steps stopped changing the trial point: the dual solver is at its
    /// rounding floor and the certificate cannot be tightened further.
    pub stagnated: bool,
    pub iterations: usize,
    pub serious_steps: usize,
    pub ssn_iterations: usize,
    pub trace: Vec<SidcaTraceRecord>,
}

/// Consecutive unchanged null steps after which the loop gives up.
const STAGNATION_NULLS: usize = 3;

fn j_mu_c<T: Scalar>(u: &DMatrix<T>, spec: &ProblemSpec<T>, mu: f64, c: f64) -> Result<f64> {
    Ok(prox::j_values(u, spec, mu, c)?.j_mu_c)
}

/// Fixed-point residual of the certificate: `U~ = Pi(U~ - mu grad F(U~) + mu Delta~)`.
pub fn certificate_fixed_point_residual<T: Scalar>(
    sub: &Subproblem<'_, T>,
    v: &DMatrix<T>,
    delta: &DMatrix<T>,
) -> Result<f64> {
    let g = sub.primal_grad(v)?;
    let mu = T::from_real(sub.mu);
    let arg = v - g * mu + delta * mu;
    let p = sub.cone_projection(&arg);
    Ok(linalg::dist(v, &p))
}

/// Runs the sieving DCA on `J_{mu,c}` from the cone point `u0`. `z0` warm-starts the dual;
/// `None` uses the residual `A(U0) - b`, the dual value consistent with `U0`.
pub fn sidca_solve<T: Scalar>(
    spec: &ProblemSpec<T>,
    mu: f64,
    c: f64,
    u0: &DMatrix<T>,
    cfg: &SidcaConfig,
    z0: Option<&DVector<f64>>,
) -> Result<SidcaOutcome<T>> {
    cfg.validate()?;
    if !(mu > 0.0 && c >= 0.0) {
        return Err(Error::InvalidParameter("need mu > 0 and c >= 0".into()));
    }
    let mut u = u0.clone();
    let mut j_u = j_mu_c(&u, spec, mu, c)?;
    let mut sub = Subproblem::new(spec, mu, c, prox::select_w_subgradient(&u, spec, mu, c)?);
    let mut z = match z0 {
        Some(z) => z.clone(),
        None => spec.residual(&u)?,
    };
    let mut eps_k = cfg.eps0;
    let mut trace = Vec::new();
    let mut serious_steps = 0;
    let mut ssn_total = 0;
    let mut last_v = u.clone();
    let mut terminated = false;
    let mut stagnated = false;
    let mut frozen_nulls = 0;
    let mut prev_null: Option<(f64, f64)> = None;
    let mut k = 0;
    while k < cfg.max_iter {
        let chi = ssn::ssn_tolerance(&sub, eps_k);
        let mut state = ssn::ssn_solve(&sub, &z, chi, &cfg.ssn)?;
        ssn_total += state.iterations;
        let mut cert = ssn::make_certificate(&sub, &state, cfg.strategy, eps_k)?;
        if !cert.accepted && cfg.strategy == CertificateStrategy::Cheap {
            // Below the SSN floor the cheap bound can be too loose; the residual itself may
            // still certify the point.
            let exact = ssn::make_certificate(&sub, &state, CertificateStrategy::Exact, eps_k)?;
            if exact.accepted {
                cert = exact;
            } else if !state.converged || state.stalled {
                let retry = ssn::ssn_solve(&sub, &state.z, chi * 1e-2, &cfg.ssn)?;
                ssn_total += retry.iterations;
                state = retry;
                cert = ssn::make_certificate(&sub, &state, CertificateStrategy::Exact, eps_k)?;
            } else {
                cert = exact;
            }
        }
        z = state.z.clone();
        let v = cert.v.clone();
        let step = linalg::dist(&v, &u);
        let delta = cert.delta_norm_bound;
        let fixed_point_residual = match &cert.delta {
            Some(d) => Some(certificate_fixed_point_residual(&sub, &v, d)?),
            None => None,
        };
        let step_measure = if cfg.relative_step { step / linalg::fro_norm(&u).max(1.0) } else { step };
        let mut rec = SidcaTraceRecord {
            k,
            kind: StepKind::Null,
            j_before: j_u,
            j_after: j_u,
            step_norm: step,
            delta_bound: delta,
            delta_exact: cert.delta_norm_exact,
            eps_k,
            certificate_accepted: cert.accepted,
            fixed_point_residual,
            ssn_iterations: state.iterations,
        };
        last_v = v;
        if step_measure <= cfg.eps && delta <= cfg.eps {
            rec.kind = StepKind::Terminate;
            trace.push(rec);
            terminated = true;
            k += 1;
            break;
        }
        let serious = delta < (1.0 - cfg.kappa) * step / (2.0 * mu);
        if !serious {
            let frozen = (state.stalled || state.converged)
                && prev_null.is_some_and(|(ps, pd)| (step - ps).abs() <= 1e-12 * ps.max(1e-300) && delta >= pd);
            frozen_nulls = if frozen { frozen_nulls + 1 } else { 0 };
            prev_null = Some((step, delta));
            if frozen_nulls >= STAGNATION_NULLS {
                trace.push(rec);
                stagnated = true;
                k += 1;
                break;
            }
        } else {
            prev_null = None;
            frozen_nulls = 0;
        }
        if serious {
            u = last_v.clone();
            j_u = j_mu_c(&u, spec, mu, c)?;
            sub = Subproblem::new(spec, mu, c, prox::select_w_subgradient(&u, spec, mu, c)?);
            serious_steps += 1;
            rec.kind = StepKind::Serious;
            rec.j_after = j_u;
        }
        trace.push(rec);
        eps_k = next_inexactness(eps_k, k, serious, cfg);
        k += 1;
    }
    Ok(SidcaOutcome {
        center: u,
        center_j: j_u,
        last_v,
        z,
        terminated,
        stagnated,
        iterations: k,
        serious_steps,
        ssn_iterations: ssn_total,
        trace,
    })
}
