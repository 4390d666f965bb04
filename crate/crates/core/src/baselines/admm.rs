use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemSpec;
use crate::prox::project;
use crate::report::{AdmmRecord, SolveReport, TraceRecord};
use crate::scalar::Scalar;
use crate::space::{ConstraintSet, SpaceTag};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub alpha_r: f64,
    pub alpha_s: f64,
    pub rho0: f64,
    pub beta: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            alpha_r: 1.5e-2,
            alpha_s: 2e-4,
            rho0: 0.1,
            beta: (1.0 + 5f64.sqrt()) / 2.0,
            theta: 1.2,
            tol: 1e-4,
            max_iter: 5000,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_r > 0.0
            && self.alpha_s > 0.0
            && self.rho0 > 0.0
            && self.beta > 0.0
            && self.beta <= (1.0 + 5f64.sqrt()) / 2.0 + 1e-15
            && self.theta > 1.0
            && self.tol >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter("invalid ADMM configuration".into()));
        }
        Ok(())
    }
}

/// Worst-case internal residuals observed over the run.
#[derive(Clone, Debug, Default)]
pub struct AdmmDiagnostics {
    /// Relative residual of the z-step linear system.
    pub max_z_residual: f64,
    /// Prox optimality residual of the Y-step (see [`y_step_residual`]).
    pub max_y_residual: f64,
    /// `||Y - Y^*||_F`.
    pub max_y_asymmetry: f64,
    pub iterations: usize,
    pub pinf: f64,
    pub dinf: f64,
    pub final_z: DVector<f64>,
}

fn soft_threshold<T: Scalar>(x: T, t: f64) -> T {
    let a = x.modulus();
    if a <= t {
        T::zero()
    } else {
        x * T::from_real((a - t) / a)
    }
}

/// `argmin_Y p^*(Y) + rho/2 ||Y - G||^2` for `p = alpha_s ||.||_1`, through the Moreau
/// decomposition `Y = G - ST_{rho alpha_s}(rho G) / rho`.
pub fn y_step<T: Scalar>(g: &DMatrix<T>, rho: f64, alpha_s: f64) -> DMatrix<T> {
    g.map(|x| x - soft_threshold(x * T::from_real(rho), rho * alpha_s) / T::from_real(rho))
}

/// Residual of `rho (G - Y) in d p^*(Y)`, checked as `Y in d p(rho (G - Y))`: entries with a
/// nonzero argument must equal `alpha_s` times its phase, the others must have modulus at most `alpha_s`.
pub fn y_step_residual<T: Scalar>(g: &DMatrix<T>, y: &DMatrix<T>, rho: f64, alpha_s: f64) -> f64 {
    let mut worst = 0.0f64;
    for (gi, yi) in g.iter().zip(y.iter()) {
        let w = (*gi - *yi) * T::from_real(rho);
        let a = w.modulus();
        let r = if a > 0.0 {
            (*yi - w * T::from_real(alpha_s / a)).modulus()
        } else {
            (yi.modulus() - alpha_s).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

struct ZSolver {
    rho: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl ZSolver {
    fn new(gram: &DMatrix<f64>, rho: f64) -> Result<Self> {
        let m = DMatrix::<f64>::identity(gram.nrows(), gram.ncols()) + gram * rho;
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::LinearAlgebra("I + rho AA^* is not positive definite".into()))?;
        Ok(ZSolver { rho, chol })
    }
}

pub fn admm_cspl_solve<T: Scalar>(spec: &ProblemSpec<T>, cfg: &AdmmConfig) -> Result<SolveReport<T>> {
    admm_cspl_solve_with_diagnostics(spec, cfg).map(|(r, _)| r)
}

/// ADMM on the dual of `min_{U psd} l(U) + alpha_r tr(U) + alpha_s ||U||_1`; the multiplier of
/// the linear constraint is the primal solution `U`.
pub fn admm_cspl_solve_with_diagnostics<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &AdmmConfig,
) -> Result<(SolveReport<T>, AdmmDiagnostics)> {
    cfg.validate()?;
    if spec.space != SpaceTag::PsdHermitian {
        return Err(Error::Unsupported("ADMM-CSPL needs a Hermitian PSD problem".into()));
    }
    let clock = Instant::now();
    let (n, _) = spec.shape();
    let gram = spec.op.gram();
    let ar_i = linalg::identity::<T>(n) * T::from_real(cfg.alpha_r);
    let mut z = DVector::<f64>::zeros(spec.op.len());
    let mut x = DMatrix::<T>::zeros(n, n);
    let mut y = DMatrix::<T>::zeros(n, n);
    let mut u = DMatrix::<T>::zeros(n, n);
    let mut rho = cfg.rho0;
    let mut solver = ZSolver::new(gram, rho)?;
    let mut diag = AdmmDiagnostics::default();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut k = 0;
    while k < cfg.max_iter {
        if solver.rho != rho {
            solver = ZSolver::new(gram, rho)?;
        }
        let rr = T::from_real(rho);
        // z-step.
        let c = &ar_i - &x + &y - &u / rr;
        let rhs = -(&spec.b) - spec.op.apply(&c)? * rho;
        z = solver.chol.solve(&rhs);
        let sys = &z + gram * &z * rho - &rhs;
        diag.max_z_residual = diag.max_z_residual.max(sys.norm() / rhs.norm().max(1.0));
        let az = spec.op.adjoint(&z)?;
        // X-step.
        x = project(&linalg::symmetrized(&az + &ar_i + &y - &u / rr), ConstraintSet::PsdCone)?;
        linalg::symmetrize_mut(&mut x);
        // Y-step.
        let g = &u / rr - &az - &ar_i + &x;
        let y_new = y_step(&g, rho, cfg.alpha_s);
        diag.max_y_residual = diag.max_y_residual.max(y_step_residual(&g, &y_new, rho, cfg.alpha_s));
        diag.max_y_asymmetry = diag.max_y_asymmetry.max(linalg::fro_norm(&(&y_new - y_new.adjoint())));
        let y_old = std::mem::replace(&mut y, y_new);
        // Multiplier step.
        let d = &az + &ar_i - &x + &y;
        let step = T::from_real(cfg.beta * rho);
        u -= &d * step;
        linalg::symmetrize_mut(&mut u);

        let dinf = linalg::fro_norm(&d);
        let eta_z = (&z + &spec.b - spec.op.apply(&u)?).norm();
        let eta_x = cfg.beta * rho * dinf;
        let eta_y = linalg::fro_norm(&(&y - &y_old + &d * step));
        let pinf = eta_z.max(eta_x).max(eta_y);
        diag.pinf = pinf;
        diag.dinf = dinf;
        trace.push(TraceRecord::Admm(AdmmRecord { k, rho, pinf, dinf }));
        k += 1;
        if pinf.max(dinf) <= cfg.tol {
            converged = true;
            break;
        }
        let ratio = if dinf > 0.0 { pinf / dinf } else { f64::INFINITY };
        if ratio < 0.2 {
            rho *= cfg.theta;
        } else if ratio > 5.0 {
            rho /= cfg.theta;
        }
    }
    diag.iterations = k;
    diag.final_z = z;
    let mut flags = Vec::new();
    if !converged {
        flags.push(format!("iteration cap {} reached", cfg.max_iter));
    }
    let report = SolveReport::finish(
        "admm_cspl",
        spec,
        u,
        false,
        clock.elapsed().as_secs_f64(),
        k,
        0,
        converged,
        flags,
        trace,
    )?;
    Ok((report, diag))
}
