//! Dual semismooth Newton solver for the strongly convex DCA subproblem
//!
//! `min 1/2 ||A(U) - b||^2 + ||U||^2/(2 mu) - <Phi, U>` over the cone.
//!
//! The dual objective is `Theta(z) = 1/2 ||z||^2 + z^T b + ||Pi(mu t(z))||^2 / (2 mu)` with
//! `t(z) = Phi - A^*(z)`; the primal point is recovered as `U = Pi(mu t(z))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SortedEigen};
use crate::problem::ProblemSpec;
use crate::scalar::Scalar;

/// The DCA subproblem for a fixed subgradient `W`.
#[derive(Clone, Debug)]
pub struct Subproblem<'a, T: Scalar> {
    pub spec: &'a ProblemSpec<T>,
    pub mu: f64,
    pub c: f64,
    pub w: DMatrix<T>,
    /// `W - c I` (PSD spaces) or `W - c E` (orthant).
    pub phi: DMatrix<T>,
    /// `mu ||A||_F ||A^T A||_F`, the factor of the cheap certificate bound.
    pub cert_scale: f64,
}

impl<'a, T: Scalar> Subproblem<'a, T> {
    pub fn new(spec: &'a ProblemSpec<T>, mu: f64, c: f64, w: DMatrix<T>) -> Self {
        let mut phi = w.clone();
        if spec.space.is_psd() {
            for i in 0..phi.nrows() {
                phi[(i, i)] -= T::from_real(c);
            }
        } else {
            phi.apply(|v| *v -= T::from_real(c));
        }
        Self::with_phi(spec, mu, c, w, phi)
    }

    /// Subproblem with an explicit linear term `Phi`.
    pub fn with_phi(spec: &'a ProblemSpec<T>, mu: f64, c: f64, w: DMatrix<T>, phi: DMatrix<T>) -> Self {
        let cert_scale = mu * spec.op.fro_norm() * spec.op.gram_fro_norm();
        Subproblem { spec, mu, c, w, phi, cert_scale }
    }

    /// `t(z) = Phi - A^*(z)`.
    pub fn t_of(&self, z: &DVector<f64>) -> Result<DMatrix<T>> {
        let mut t = &self.phi - self.spec.op.adjoint(z)?;
        if self.spec.space.is_psd() {
            linalg::symmetrize_mut(&mut t);
        }
        Ok(t)
    }

    /// Cone projection of `mu t(z)` together with the data needed for generalized Hessians.
    pub fn project_scaled(&self, t: &DMatrix<T>) -> (DMatrix<T>, ProjInfo<T>) {
        let x = t * T::from_real(self.mu);
        if self.spec.space.is_psd() {
            let cache = SpectralCache::new(&x);
            (cache.positive_part(), ProjInfo::Spectral(cache))
        } else {
            let mut active = Vec::new();
            let mut p = x;
            for j in 0..p.ncols() {
                for i in 0..p.nrows() {
                    if p[(i, j)].real() > 0.0 {
                        active.push((i, j));
                        p[(i, j)] = T::from_real(p[(i, j)].real());
                    } else {
                        p[(i, j)] = T::zero();
                    }
                }
            }
            (p, ProjInfo::Active(active))
        }
    }

    pub fn evaluate(&self, z: &DVector<f64>) -> Result<ThetaEval<T>> {
        let t = self.t_of(z)?;
        let (primal, info) = self.project_scaled(&t);
        let value = 0.5 * z.norm_squared() + z.dot(&self.spec.b)
            + linalg::fro_norm_sq(&primal) / (2.0 * self.mu);
        let grad = z + &self.spec.b - self.spec.op.apply(&primal)?;
        Ok(ThetaEval { z: z.clone(), value, grad, primal, info })
    }

    pub fn theta_value(&self, z: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluate(z)?.value)
    }

    pub fn theta_grad(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.evaluate(z)?.grad)
    }

    /// Primal objective `1/2||A(U)-b||^2 + ||U||^2/(2mu) - <Phi,U>` (cone membership not checked).
    pub fn primal_value(&self, u: &DMatrix<T>) -> Result<f64> {
        Ok(self.spec.least_squares_value(u)? + linalg::fro_norm_sq(u) / (2.0 * self.mu)
            - linalg::inner(&self.phi, u))
    }

    /// `grad F(U) = A^*(A(U) - b) - Phi + U/mu`.
    pub fn primal_grad(&self, u: &DMatrix<T>) -> Result<DMatrix<T>> {
        let mut g = self.spec.least_squares_grad(u)? - &self.phi + u / T::from_real(self.mu);
        if self.spec.space.is_psd() {
            linalg::symmetrize_mut(&mut g);
        }
        Ok(g)
    }

    /// Projection onto the cone of the space.
    pub fn cone_projection(&self, m: &DMatrix<T>) -> DMatrix<T> {
        if self.spec.space.is_psd() {
            SpectralCache::new(m).positive_part()
        } else {
            m.map(|v| T::from_real(v.real().max(0.0)))
        }
    }

    /// Generalized Hessian action `v -> v + mu A(W_z(A^*(v)))`.
    pub fn newton_operator(&self, info: &ProjInfo<T>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.spec.op.adjoint(v)?;
        let r = match info {
            ProjInfo::Spectral(cache) => hessian_action_psd(cache, &d)?,
            ProjInfo::Active(active) => {
                let mut r = DMatrix::zeros(d.nrows(), d.ncols());
                for &(i, j) in active {
                    r[(i, j)] = T::from_real(d[(i, j)].real());
                }
                r
            }
        };
        Ok(v + self.spec.op.apply(&r)? * self.mu)
    }
}

/// Spectral data of `mu t(z)`: eigenvalues nonincreasing, `n_pos = |alpha|` positive ones.
#[derive(Clone, Debug)]
pub struct SpectralCache<T: Scalar> {
    pub eig: SortedEigen<T>,
    pub n_pos: usize,
}

impl<T: Scalar> SpectralCache<T> {
    pub fn new(m: &DMatrix<T>) -> Self {
        let eig = SortedEigen::new(m);
        let n_pos = eig.values.iter().filter(|&&l| l > 0.0).count();
        SpectralCache { eig, n_pos }
    }

    pub fn from_parts(values: DVector<f64>, vectors: DMatrix<T>) -> Self {
        let n_pos = values.iter().filter(|&&l| l > 0.0).count();
        SpectralCache { eig: SortedEigen { values, vectors }, n_pos }
    }

    pub fn dim(&self) -> usize {
        self.eig.values.len()
    }

    pub fn positive_part(&self) -> DMatrix<T> {
        let k = self.n_pos;
        self.eig.reconstruct_with(|j, l| if j < k { l } else { 0.0 })
    }

    /// `nu_ij = lambda_i / (lambda_i - lambda_j)` for `i` in alpha, `j` in the complement.
    fn nu(&self) -> DMatrix<f64> {
        let k = self.n_pos;
        let n = self.dim();
        let l = &self.eig.values;
        DMatrix::from_fn(k, n - k, |i, j| l[i] / (l[i] - l[k + j]))
    }
}

/// What the cone projection looked like at the current dual point.
#[derive(Clone, Debug)]
pub enum ProjInfo<T: Scalar> {
    Spectral(SpectralCache<T>),
    /// Entries (row, col) where `mu t(z)` is positive.
    Active(Vec<(usize, usize)>),
}

#[derive(Clone, Debug)]
pub struct ThetaEval<T: Scalar> {
    pub z: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    pub primal: DMatrix<T>,
    pub info: ProjInfo<T>,
}

fn check_cache<T: Scalar>(cache: &SpectralCache<T>, d: &DMatrix<T>) -> Result<()> {
    let n = cache.dim();
    if d.shape() != (n, n) {
        return Err(Error::Dimension(format!("Hessian input {:?} vs spectral cache of order {n}", d.shape())));
    }
    Ok(())
}

/// `Q (T o (Q^* D Q)) Q^*` evaluated through the positive eigenvectors only.
pub fn hessian_action_low<T: Scalar>(cache: &SpectralCache<T>, d: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_cache(cache, d)?;
    let n = cache.dim();
    let k = cache.n_pos;
    if k == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let q = &cache.eig.vectors;
    let qa = q.columns(0, k);
    let qb = q.columns(k, n - k);
    let ua = qa.adjoint() * d;
    let mut inner = (&ua * qa) * qa.adjoint() * T::from_real(0.5);
    if k < n {
        let nu = cache.nu();
        let mut m = &ua * qb;
        m.zip_apply(&nu, |x, w| *x *= T::from_real(w));
        inner += m * qb.adjoint();
    }
    let h = qa * inner;
    Ok(&h + h.adjoint())
}

/// `D - Q ((E - T) o (Q^* D Q)) Q^*` evaluated through the nonpositive eigenvectors only.
pub fn hessian_action_complement<T: Scalar>(cache: &SpectralCache<T>, d: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_cache(cache, d)?;
    let n = cache.dim();
    let k = cache.n_pos;
    if k == n {
        return Ok(d.clone());
    }
    let q = &cache.eig.vectors;
    let qa = q.columns(0, k);
    let qb = q.columns(k, n - k);
    let ub = qb.adjoint() * d;
    let mut inner = (&ub * qb) * qb.adjoint() * T::from_real(0.5);
    if k > 0 {
        // 1 - nu_ij = -lambda_j / (lambda_i - lambda_j), stored transposed.
        let l = &cache.eig.values;
        let one_minus = DMatrix::from_fn(n - k, k, |j, i| -l[k + j] / (l[i] - l[k + j]));
        let mut m = &ub * qa;
        m.zip_apply(&one_minus, |x, w| *x *= T::from_real(w));
        inner += m * qa.adjoint();
    }
    let h = qb * inner;
    Ok(d - (&h + h.adjoint()))
}

/// Generalized Jacobian of the PSD projection applied to `D`, using whichever of the two
/// equivalent forms touches fewer eigenvectors.
pub fn hessian_action_psd<T: Scalar>(cache: &SpectralCache<T>, d: &DMatrix<T>) -> Result<DMatrix<T>> {
    if cache.n_pos <= cache.dim() - cache.n_pos {
        hessian_action_low(cache, d)
    } else {
        hessian_action_complement(cache, d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NewtonBackend {
    /// Woodbury solve on the orthant when `|I| <= N`, conjugate gradients otherwise.
    Auto,
    /// Always conjugate gradients.
    Cg,
}

#[derive(Clone, Debug)]
pub struct NewtonDirection {
    pub d: DVector<f64>,
    pub cg_iters: usize,
    /// `false` when CG hit its iteration cap.
    pub solved: bool,
}

/// Plain conjugate gradients for an SPD operator; stops at `||r|| <= tol`.
pub fn conjugate_gradient(
    apply: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    rhs: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize, bool)> {
    let mut x = DVector::zeros(rhs.len());
    let mut r = rhs.clone();
    let mut rr = r.norm_squared();
    if rr.sqrt() <= tol {
        return Ok((x, 0, true));
    }
    let mut p = r.clone();
    for it in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Ok((x, it, false));
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= tol {
            return Ok((x, it, true));
        }
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    Ok((x, max_iter, false))
}

/// Woodbury solve of `(I + mu A_I A_I^T) d = -g`.
pub fn smw_direction(a_i: &DMatrix<f64>, mu: f64, g: &DVector<f64>) -> Result<DVector<f64>> {
    let k = a_i.ncols();
    if k == 0 {
        return Ok(-g);
    }
    let at = a_i.transpose();
    let mut m = &at * a_i;
    for i in 0..k {
        m[(i, i)] += 1.0 / mu;
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("Woodbury system not positive definite".into()))?;
    let x = chol.solve(&(&at * g));
    Ok(-(g - a_i * x))
}

/// Newton direction `(I + S) d = -grad` at the evaluation point.
pub fn newton_direction<T: Scalar>(
    sub: &Subproblem<'_, T>,
    eval: &ThetaEval<T>,
    backend: NewtonBackend,
    cg_max: usize,
) -> Result<NewtonDirection> {
    let g = &eval.grad;
    let gn = g.norm();
    if let ProjInfo::Active(active) = &eval.info {
        if active.is_empty() {
            return Ok(NewtonDirection { d: -g, cg_iters: 0, solved: true });
        }
        if backend == NewtonBackend::Auto && active.len() <= sub.spec.op.len() {
            let a_i = sub.spec.op.entry_columns(active);
            return Ok(NewtonDirection { d: smw_direction(&a_i, sub.mu, g)?, cg_iters: 0, solved: true });
        }
    }
    if let ProjInfo::Spectral(cache) = &eval.info {
        if cache.n_pos == 0 {
            return Ok(NewtonDirection { d: -g, cg_iters: 0, solved: true });
        }
    }
    let tol = 0.5f64.min(gn.sqrt()) * gn;
    let rhs = -g;
    let (d, it, ok) = conjugate_gradient(|v| sub.newton_operator(&eval.info, v), &rhs, tol, cg_max)?;
    if !ok {
        log::warn!("CG reached its cap ({cg_max}) in the Newton system");
    }
    // A truncated CG iterate of an SPD system started at zero is still a descent direction;
    // guard against the degenerate zero step.
    let d = if d.norm() > 0.0 { d } else { rhs };
    Ok(NewtonDirection { d, cg_iters: it, solved: ok })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SsnOptions {
    pub max_iter: usize,
    /// Backtracking shrink factor.
    pub eta: f64,
    /// Sufficient-decrease constant.
    pub rho: f64,
    pub cg_max: usize,
    pub max_backtracks: usize,
    pub backend: NewtonBackend,
}

impl Default for SsnOptions {
    fn default() -> Self {
        SsnOptions { max_iter: 100, eta: 0.5, rho: 1e-4, cg_max: 200, max_backtracks: 60, backend: NewtonBackend::Auto }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SsnTraceRecord {
    pub j: usize,
    pub theta: f64,
    pub gamma_norm: f64,
    pub step: f64,
    pub cg_iters: usize,
}

#[derive(Clone, Debug)]
pub struct SsnState<T: Scalar> {
    pub z: DVector<f64>,
    /// Primal point `Pi(mu t(z))`.
    pub u: DMatrix<T>,
    /// KKT residual `grad Theta(z)`.
    pub gamma: DVector<f64>,
    pub theta: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Line search failed to find a decrease (rounding floor reached).
    pub stalled: bool,
    pub cg_cap_hits: usize,
    pub trace: Vec<SsnTraceRecord>,
}

impl<T: Scalar> SsnState<T> {
    pub fn gamma_norm(&self) -> f64 {
        self.gamma.norm()
    }
}

/// `Theta(new) - Theta(old)` evaluated term by term to limit cancellation. When the result is
/// below the rounding level of the projections, the trapezoidal estimate from the two gradients
/// is used instead.
fn theta_change<T: Scalar>(sub: &Subproblem<'_, T>, old: &ThetaEval<T>, new: &ThetaEval<T>) -> f64 {
    let dz = &new.z - &old.z;
    let (a, h, c) = (dz.dot(&old.z), 0.5 * dz.norm_squared(), dz.dot(&sub.spec.b));
    let mut proj = 0.0;
    for (x, y) in new.primal.iter().zip(old.primal.iter()) {
        proj += ((*x - *y).conjugate() * (*x + *y)).real();
    }
    let change = a + h + c + proj / (2.0 * sub.mu);
    let size = linalg::fro_norm_sq(&new.primal) + linalg::fro_norm_sq(&old.primal);
    let rounding = 64.0 * f64::EPSILON * (a.abs() + h + c.abs() + size / (2.0 * sub.mu));
    if change.abs() <= rounding {
        0.5 * (&old.grad + &new.grad).dot(&dz)
    } else {
        change
    }
}

/// Semismooth Newton with Armijo backtracking from `z0`; stops once `||grad Theta|| < chi`.
pub fn ssn_solve<T: Scalar>(
    sub: &Subproblem<'_, T>,
    z0: &DVector<f64>,
    chi: f64,
    opts: &SsnOptions,
) -> Result<SsnState<T>> {
    if !(chi > 0.0) {
        return Err(Error::InvalidParameter("SSN tolerance must be positive".into()));
    }
    let mut eval = sub.evaluate(z0)?;
    let mut trace = Vec::new();
    let mut cg_cap_hits = 0;
    let mut stalled = false;
    let mut converged = false;
    let mut j = 0;
    loop {
        let gn = eval.grad.norm();
        if gn < chi {
            converged = true;
            break;
        }
        if j >= opts.max_iter {
            break;
        }
        let dir = newton_direction(sub, &eval, opts.backend, opts.cg_max)?;
        if !dir.solved {
            cg_cap_hits += 1;
        }
        let slope = eval.grad.dot(&dir.d);
        let (d, slope) = if slope < 0.0 { (dir.d, slope) } else { (-&eval.grad, -gn * gn) };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let cand = sub.evaluate(&(&eval.z + &d * step))?;
            if theta_change(sub, &eval, &cand) <= opts.rho * step * slope {
                accepted = Some(cand);
                break;
            }
            step *= opts.eta;
        }
        j += 1;
        match accepted {
            Some(next) => {
                eval = next;
                trace.push(SsnTraceRecord {
                    j,
                    theta: eval.value,
                    gamma_norm: eval.grad.norm(),
                    step,
                    cg_iters: dir.cg_iters,
                });
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    Ok(SsnState {
        z: eval.z,
        u: eval.primal,
        theta: eval.value,
        gamma: eval.grad,
        iterations: j,
        converged,
        stalled,
        cg_cap_hits,
        trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateStrategy {
    Exact,
    Cheap,
}

#[derive(Clone, Debug)]
pub struct Certificate<T: Scalar> {
    /// Refined primal point `U~ = Pi(U - mu grad F(U))`.
    pub v: DMatrix<T>,
    /// `Delta~ = A^*A(U~ - U)`, a subgradient of the subproblem objective at `U~`.
    pub delta: Option<DMatrix<T>>,
    /// Bound used by the sieving test: the exact norm for `Exact`, `mu ||A|| ||A^T A|| ||gamma||`
    /// for `Cheap`.
    pub delta_norm_bound: f64,
    pub delta_norm_exact: Option<f64>,
    /// `mu ||A^T A||_F ||A^*(gamma)||_F`.
    pub tight_bound: f64,
    pub gamma_norm: f64,
    pub eps: f64,
    pub accepted: bool,
}

/// Refined point and residual `(U~, Delta~)` built from a primal estimate.
pub fn refine<T: Scalar>(sub: &Subproblem<'_, T>, u: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let g = sub.primal_grad(u)?;
    let v = sub.cone_projection(&(u - g * T::from_real(sub.mu)));
    let mut delta = sub.spec.op.adjoint(&sub.spec.op.apply(&(&v - u))?)?;
    if sub.spec.space.is_psd() {
        linalg::symmetrize_mut(&mut delta);
    }
    Ok((v, delta))
}

pub fn make_certificate<T: Scalar>(
    sub: &Subproblem<'_, T>,
    state: &SsnState<T>,
    strategy: CertificateStrategy,
    eps: f64,
) -> Result<Certificate<T>> {
    let gamma_norm = state.gamma.norm();
    let cheap = sub.cert_scale * gamma_norm;
    let tight = sub.mu * sub.spec.op.gram_fro_norm() * linalg::fro_norm(&sub.spec.op.adjoint(&state.gamma)?);
    match strategy {
        CertificateStrategy::Exact => {
            let (v, delta) = refine(sub, &state.u)?;
            let nd = linalg::fro_norm(&delta);
            Ok(Certificate {
                v,
                delta: Some(delta),
                delta_norm_bound: nd,
                delta_norm_exact: Some(nd),
                tight_bound: tight,
                gamma_norm,
                eps,
                accepted: nd <= eps,
            })
        }
        CertificateStrategy::Cheap => {
            let accepted = cheap <= eps;
            let (v, delta, exact) = if accepted {
                let (v, delta) = refine(sub, &state.u)?;
                let nd = linalg::fro_norm(&delta);
                (v, Some(delta), Some(nd))
            } else {
                (state.u.clone(), None, None)
            };
            Ok(Certificate {
                v,
                delta,
                delta_norm_bound: cheap,
                delta_norm_exact: exact,
                tight_bound: tight,
                gamma_norm,
                eps,
                accepted,
            })
        }
    }
}

/// SSN tolerance `max(eps / (mu ||A|| ||A^T A||), 1e-12)` matching a target inexactness `eps`.
pub fn ssn_tolerance<T: Scalar>(sub: &Subproblem<'_, T>, eps: f64) -> f64 {
    if sub.cert_scale > 0.0 {
        (eps / sub.cert_scale).max(1e-12)
    } else {
        1e-12_f64.max(eps)
    }
}
