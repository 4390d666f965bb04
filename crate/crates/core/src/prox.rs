//! Projections, proximal maps, Ky Fan norms, penalty residuals, Moreau envelopes and the
//! DC subgradient selector.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, SortedEigen, SortedSvd};
use crate::problem::ProblemSpec;
use crate::scalar::Scalar;
use crate::space::{ConstraintSet, PipelineKind};

/// Relative singular-value threshold used for rank membership and rank counting.
pub const RANK_TOL: f64 = 1e-9;
/// Entries below this fraction of the largest magnitude count as zero.
pub const CARD_FLUSH: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KyFanMode {
    Singular,
    Entry,
}

/// Indices of the `k` entries with the largest `key`, ties broken by smaller row-major index.
/// Returned in decreasing key order.
pub fn top_entries<T: Scalar>(
    m: &DMatrix<T>,
    k: usize,
    key: impl Fn(T) -> f64,
) -> Vec<(usize, usize)> {
    let (rows, cols) = m.shape();
    let mut idx: Vec<(f64, usize)> = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            idx.push((key(m[(i, j)]), i * cols + j));
        }
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    };
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx.into_iter().map(|(_, l)| (l / cols, l % cols)).collect()
}

fn keep_entries<T: Scalar>(m: &DMatrix<T>, keep: &[(usize, usize)], f: impl Fn(T) -> T) -> DMatrix<T> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &(i, j) in keep {
        out[(i, j)] = f(m[(i, j)]);
    }
    out
}

fn clip_modulus<T: Scalar>(v: T, tau: f64) -> T {
    let a = v.modulus();
    if a > tau {
        v * T::from_real(tau / a)
    } else {
        v
    }
}

fn check_rank<T: Scalar>(m: &DMatrix<T>, r: usize) -> Result<()> {
    if r > m.nrows().min(m.ncols()) {
        return Err(Error::InvalidParameter(format!("rank budget {r} exceeds {:?}", m.shape())));
    }
    Ok(())
}

fn check_card<T: Scalar>(m: &DMatrix<T>, s: usize) -> Result<()> {
    if s > m.len() {
        return Err(Error::InvalidParameter(format!("cardinality budget {s} exceeds {}", m.len())));
    }
    Ok(())
}

fn check_square<T: Scalar>(m: &DMatrix<T>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("expected a square matrix, got {:?}", m.shape())));
    }
    Ok(())
}

/// Nearest point of `set` in Frobenius norm.
pub fn project<T: Scalar>(m: &DMatrix<T>, set: ConstraintSet) -> Result<DMatrix<T>> {
    match set {
        ConstraintSet::PsdCone => {
            check_square(m)?;
            let e = SortedEigen::new(m);
            Ok(e.reconstruct_with(|_, l| l.max(0.0)))
        }
        ConstraintSet::NonnegOrthant => Ok(m.map(|v| T::from_real(v.real().max(0.0)))),
        ConstraintSet::Rank(r) => {
            check_rank(m, r)?;
            if r == m.nrows().min(m.ncols()) {
                return Ok(m.clone());
            }
            Ok(SortedSvd::new(m).truncate_with(r, |s| s))
        }
        ConstraintSet::RankSpecBox(r, tau) => {
            check_rank(m, r)?;
            Ok(SortedSvd::new(m).truncate_with(r, |s| s.min(tau)))
        }
        ConstraintSet::RankInCone(r) => {
            check_square(m)?;
            check_rank(m, r)?;
            let e = SortedEigen::new(m);
            Ok(e.reconstruct_with(|j, l| if j < r { l.max(0.0) } else { 0.0 }))
        }
        ConstraintSet::RankInConeBox(r, tau) => {
            check_square(m)?;
            check_rank(m, r)?;
            let e = SortedEigen::new(m);
            Ok(e.reconstruct_with(|j, l| if j < r { l.clamp(0.0, tau) } else { 0.0 }))
        }
        ConstraintSet::Card(s) => {
            check_card(m, s)?;
            Ok(keep_entries(m, &top_entries(m, s, |v| v.abs2()), |v| v))
        }
        ConstraintSet::CardBox(s, tau) => {
            check_card(m, s)?;
            Ok(keep_entries(m, &top_entries(m, s, |v| v.abs2()), |v| clip_modulus(v, tau)))
        }
        ConstraintSet::CardInOrthant(s) => {
            check_card(m, s)?;
            let pos = m.map(|v| T::from_real(v.real().max(0.0)));
            Ok(keep_entries(&pos, &top_entries(&pos, s, |v| v.real()), |v| v))
        }
    }
}

/// Singular values sorted nonincreasing; Hermitian inputs use eigenvalue magnitudes.
pub fn spectrum_magnitudes<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_square() && linalg::asymmetry(m) <= 1e-12 * linalg::fro_norm(m).max(1.0) {
        let mut v: Vec<f64> = linalg::eigenvalues(m).into_iter().map(f64::abs).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        v
    } else {
        linalg::singular_values(m)
    }
}

fn entry_magnitudes<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    let mut v: Vec<f64> = m.iter().map(|x| x.modulus()).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    v
}

/// Sum of the `k` largest singular values (`Singular`) or entry magnitudes (`Entry`).
pub fn ky_fan<T: Scalar>(m: &DMatrix<T>, k: usize, mode: KyFanMode) -> Result<f64> {
    let v = match mode {
        KyFanMode::Singular => {
            if k == 0 || k > m.nrows().min(m.ncols()) {
                return Err(Error::InvalidParameter(format!("Ky Fan order {k} out of range")));
            }
            spectrum_magnitudes(m)
        }
        KyFanMode::Entry => {
            if k == 0 || k > m.len() {
                return Err(Error::InvalidParameter(format!("Ky Fan order {k} out of range")));
            }
            entry_magnitudes(m)
        }
    };
    Ok(v[..k].iter().sum())
}

/// `(sum_{i>=k} v_i, sqrt(sum_{i>=k} v_i^2))` over a nonincreasing list.
fn tails(v: &[f64], k: usize) -> (f64, f64) {
    let t = &v[k.min(v.len())..];
    (t.iter().sum(), t.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// `||U - Pi_{C_r}(U)||_F`.
pub fn rank_distance<T: Scalar>(u: &DMatrix<T>, r: usize) -> f64 {
    tails(&spectrum_magnitudes(u), r).1
}

/// `||U - Pi_{C_s}(U)||_F`.
pub fn card_distance<T: Scalar>(u: &DMatrix<T>, s: usize) -> f64 {
    tails(&entry_magnitudes(u), s).1
}

/// `P(U) = P1(U) - P2(U)`, evaluated as the tail sum so feasible points give exactly zero.
pub fn penalty_residual<T: Scalar>(u: &DMatrix<T>, spec: &ProblemSpec<T>) -> f64 {
    match spec.pipeline() {
        PipelineKind::RankPenalized => tails(&spectrum_magnitudes(u), spec.r).0,
        PipelineKind::CardPenalized => tails(&entry_magnitudes(u), spec.s).0,
    }
}

/// The projection `Pi_R` onto the constraint handled by the exact penalty.
pub fn project_feasible<T: Scalar>(u: &DMatrix<T>, spec: &ProblemSpec<T>) -> Result<DMatrix<T>> {
    match spec.pipeline() {
        PipelineKind::RankPenalized => {
            check_rank(u, spec.r)?;
            let e = SortedEigen::new(u);
            let n = e.values.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                e.values[b].abs().partial_cmp(&e.values[a].abs()).unwrap_or(Ordering::Equal).then(a.cmp(&b))
            });
            let mut keep = vec![false; n];
            for &j in order.iter().take(spec.r) {
                keep[j] = true;
            }
            Ok(e.reconstruct_with(|j, l| if keep[j] { l } else { 0.0 }))
        }
        PipelineKind::CardPenalized => project(u, ConstraintSet::Card(spec.s)),
    }
}

/// Constraint set whose indicator is `g`.
pub fn g_set<T: Scalar>(spec: &ProblemSpec<T>) -> ConstraintSet {
    match spec.pipeline() {
        PipelineKind::RankPenalized => ConstraintSet::CardBox(spec.s, spec.tau),
        PipelineKind::CardPenalized => ConstraintSet::RankSpecBox(spec.r, spec.tau),
    }
}

/// `Prox_{mu g}(U)`: the projection onto `dom g` (independent of `mu` since `g` is an indicator).
pub fn prox_mu_g<T: Scalar>(u: &DMatrix<T>, _mu: f64, spec: &ProblemSpec<T>) -> Result<DMatrix<T>> {
    project(u, g_set(spec))
}

/// `M_{mu,g}(U) = dist^2(U, dom g) / (2 mu)`.
pub fn moreau_envelope<T: Scalar>(u: &DMatrix<T>, mu: f64, spec: &ProblemSpec<T>) -> Result<f64> {
    let p = prox_mu_g(u, mu, spec)?;
    Ok(linalg::dist(u, &p).powi(2) / (2.0 * mu))
}

/// `D_{mu,g}(U) = ||U||^2/(2 mu) - M_{mu,g}(U)`, evaluated at the prox point.
pub fn d_value<T: Scalar>(u: &DMatrix<T>, mu: f64, spec: &ProblemSpec<T>) -> Result<f64> {
    let p = prox_mu_g(u, mu, spec)?;
    Ok((linalg::inner(u, &p) - 0.5 * linalg::fro_norm_sq(&p)) / mu)
}

/// `P2`: Ky Fan `r` of singular values (rank pipeline) or Ky Fan `s` of entries.
pub fn p2_value<T: Scalar>(u: &DMatrix<T>, spec: &ProblemSpec<T>) -> f64 {
    match spec.pipeline() {
        PipelineKind::RankPenalized => spectrum_magnitudes(u)[..spec.r].iter().sum(),
        PipelineKind::CardPenalized => entry_magnitudes(u)[..spec.s].iter().sum(),
    }
}

/// An element of the subdifferential of `h_{mu,c} = D_{mu,g} + c P2` at a cone point `U`.
pub fn select_w_subgradient<T: Scalar>(
    u: &DMatrix<T>,
    spec: &ProblemSpec<T>,
    mu: f64,
    c: f64,
) -> Result<DMatrix<T>> {
    let prox = prox_mu_g(u, mu, spec)?;
    let mut w = prox / T::from_real(mu);
    match spec.pipeline() {
        PipelineKind::RankPenalized => {
            let e = SortedEigen::new(u);
            let q = e.vectors.columns(0, spec.r);
            w += (q * q.adjoint()) * T::from_real(c);
            linalg::symmetrize_mut(&mut w);
        }
        PipelineKind::CardPenalized => {
            for (i, j) in top_entries(u, spec.s, |v| v.abs2()) {
                let v = u[(i, j)];
                let a = v.modulus();
                if a > 0.0 {
                    w[(i, j)] += v * T::from_real(c / a);
                }
            }
        }
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JValues {
    pub ell: f64,
    pub moreau: f64,
    pub penalty: f64,
    pub j_mu: f64,
    pub j_mu_c: f64,
}

/// `J_mu = l + M_{mu,g}` and `J_{mu,c} = J_mu + c P`.
pub fn j_values<T: Scalar>(u: &DMatrix<T>, spec: &ProblemSpec<T>, mu: f64, c: f64) -> Result<JValues> {
    let ell = spec.least_squares_value(u)?;
    let moreau = moreau_envelope(u, mu, spec)?;
    let penalty = penalty_residual(u, spec);
    let j_mu = ell + moreau;
    Ok(JValues { ell, moreau, penalty, j_mu, j_mu_c: j_mu + c * penalty })
}

/// Numerical rank: singular values above `RANK_TOL * sigma_1`.
pub fn numerical_rank<T: Scalar>(u: &DMatrix<T>) -> usize {
    let s = spectrum_magnitudes(u);
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&v| v > RANK_TOL * s1).count(),
        _ => 0,
    }
}

/// Nonzero count after flushing entries below `CARD_FLUSH * max |u_ij|`.
pub fn cardinality<T: Scalar>(u: &DMatrix<T>) -> usize {
    let mx = u.iter().map(|v| v.modulus()).fold(0.0, f64::max);
    if mx == 0.0 {
        return 0;
    }
    u.iter().filter(|v| v.modulus() > CARD_FLUSH * mx).count()
}
