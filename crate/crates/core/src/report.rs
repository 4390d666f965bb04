//! Solver-agnostic results and trace records.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::problem::ProblemSpec;
use crate::prox;
use crate::scalar::Scalar;

/// One stage of the asymptotic DC driver (a fixed `(mu, c)` pair).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdcStageRecord {
    pub t: usize,
    pub i: usize,
    pub mu: f64,
    pub c: f64,
    pub sidca_iterations: usize,
    pub serious_steps: usize,
    pub ssn_iterations: usize,
    pub penalty: f64,
    pub vio_r: f64,
    pub vio_s: f64,
    pub j_mu: f64,
    pub ell: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdcamStageRecord {
    pub t: usize,
    pub mu: f64,
    pub inner_iterations: usize,
    /// `F_mu` at the stage start point chosen by the anchor rule.
    pub f_anchor: f64,
    pub f_mu: f64,
    pub vio_r: f64,
    pub vio_s: f64,
    pub inner_capped: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PpalmStageRecord {
    pub k: usize,
    pub rho: f64,
    pub inner_iterations: usize,
    pub ell: f64,
    pub vio_r: f64,
    pub vio_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmmRecord {
    pub k: usize,
    pub rho: f64,
    pub pinf: f64,
    pub dinf: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Adc(AdcStageRecord),
    Sdcam(SdcamStageRecord),
    Ppalm(PpalmStageRecord),
    Admm(AdmmRecord),
}

#[derive(Clone, Debug)]
pub struct SolveReport<T: Scalar> {
    pub solver: String,
    /// Returned solution (after the final feasibility rounding, when enabled).
    pub solution: DMatrix<T>,
    /// `l(solution)`.
    pub objective: f64,
    pub time_s: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Violations of the last iterate before rounding.
    pub vio_r: f64,
    pub vio_s: f64,
    /// Numerical rank and cardinality of `solution`.
    pub rank: usize,
    pub nnz: usize,
    pub converged: bool,
    pub flags: Vec<String>,
    pub trace: Vec<TraceRecord>,
}

/// Normalized distances `(Vio_r, Vio_s)` of `U` to the rank and cardinality sets.
pub fn violation_metrics<T: Scalar>(u: &DMatrix<T>, spec: &ProblemSpec<T>) -> (f64, f64) {
    let scale = crate::linalg::fro_norm(u).max(1.0);
    (prox::rank_distance(u, spec.r) / scale, prox::card_distance(u, spec.s) / scale)
}

/// Rounds a nearly feasible iterate onto the constraint sets: rank truncation inside the cone,
/// then cardinality truncation (inside the orthant for nonnegative problems).
pub fn round_to_feasible<T: Scalar>(u: &DMatrix<T>, spec: &ProblemSpec<T>) -> Result<DMatrix<T>> {
    use crate::space::ConstraintSet;
    if spec.space.is_psd() {
        let low = prox::project(u, ConstraintSet::RankInCone(spec.r))?;
        let mut out = prox::project(&low, ConstraintSet::Card(spec.s))?;
        crate::linalg::symmetrize_mut(&mut out);
        Ok(out)
    } else {
        let low = prox::project(u, ConstraintSet::Rank(spec.r))?;
        prox::project(&low, ConstraintSet::CardInOrthant(spec.s))
    }
}

impl<T: Scalar> SolveReport<T> {
    /// Assembles a report from the last iterate, rounding it when `round` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        solver: &str,
        spec: &ProblemSpec<T>,
        last: DMatrix<T>,
        round: bool,
        time_s: f64,
        outer_iterations: usize,
        inner_iterations: usize,
        converged: bool,
        flags: Vec<String>,
        trace: Vec<TraceRecord>,
    ) -> Result<Self> {
        let (vio_r, vio_s) = violation_metrics(&last, spec);
        let solution = if round { round_to_feasible(&last, spec)? } else { last };
        Ok(SolveReport {
            solver: solver.to_string(),
            objective: spec.least_squares_value(&solution)?,
            rank: prox::numerical_rank(&solution),
            nnz: prox::cardinality(&solution),
            solution,
            time_s,
            outer_iterations,
            inner_iterations,
            vio_r,
            vio_s,
            converged,
            flags,
            trace,
        })
    }
}
