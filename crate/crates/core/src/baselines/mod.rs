//! Comparison solvers: SDCAM with a nonmonotone proximal gradient inner loop, penalty PALM,
//! and ADMM on the dual of the convex sparse PhaseLift relaxation.

mod admm;
mod ppalm;
mod sdcam;

pub use admm::{
    admm_cspl_solve, admm_cspl_solve_with_diagnostics, y_step, y_step_residual, AdmmConfig, AdmmDiagnostics,
};
pub use ppalm::{
    power_iteration_lmax, ppalm_solve, ppalm_solve_with_diagnostics, PpalmConfig, PpalmDiagnostics,
};
pub use sdcam::{sdcam_solve, SdcamConfig, SdcamVariant};

use crate::scalar::Scalar;
use crate::space::ConstraintSet;
use crate::problem::ProblemSpec;

/// Cardinality set used as the sparse constraint: inside the orthant for nonnegative
/// problems, plain cardinality for PSD ones.
pub(crate) fn sparse_set<T: Scalar>(spec: &ProblemSpec<T>) -> ConstraintSet {
    if spec.space.is_psd() {
        ConstraintSet::Card(spec.s)
    } else {
        ConstraintSet::CardInOrthant(spec.s)
    }
}

/// Rank set: inside the cone for PSD problems, plain rank for nonnegative ones.
pub(crate) fn low_rank_set<T: Scalar>(spec: &ProblemSpec<T>) -> ConstraintSet {
    if spec.space.is_psd() {
        ConstraintSet::RankInCone(spec.r)
    } else {
        ConstraintSet::Rank(spec.r)
    }
}

/// Bounded rank set used as the hard constraint of SDCAM.
pub(crate) fn bounded_low_rank_set<T: Scalar>(spec: &ProblemSpec<T>) -> ConstraintSet {
    if spec.space.is_psd() {
        ConstraintSet::RankInConeBox(spec.r, spec.tau)
    } else {
        ConstraintSet::RankSpecBox(spec.r, spec.tau)
    }
}
