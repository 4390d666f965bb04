//! Sparse and low-rank matrix recovery.
//!
//! Solves `min 1/2 ||A(U) - b||^2` over a closed convex cone subject to
//! `rank(U) <= r` and `||U||_0 <= s`, using an asymptotic DC scheme whose DC
//! subproblems are handled by an inexact sieving DCA with a dual semismooth
//! Newton inner solver. Baseline solvers and seeded instance generators are
//! included for comparison.

pub mod adc;
pub mod baselines;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod prox;
pub mod report;
pub mod scalar;
pub mod sidca;
pub mod space;
pub mod ssn;

pub use error::{Error, Result};
pub use operator::MeasurementOp;
pub use problem::ProblemSpec;
pub use report::SolveReport;
pub use scalar::Scalar;
pub use space::{PipelineKind, SpaceTag};
