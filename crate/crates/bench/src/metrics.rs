//! Recovery metrics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use splr::linalg::{dist, fro_norm, SortedEigen};
use splr::prox::CARD_FLUSH;
use splr::{ProblemSpec, Scalar};

use crate::error::{BenchError, Result};

/// `||U_hat - U_bar||_F / max(1, ||U_bar||_F)`.
pub fn metric_mre<T: Scalar>(u_hat: &DMatrix<T>, u_bar: &DMatrix<T>) -> Result<f64> {
    if u_hat.shape() != u_bar.shape() {
        return Err(BenchError::Shape(format!("{:?} vs {:?}", u_hat.shape(), u_bar.shape())));
    }
    Ok(dist(u_hat, u_bar) / fro_norm(u_bar).max(1.0))
}

#[derive(Clone, Debug)]
pub struct PhaseMetrics {
    /// `||A(U_hat) - b|| / max(1, ||b||)`.
    pub re: f64,
    /// `||x_hat - x_bar|| / max(1, ||x_bar||)` after global phase alignment.
    pub rpre: f64,
    /// Number of nonzero entries of `x_hat`.
    pub spa: usize,
    pub x_hat: DVector<Complex64>,
}

/// Rotates `x` by the global phase minimizing `||e^{i theta} x - x_bar||`: the rotation makes
/// `<x_bar, x>` real and nonnegative.
pub fn align_phase(x: &DVector<Complex64>, x_bar: &DVector<Complex64>) -> DVector<Complex64> {
    let s: Complex64 = x.iter().zip(x_bar.iter()).map(|(a, b)| a * b.conj()).sum();
    let a = s.norm();
    if a == 0.0 {
        return x.clone();
    }
    x * (s.conj() / a)
}

/// Phase-retrieval metrics from the leading eigenpair of `U_hat`.
pub fn metric_phase(
    spec: &ProblemSpec<Complex64>,
    u_hat: &DMatrix<Complex64>,
    x_bar: &DVector<Complex64>,
) -> Result<PhaseMetrics> {
    let (n, _) = u_hat.shape();
    if x_bar.len() != n || spec.shape() != u_hat.shape() {
        return Err(BenchError::Shape(format!("U_hat {:?}, x_bar {}", u_hat.shape(), x_bar.len())));
    }
    let re = spec.residual(u_hat)?.norm() / spec.b.norm().max(1.0);
    let eig = SortedEigen::new(u_hat);
    let lambda = eig.values[0];
    if !(lambda > 0.0) {
        return Err(BenchError::Degenerate(format!("leading eigenvalue {lambda:e}")));
    }
    let x = eig.vectors.column(0).into_owned() * Complex64::new(lambda.sqrt(), 0.0);
    let x_hat = align_phase(&x, x_bar);
    let rpre = (&x_hat - x_bar).norm() / x_bar.norm().max(1.0);
    let top = x_hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let spa = x_hat.iter().filter(|v| v.norm() > CARD_FLUSH * top).count();
    Ok(PhaseMetrics { re, rpre, spa, x_hat })
}
