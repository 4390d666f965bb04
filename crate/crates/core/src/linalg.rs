//! Dense helpers shared by the solvers: real trace inner products, symmetrization,
//! and deterministic sorted eigen/singular decompositions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::Scalar;

/// Real trace inner product `Re tr(X^* Y)`.
pub fn inner<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conjugate() * *b).real()).sum()
}

pub fn fro_norm<T: Scalar>(x: &DMatrix<T>) -> f64 {
    x.iter().map(|a| a.abs2()).sum::<f64>().sqrt()
}

pub fn fro_norm_sq<T: Scalar>(x: &DMatrix<T>) -> f64 {
    x.iter().map(|a| a.abs2()).sum::<f64>()
}

pub fn dist<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (*a - *b).abs2()).sum::<f64>().sqrt()
}

/// In-place `(M + M^*)/2`. Panics on non-square input.
pub fn symmetrize_mut<T: Scalar>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "symmetrize needs a square matrix");
    let half = T::from_real(0.5);
    for j in 0..n {
        m[(j, j)] = T::from_real(m[(j, j)].real());
        for i in (j + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conjugate()) * half;
            m[(i, j)] = v;
            m[(j, i)] = v.conjugate();
        }
    }
}

pub fn symmetrized<T: Scalar>(mut m: DMatrix<T>) -> DMatrix<T> {
    symmetrize_mut(&mut m);
    m
}

/// `||M - M^*||_F`.
pub fn asymmetry<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conjugate()).abs2();
        }
    }
    acc.sqrt()
}

pub fn identity<T: Scalar>(n: usize) -> DMatrix<T> {
    DMatrix::identity(n, n)
}

/// Hermitian eigendecomposition with eigenvalues sorted nonincreasing.
///
/// The input is symmetrized first. Ties keep the backend's original order, which is
/// deterministic for a fixed input.
#[derive(Clone, Debug)]
pub struct SortedEigen<T: Scalar> {
    pub values: DVector<f64>,
    pub vectors: DMatrix<T>,
}

impl<T: Scalar> SortedEigen<T> {
    pub fn new(m: &DMatrix<T>) -> Self {
        let (raw, q) = hermitian_eigen(symmetrized(m.clone()));
        let n = raw.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
        let values = DVector::from_iterator(n, order.iter().map(|&i| raw[i]));
        let vectors = q.select_columns(&order);
        SortedEigen { values, vectors }
    }

    /// `Q diag(f(j, lambda_j)) Q^*`; columns with a zero weight are skipped.
    pub fn reconstruct_with(&self, f: impl Fn(usize, f64) -> f64) -> DMatrix<T> {
        let n = self.vectors.nrows();
        let kept: Vec<(usize, f64)> = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &lam)| (j, f(j, lam)))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        if kept.is_empty() {
            return DMatrix::zeros(n, n);
        }
        let cols: Vec<usize> = kept.iter().map(|&(j, _)| j).collect();
        let q = self.vectors.select_columns(&cols);
        let mut scaled = q.clone();
        for (c, &(_, w)) in kept.iter().enumerate() {
            scaled.column_mut(c).scale_mut(w);
        }
        symmetrized(scaled * q.adjoint())
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        self.reconstruct_with(|_, l| l)
    }
}

/// Thin SVD with singular values sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct SortedSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub values: DVector<f64>,
    pub v_t: DMatrix<T>,
}

impl<T: Scalar> SortedSvd<T> {
    pub fn new(m: &DMatrix<T>) -> Self {
        let wide = m.nrows() < m.ncols();
        let a = if wide { m.adjoint() } else { m.clone() };
        let (w, v) = jacobi_columns(a, true);
        let v = v.expect("requested V");
        let k = w.ncols();
        let norms: Vec<f64> = (0..k).map(|j| w.column(j).norm()).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut left = w.select_columns(&order);
        for (c, &j) in order.iter().enumerate() {
            if norms[j] > 0.0 {
                left.column_mut(c).unscale_mut(norms[j]);
            }
        }
        let right = v.select_columns(&order);
        let values = DVector::from_iterator(k, order.iter().map(|&j| norms[j]));
        if wide {
            SortedSvd { u: right, values, v_t: left.adjoint() }
        } else {
            SortedSvd { u: left, values, v_t: right.adjoint() }
        }
    }

    /// `sum_{i<k} f(sigma_i) u_i v_i^*`.
    pub fn truncate_with(&self, k: usize, f: impl Fn(f64) -> f64) -> DMatrix<T> {
        let k = k.min(self.values.len());
        let mut left = self.u.columns(0, k).into_owned();
        for j in 0..k {
            left.column_mut(j).scale_mut(f(self.values[j]));
        }
        left * self.v_t.rows(0, k)
    }
}

/// One-sided Jacobi orthogonalization of the columns of `a`: returns `W = A V` with mutually
/// orthogonal columns and, on request, the unitary `V`. Column norms of `W` are the singular
/// values, computed to high relative accuracy even for rank-deficient input.
fn jacobi_columns<T: Scalar>(mut w: DMatrix<T>, want_v: bool) -> (DMatrix<T>, Option<DMatrix<T>>) {
    let (rows, n) = w.shape();
    let mut v = want_v.then(|| DMatrix::<T>::identity(n, n));
    let tol = f64::EPSILON * (rows.max(1) as f64).sqrt();
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, T::zero());
                for k in 0..rows {
                    let (a, b) = (w[(k, i)], w[(k, j)]);
                    alpha += a.abs2();
                    beta += b.abs2();
                    gamma += a.conjugate() * b;
                }
                let g = gamma.modulus();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / T::from_real(g)).conjugate();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, i, j, phase, c, s);
                if let Some(v) = v.as_mut() {
                    rotate(v, i, j, phase, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

const JACOBI_SWEEPS: usize = 80;

fn rotate_rows<T: Scalar>(m: &mut DMatrix<T>, i: usize, j: usize, phase: T, c: f64, s: f64) {
    for k in 0..m.ncols() {
        let a = m[(i, k)];
        let b = m[(j, k)] * phase;
        m[(i, k)] = a.scale(c) - b.scale(s);
        m[(j, k)] = a.scale(s) + b.scale(c);
    }
}

fn rotate<T: Scalar>(m: &mut DMatrix<T>, i: usize, j: usize, phase: T, c: f64, s: f64) {
    for k in 0..m.nrows() {
        let a = m[(k, i)];
        let b = m[(k, j)] * phase;
        m[(k, i)] = a.scale(c) - b.scale(s);
        m[(k, j)] = a.scale(s) + b.scale(c);
    }
}

pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    let a = if m.nrows() < m.ncols() { m.adjoint() } else { m.clone() };
    let (w, _) = jacobi_columns(a, false);
    let mut s: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Hermitian eigenvalues, nonincreasing.
pub fn eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    let sym = symmetrized(m.clone());
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        v = jacobi_eigen(sym).0.iter().copied().collect();
    }
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Unsorted eigenpairs of a Hermitian matrix. The backend's tridiagonal QR can return NaN
/// on finite, highly structured input (e.g. a small rank-one block padded with zeros);
/// two-sided Jacobi is used in that case.
fn hermitian_eigen<T: Scalar>(sym: DMatrix<T>) -> (DVector<f64>, DMatrix<T>) {
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|x| x.is_finite()) && eig.eigenvectors.iter().all(|x| x.is_finite()) {
        return (eig.eigenvalues, eig.eigenvectors);
    }
    jacobi_eigen(sym)
}

/// Cyclic two-sided Jacobi on a Hermitian matrix: returns the diagonal and the accumulated
/// unitary `Q` with `A = Q diag Q^*`.
pub fn jacobi_eigen<T: Scalar>(mut a: DMatrix<T>) -> (DVector<f64>, DMatrix<T>) {
    let n = a.nrows();
    let mut q = DMatrix::<T>::identity(n, n);
    let floor = f64::EPSILON * f64::EPSILON * fro_norm(&a);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let aij = a[(i, j)];
                let g = aij.modulus();
                let (aii, ajj) = (a[(i, i)].real(), a[(j, j)].real());
                if g == 0.0 || g <= floor || g <= f64::EPSILON * (aii * ajj).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (aij / T::from_real(g)).conjugate();
                let zeta = (ajj - aii) / (2.0 * g);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, phase, c, s);
                rotate_rows(&mut a, i, j, phase.conjugate(), c, s);
                a[(i, j)] = T::zero();
                a[(j, i)] = T::zero();
                a[(i, i)] = T::from_real(a[(i, i)].real());
                a[(j, j)] = T::from_real(a[(j, j)].real());
                rotate(&mut q, i, j, phase, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (DVector::from_iterator(n, (0..n).map(|i| a[(i, i)].real())), q)
}
