//! Linear measurement operators `A(U) = (<A_i, U>)_i` and their adjoints.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::linalg::symmetrize_mut;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
enum Kind<T: Scalar> {
    /// `N x (rows*cols)`; row `i` holds `conj(vec(A_i))` in column-major order.
    General(DMatrix<T>),
    /// `N x n`; row `i` holds `a_i^T`, representing `A_i = a_i a_i^*`.
    RankOne(DMatrix<T>),
}

#[derive(Clone, Debug)]
pub struct MeasurementOp<T: Scalar> {
    kind: Kind<T>,
    rows: usize,
    cols: usize,
    hermitian: bool,
    fro: f64,
    gram: OnceLock<DMatrix<f64>>,
}

impl<T: Scalar> MeasurementOp<T> {
    /// Dense stack. With `hermitian` set, each `A_i` is replaced by its Hermitian part, which
    /// leaves `<A_i, U>` unchanged for Hermitian `U`.
    pub fn general(mats: &[DMatrix<T>], hermitian: bool) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::Dimension("empty measurement stack".into()))?;
        let (rows, cols) = first.shape();
        if hermitian && rows != cols {
            return Err(Error::Dimension("Hermitian stack needs square matrices".into()));
        }
        let phi = rows * cols;
        let mut stack = DMatrix::<T>::zeros(mats.len(), phi);
        for (i, a) in mats.iter().enumerate() {
            if a.shape() != (rows, cols) {
                return Err(Error::Dimension(format!(
                    "A_{i} is {:?}, expected {:?}",
                    a.shape(),
                    (rows, cols)
                )));
            }
            let mut a = a.clone();
            if hermitian {
                symmetrize_mut(&mut a);
            }
            for (l, v) in a.iter().enumerate() {
                stack[(i, l)] = v.conjugate();
            }
        }
        Ok(Self::from_kind(Kind::General(stack), rows, cols, hermitian))
    }

    /// Rank-one stack `A_i = a_i a_i^*` with `a_i` the rows of `factors` (`N x n`).
    pub fn rank_one(factors: DMatrix<T>) -> Result<Self> {
        if factors.nrows() == 0 || factors.ncols() == 0 {
            return Err(Error::Dimension("empty rank-one stack".into()));
        }
        let n = factors.ncols();
        Ok(Self::from_kind(Kind::RankOne(factors), n, n, true))
    }

    fn from_kind(kind: Kind<T>, rows: usize, cols: usize, hermitian: bool) -> Self {
        let fro = match &kind {
            Kind::General(s) => s.iter().map(|v| v.abs2()).sum::<f64>().sqrt(),
            Kind::RankOne(f) => f
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs2()).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt(),
        };
        MeasurementOp { kind, rows, cols, hermitian, fro, gram: OnceLock::new() }
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            Kind::General(s) => s.nrows(),
            Kind::RankOne(f) => f.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shape of the matrix variable.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_rank_one(&self) -> bool {
        matches!(self.kind, Kind::RankOne(_))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Frobenius norm of the `N x phi` matrix representation.
    pub fn fro_norm(&self) -> f64 {
        self.fro
    }

    /// Rank-one factors `a_i` as rows, when this is a rank-one stack.
    pub fn factors(&self) -> Option<&DMatrix<T>> {
        match &self.kind {
            Kind::RankOne(f) => Some(f),
            Kind::General(_) => None,
        }
    }

    /// The explicit measurement matrix `A_i`.
    pub fn matrix(&self, i: usize) -> DMatrix<T> {
        match &self.kind {
            Kind::General(s) => {
                DMatrix::from_iterator(self.rows, self.cols, s.row(i).iter().map(|v| v.conjugate()))
            }
            Kind::RankOne(f) => {
                let a = f.row(i).transpose();
                &a * a.adjoint()
            }
        }
    }

    /// `||A_i||_F` for every measurement.
    pub fn measurement_norms(&self) -> Vec<f64> {
        match &self.kind {
            Kind::General(s) => s
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs2()).sum::<f64>().sqrt())
                .collect(),
            Kind::RankOne(f) => f.row_iter().map(|r| r.iter().map(|v| v.abs2()).sum::<f64>()).collect(),
        }
    }

    /// Operator with `A_i` replaced by `w_i A_i` (`w_i > 0`).
    pub fn rescaled(&self, w: &[f64]) -> Result<Self> {
        if w.len() != self.len() {
            return Err(Error::Dimension("scale vector length".into()));
        }
        let kind = match &self.kind {
            Kind::General(s) => {
                let mut s = s.clone();
                for (i, &wi) in w.iter().enumerate() {
                    s.row_mut(i).scale_mut(wi);
                }
                Kind::General(s)
            }
            Kind::RankOne(f) => {
                let mut f = f.clone();
                for (i, &wi) in w.iter().enumerate() {
                    f.row_mut(i).scale_mut(wi.sqrt());
                }
                Kind::RankOne(f)
            }
        };
        Ok(Self::from_kind(kind, self.rows, self.cols, self.hermitian))
    }

    fn check_var(&self, u: &DMatrix<T>) -> Result<()> {
        if u.shape() != (self.rows, self.cols) {
            return Err(Error::Dimension(format!(
                "variable is {:?}, operator expects {:?}",
                u.shape(),
                (self.rows, self.cols)
            )));
        }
        Ok(())
    }

    /// `A(U)`.
    pub fn apply(&self, u: &DMatrix<T>) -> Result<DVector<f64>> {
        self.check_var(u)?;
        Ok(match &self.kind {
            Kind::General(s) => {
                let nnz = u.iter().filter(|v| **v != T::zero()).count();
                if 4 * nnz < u.len() {
                    // Sparse iterate: accumulate only the columns it touches.
                    let mut out = DVector::<T>::zeros(s.nrows());
                    for (l, &v) in u.iter().enumerate() {
                        if v != T::zero() {
                            out.axpy(v, &s.column(l), T::one());
                        }
                    }
                    out.map(|x| x.real())
                } else {
                    let v = DVectorView::from_slice(u.as_slice(), self.rows * self.cols);
                    (s * v).map(|x| x.real())
                }
            }
            Kind::RankOne(f) => {
                let g = f * u.transpose();
                DVector::from_iterator(
                    f.nrows(),
                    (0..f.nrows()).map(|i| {
                        f.row(i)
                            .iter()
                            .zip(g.row(i).iter())
                            .map(|(a, b)| (a.conjugate() * *b).real())
                            .sum::<f64>()
                    }),
                )
            }
        })
    }

    /// `A^*(z) = sum_i z_i A_i`, Hermitian part taken for PSD spaces.
    pub fn adjoint(&self, z: &DVector<f64>) -> Result<DMatrix<T>> {
        if z.len() != self.len() {
            return Err(Error::Dimension(format!(
                "dual vector has length {}, operator has {} measurements",
                z.len(),
                self.len()
            )));
        }
        let mut out = match &self.kind {
            Kind::General(s) => {
                let zt: DVector<T> = z.map(T::from_real);
                let v = s.ad_mul(&zt);
                DMatrix::from_vec(self.rows, self.cols, v.as_slice().to_vec())
            }
            Kind::RankOne(f) => {
                let mut weighted = f.map(|v| v.conjugate());
                for (i, &zi) in z.iter().enumerate() {
                    weighted.row_mut(i).scale_mut(zi);
                }
                f.tr_mul(&weighted)
            }
        };
        if self.hermitian {
            symmetrize_mut(&mut out);
        }
        Ok(out)
    }

    /// Gram matrix `G_ij = <A_i, A_j>` of the stack, computed once and cached.
    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.get_or_init(|| match &self.kind {
            Kind::General(s) => (s * s.adjoint()).map(|v| v.real()),
            Kind::RankOne(f) => (f * f.adjoint()).map(|v| v.abs2()),
        })
    }

    /// `||A^T A||_F`, which equals the Frobenius norm of the Gram matrix.
    pub fn gram_fro_norm(&self) -> f64 {
        self.gram().norm()
    }

    /// Columns of the real matrix representation for the listed entries, as an `N x |I|` matrix.
    pub fn entry_columns(&self, entries: &[(usize, usize)]) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::<f64>::zeros(n, entries.len());
        match &self.kind {
            Kind::General(s) => {
                for (c, &(i, j)) in entries.iter().enumerate() {
                    let l = j * self.rows + i;
                    for k in 0..n {
                        out[(k, c)] = s[(k, l)].real();
                    }
                }
            }
            Kind::RankOne(f) => {
                for (c, &(i, j)) in entries.iter().enumerate() {
                    for k in 0..n {
                        out[(k, c)] = (f[(k, i)] * f[(k, j)].conjugate()).real();
                    }
                }
            }
        }
        out
    }

    /// Row-major real and imaginary parts of every `A_i` (or `a_i` for rank-one stacks).
    pub(crate) fn raw_parts(&self) -> (bool, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        match &self.kind {
            Kind::General(_) => {
                let mut re = Vec::with_capacity(self.len());
                let mut im = Vec::with_capacity(self.len());
                for i in 0..self.len() {
                    let a = self.matrix(i);
                    let mut r = Vec::with_capacity(self.rows * self.cols);
                    let mut q = Vec::with_capacity(self.rows * self.cols);
                    for p in 0..self.rows {
                        for c in 0..self.cols {
                            r.push(a[(p, c)].real());
                            q.push(a[(p, c)].imaginary());
                        }
                    }
                    re.push(r);
                    im.push(q);
                }
                (false, re, im)
            }
            Kind::RankOne(f) => {
                let re = f.row_iter().map(|r| r.iter().map(|v| v.real()).collect()).collect();
                let im = f.row_iter().map(|r| r.iter().map(|v| v.imaginary()).collect()).collect();
                (true, re, im)
            }
        }
    }
}
