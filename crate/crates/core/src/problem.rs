//! Problem instances and their serialized container.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::MeasurementOp;
use crate::scalar::Scalar;
use crate::space::{PipelineKind, SpaceTag};

/// `min 1/2 ||A(U) - b||^2` over the cone of `space`, with `rank(U) <= r` and `||U||_0 <= s`.
#[derive(Clone, Debug)]
pub struct ProblemSpec<T: Scalar> {
    pub space: SpaceTag,
    pub op: MeasurementOp<T>,
    pub b: DVector<f64>,
    pub r: usize,
    pub s: usize,
    pub tau: f64,
    pub seed: Option<u64>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(
        space: SpaceTag,
        op: MeasurementOp<T>,
        b: DVector<f64>,
        r: usize,
        s: usize,
        tau: f64,
    ) -> Result<Self> {
        let (m, n) = op.shape();
        if space.is_psd() != op.is_hermitian() {
            return Err(Error::Dimension("operator symmetry does not match the space".into()));
        }
        if space.is_complex() != T::IS_COMPLEX {
            return Err(Error::Dimension("scalar type does not match the space".into()));
        }
        if space.is_psd() && m != n {
            return Err(Error::Dimension("PSD spaces are square".into()));
        }
        if b.len() != op.len() {
            return Err(Error::Dimension(format!("b has {} entries, N = {}", b.len(), op.len())));
        }
        if r == 0 || r > m.min(n) {
            return Err(Error::InvalidParameter(format!("rank budget {r} outside 1..={}", m.min(n))));
        }
        if s == 0 || s > m * n {
            return Err(Error::InvalidParameter(format!("cardinality budget {s} outside 1..={}", m * n)));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter("tau must be positive".into()));
        }
        Ok(ProblemSpec { space, op, b, r, s, tau, seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn pipeline(&self) -> PipelineKind {
        self.space.pipeline()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.op.shape()
    }

    /// Number of entries of the variable.
    pub fn phi(&self) -> usize {
        let (m, n) = self.shape();
        m * n
    }

    pub fn zeros(&self) -> DMatrix<T> {
        let (m, n) = self.shape();
        DMatrix::zeros(m, n)
    }

    /// `A(U) - b`.
    pub fn residual(&self, u: &DMatrix<T>) -> Result<DVector<f64>> {
        Ok(self.op.apply(u)? - &self.b)
    }

    /// `l(U) = 1/2 ||A(U) - b||^2`.
    pub fn least_squares_value(&self, u: &DMatrix<T>) -> Result<f64> {
        Ok(0.5 * self.residual(u)?.norm_squared())
    }

    /// `A^*(A(U) - b)`.
    pub fn least_squares_grad(&self, u: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.op.adjoint(&self.residual(u)?)
    }

    /// Normalizes every measurement to unit Frobenius norm, scaling `b` alike.
    pub fn scale_problem(&self) -> Result<Self> {
        let norms = self.op.measurement_norms();
        if let Some(i) = norms.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter(format!("measurement {i} has zero norm")));
        }
        let w: Vec<f64> = norms.iter().map(|v| 1.0 / v).collect();
        let op = self.op.rescaled(&w)?;
        let b = DVector::from_iterator(self.b.len(), self.b.iter().zip(&w).map(|(b, w)| b * w));
        Ok(ProblemSpec { op, b, ..self.clone() })
    }

    pub fn to_instance(&self) -> InstanceFile {
        let (m, n) = self.shape();
        let (rank_one, re, im) = self.op.raw_parts();
        InstanceFile {
            space: self.space,
            rows: m,
            cols: n,
            n_meas: self.op.len(),
            rank_one,
            re,
            im: if T::IS_COMPLEX { im } else { Vec::new() },
            b: self.b.iter().copied().collect(),
            r: self.r,
            s: self.s,
            tau: self.tau,
            seed: self.seed,
        }
    }

    pub fn from_instance(f: &InstanceFile) -> Result<Self> {
        if f.re.len() != f.n_meas || (T::IS_COMPLEX && f.im.len() != f.n_meas) {
            return Err(Error::Dimension("measurement count mismatch in instance file".into()));
        }
        let entry = |i: usize, l: usize| -> T {
            let im = if T::IS_COMPLEX { f.im[i][l] } else { 0.0 };
            T::from_parts(f.re[i][l], im)
        };
        let op = if f.rank_one {
            let n = f.cols;
            let mut fac = DMatrix::<T>::zeros(f.n_meas, n);
            for i in 0..f.n_meas {
                if f.re[i].len() != n {
                    return Err(Error::Dimension(format!("a_{i} has wrong length")));
                }
                for l in 0..n {
                    fac[(i, l)] = entry(i, l);
                }
            }
            MeasurementOp::rank_one(fac)?
        } else {
            let mut mats = Vec::with_capacity(f.n_meas);
            for i in 0..f.n_meas {
                if f.re[i].len() != f.rows * f.cols {
                    return Err(Error::Dimension(format!("A_{i} has wrong size")));
                }
                mats.push(DMatrix::from_fn(f.rows, f.cols, |p, c| entry(i, p * f.cols + c)));
            }
            MeasurementOp::general(&mats, f.space.is_psd())?
        };
        let mut spec = ProblemSpec::new(f.space, op, DVector::from_vec(f.b.clone()), f.r, f.s, f.tau)?;
        spec.seed = f.seed;
        Ok(spec)
    }
}

/// Self-describing JSON container for an instance. Arrays are row-major; `im` is empty for
/// real spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub space: SpaceTag,
    pub rows: usize,
    pub cols: usize,
    pub n_meas: usize,
    pub rank_one: bool,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub r: usize,
    pub s: usize,
    pub tau: f64,
    pub seed: Option<u64>,
}

/// A problem over either scalar field.
#[derive(Clone, Debug)]
pub enum AnyProblem {
    Real(ProblemSpec<f64>),
    Complex(ProblemSpec<Complex64>),
}

impl AnyProblem {
    pub fn from_instance(f: &InstanceFile) -> Result<Self> {
        if f.space.is_complex() {
            Ok(AnyProblem::Complex(ProblemSpec::from_instance(f)?))
        } else {
            Ok(AnyProblem::Real(ProblemSpec::from_instance(f)?))
        }
    }

    pub fn to_instance(&self) -> InstanceFile {
        match self {
            AnyProblem::Real(p) => p.to_instance(),
            AnyProblem::Complex(p) => p.to_instance(),
        }
    }

    pub fn space(&self) -> SpaceTag {
        match self {
            AnyProblem::Real(p) => p.space,
            AnyProblem::Complex(p) => p.space,
        }
    }
}
