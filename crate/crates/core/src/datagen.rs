//! Seeded synthetic instances.
//!
//! Every generator draws from a `ChaCha8Rng` seeded with `GenSpec::seed`, in the order:
//! ground truth, measurement operator, noise. Normal variates use the ziggurat sampler of
//! `rand_distr::StandardNormal`; complex normals draw the real then the imaginary part, each
//! with variance 1/2.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::fro_norm;
use crate::operator::MeasurementOp;
use crate::problem::{AnyProblem, ProblemSpec};
use crate::prox::{cardinality, numerical_rank};
use crate::scalar::Scalar;
use crate::space::SpaceTag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Block-diagonal `diag(V,0,V,0,V,0,V)` with `V = Y W^T` of rank 3, orthant.
    CliqNn,
    /// `V (x) R`, `V` 5x4 of rank 2, `R` sparse 0/1, orthant.
    Rand1,
    /// `R (x) V`, `V` 5x4 of rank 1, orthant.
    Rand2,
    /// `diag(V,0,V,0,V,0,V,0,V)` with `V = W W^T` of rank 2, PSD.
    CliqPsd,
    /// `R (x) V` with `R` from Jacobi rotations of a sparse diagonal, PSD.
    RandPsd,
    /// Jacobi rotations of a sparse nonnegative spectrum, PSD.
    Spr,
    /// `x x^*` for a sparse complex signal, rank-one complex measurements.
    PhaseRetrieval,
}

impl Model {
    pub fn space(self) -> SpaceTag {
        match self {
            Model::CliqNn | Model::Rand1 | Model::Rand2 => SpaceTag::NonnegRect,
            Model::CliqPsd | Model::RandPsd | Model::Spr => SpaceTag::PsdReal,
            Model::PhaseRetrieval => SpaceTag::PsdHermitian,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::CliqNn => "cliq_nn",
            Model::Rand1 => "rand1",
            Model::Rand2 => "rand2",
            Model::CliqPsd => "cliq_psd",
            Model::RandPsd => "rand_psd",
            Model::Spr => "spr",
            Model::PhaseRetrieval => "phase_retrieval",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cliq_nn" => Model::CliqNn,
            "rand1" => Model::Rand1,
            "rand2" => Model::Rand2,
            "cliq_psd" => Model::CliqPsd,
            "rand_psd" => Model::RandPsd,
            "spr" => Model::Spr,
            "phase_retrieval" => Model::PhaseRetrieval,
            other => return Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub model: Model,
    /// Rows; ignored for square models.
    pub m: usize,
    /// Columns, or the order for square models.
    pub n: usize,
    /// Measurement count; defaults to `16 max(m,n)` (orthant) or `10 n` (square models).
    #[serde(default)]
    pub n_meas: Option<usize>,
    pub eta: f64,
    pub seed: u64,
    /// Density of the sparse Kronecker factor (`Rand1`, `Rand2`, `RandPsd`).
    #[serde(default)]
    pub density: Option<f64>,
    /// Target nonzero fraction for `Spr`.
    #[serde(default)]
    pub spr_density: Option<f64>,
    /// `tau` written into the instance.
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    1e5
}

impl GenSpec {
    pub fn new(model: Model, m: usize, n: usize, eta: f64, seed: u64) -> Self {
        GenSpec { model, m, n, n_meas: None, eta, seed, density: None, spr_density: None, tau: default_tau() }
    }

    pub fn with_measurements(mut self, n_meas: usize) -> Self {
        self.n_meas = Some(n_meas);
        self
    }

    pub fn measurements(&self) -> usize {
        self.n_meas.unwrap_or(match self.model.space() {
            SpaceTag::NonnegRect => 16 * self.m.max(self.n),
            _ => 10 * self.n,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.density.unwrap_or(0.03);
        let sd = self.spr_density.unwrap_or(0.006);
        if !(d > 0.0 && d <= 1.0) || !(sd > 0.0 && sd <= 1.0) {
            return Err(Error::InvalidParameter("densities must lie in (0,1]".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidParameter("noise level must be nonnegative".into()));
        }
        if self.n == 0 || (self.model.space() == SpaceTag::NonnegRect && self.m == 0) {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        if self.measurements() == 0 {
            return Err(Error::InvalidParameter("need at least one measurement".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GroundTruth<T: Scalar> {
    pub u: DMatrix<T>,
    pub rank: usize,
    pub nnz: usize,
    /// The signal, for phase retrieval.
    pub x: Option<DVector<T>>,
    /// Achieved nonzero fraction where a sparsity target was pursued.
    pub achieved_density: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum Generated {
    Real(ProblemSpec<f64>, GroundTruth<f64>),
    Complex(ProblemSpec<Complex64>, GroundTruth<Complex64>),
}

impl Generated {
    pub fn problem(&self) -> AnyProblem {
        match self {
            Generated::Real(p, _) => AnyProblem::Real(p.clone()),
            Generated::Complex(p, _) => AnyProblem::Complex(p.clone()),
        }
    }
}

/// Sidecar with the ground truth, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub x_re: Vec<f64>,
    pub x_im: Vec<f64>,
    pub rank: usize,
    pub nnz: usize,
    pub seed: u64,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn to_file(&self, seed: u64) -> TruthFile {
        let (rows, cols) = self.u.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                re.push(self.u[(i, j)].real());
                if T::IS_COMPLEX {
                    im.push(self.u[(i, j)].imaginary());
                }
            }
        }
        let (x_re, x_im) = match &self.x {
            Some(x) => (x.iter().map(|v| v.real()).collect(), x.iter().map(|v| v.imaginary()).collect()),
            None => (Vec::new(), Vec::new()),
        };
        TruthFile { rows, cols, re, im, x_re, x_im, rank: self.rank, nnz: self.nnz, seed }
    }

    pub fn from_file(f: &TruthFile) -> Self {
        let u = DMatrix::from_fn(f.rows, f.cols, |i, j| {
            let l = i * f.cols + j;
            T::from_parts(f.re[l], if T::IS_COMPLEX { f.im[l] } else { 0.0 })
        });
        let x = if f.x_re.is_empty() {
            None
        } else {
            Some(DVector::from_fn(f.x_re.len(), |i, _| {
                T::from_parts(f.x_re[i], f.x_im.get(i).copied().unwrap_or(0.0))
            }))
        };
        GroundTruth { u, rank: f.rank, nnz: f.nnz, x, achieved_density: None, flags: Vec::new() }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = normal(rng) * s;
    let im = normal(rng) * s;
    Complex64::new(re, im)
}

fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, hi: f64) -> DMatrix<f64> {
    let d = Uniform::new(0.0, hi).expect("valid range");
    DMatrix::from_fn(r, c, |_, _| d.sample(rng))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

/// Bernoulli 0/1 matrix with at least one nonzero.
fn sparse_pattern(rng: &mut ChaCha8Rng, r: usize, c: usize, p: f64) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(r, c, |_, _| if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        if m.iter().any(|&v| v != 0.0) {
            return m;
        }
    }
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Places `blocks` copies of `v` along the diagonal separated by zero gaps; leftover rows and
/// columns are appended as zeros.
fn block_diagonal(v: &DMatrix<f64>, blocks: usize, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let (br, bc) = v.shape();
    if blocks * br > rows || blocks * bc > cols {
        return Err(Error::InvalidParameter("blocks do not fit".into()));
    }
    let gaps = blocks.saturating_sub(1).max(1);
    let gr = ((rows - blocks * br) / gaps).min(br);
    let gc = ((cols - blocks * bc) / gaps).min(bc);
    let mut u = DMatrix::zeros(rows, cols);
    for k in 0..blocks {
        u.view_mut((k * (br + gr), k * (bc + gc)), (br, bc)).copy_from(v);
    }
    Ok(u)
}

fn nnz_exact(m: &DMatrix<f64>) -> usize {
    m.iter().filter(|v| **v != 0.0).count()
}

/// Applies random Givens rotations `R <- G^T R G` to a diagonal until the nonzero count lies
/// within 10% of `target` or `20 n^2` rotations were tried. Returns the matrix and whether the
/// target was reached.
fn jacobi_rotations(rng: &mut ChaCha8Rng, diag: &[f64], target: usize) -> (DMatrix<f64>, bool) {
    let n = diag.len();
    let mut r = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
    let lo = (0.9 * target as f64).ceil() as usize;
    let hi = (1.1 * target as f64).floor() as usize;
    let in_range = |c: usize| c >= lo && c <= hi.max(lo);
    if n < 2 {
        let ok = in_range(nnz_exact(&r));
        return (r, ok);
    }
    let budget = 20 * n * n;
    for _ in 0..budget {
        let count = nnz_exact(&r);
        if in_range(count) {
            return (r, true);
        }
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let (s, c) = theta.sin_cos();
        let mut next = r.clone();
        // Columns then rows: R <- G^T R G with G the rotation in the (i, j) plane.
        for k in 0..n {
            let (a, b) = (next[(k, i)], next[(k, j)]);
            next[(k, i)] = c * a - s * b;
            next[(k, j)] = s * a + c * b;
        }
        for k in 0..n {
            let (a, b) = (next[(i, k)], next[(j, k)]);
            next[(i, k)] = c * a - s * b;
            next[(j, k)] = s * a + c * b;
        }
        for k in 0..n {
            for l in 0..k {
                let v = 0.5 * (next[(k, l)] + next[(l, k)]);
                next[(k, l)] = v;
                next[(l, k)] = v;
            }
        }
        // Never overshoot the window; rotations of two empty indices are no-ops anyway.
        if nnz_exact(&next) <= hi.max(lo) {
            r = next;
        }
    }
    let ok = in_range(nnz_exact(&r));
    (r, ok)
}

/// Rank and nonzero count of a truth, with entries below `1e-12 max` flushed to zero first.
fn finalize_truth<T: Scalar>(mut u: DMatrix<T>) -> (DMatrix<T>, usize, usize) {
    let mx = u.iter().map(|v| v.modulus()).fold(0.0, f64::max);
    u.apply(|v| {
        if v.modulus() <= crate::prox::CARD_FLUSH * mx {
            *v = T::zero()
        }
    });
    let rank = numerical_rank(&u);
    let nnz = cardinality(&u);
    (u, rank, nnz)
}

fn real_truth(gen: &GenSpec, rng: &mut ChaCha8Rng) -> Result<(DMatrix<f64>, Option<f64>, Vec<String>)> {
    let density = gen.density.unwrap_or(0.03);
    let mut flags = Vec::new();
    let mut achieved = None;
    let u = match gen.model {
        Model::CliqNn => {
            let (m1, n1) = (gen.m / 6, gen.n / 6);
            if m1 == 0 || n1 == 0 {
                return Err(Error::InvalidParameter("Cliq needs m, n >= 6".into()));
            }
            let y = uniform_matrix(rng, m1, 3, 1.0);
            let w = uniform_matrix(rng, n1, 3, 1.0);
            block_diagonal(&(y * w.transpose()), 4, gen.m, gen.n)?
        }
        Model::Rand1 | Model::Rand2 => {
            if gen.m % 5 != 0 || gen.n % 4 != 0 {
                return Err(Error::InvalidParameter("Rand1/Rand2 need m divisible by 5 and n by 4".into()));
            }
            let (m2, n2) = (gen.m / 5, gen.n / 4);
            let k = if gen.model == Model::Rand1 { 2 } else { 1 };
            let y = uniform_matrix(rng, 5, k, 10.0);
            let w = uniform_matrix(rng, 4, k, 10.0);
            let v = y * w.transpose();
            let r = sparse_pattern(rng, m2, n2, density);
            if gen.model == Model::Rand1 {
                kron(&v, &r)
            } else {
                kron(&r, &v)
            }
        }
        Model::CliqPsd => {
            let n1 = gen.n / 10;
            if n1 == 0 {
                return Err(Error::InvalidParameter("Cliq PSD needs n >= 10".into()));
            }
            let w = gaussian_matrix(rng, n1, 2);
            block_diagonal(&(&w * w.transpose()), 5, gen.n, gen.n)?
        }
        Model::RandPsd => {
            let n1 = 10.min(gen.n);
            if gen.n % n1 != 0 {
                return Err(Error::InvalidParameter("Rand PSD needs n divisible by 10".into()));
            }
            let n2 = gen.n / n1;
            let mut diag = vec![0.0; n2];
            let k = 4.min(n2);
            for i in sample(rng, n2, k).into_iter() {
                diag[i] = rng.random::<f64>();
            }
            let target = ((density * (gen.n * gen.n) as f64) / (n1 * n1) as f64).round().max(1.0) as usize;
            let (r, ok) = jacobi_rotations(rng, &diag, target);
            if !ok {
                flags.push(format!("rotation budget exhausted: {} nonzeros vs target {target}", nnz_exact(&r)));
            }
            let w = gaussian_matrix(rng, n1, 2);
            let u = kron(&r, &(&w * w.transpose()));
            achieved = Some(nnz_exact(&u) as f64 / (gen.n * gen.n) as f64);
            u
        }
        Model::Spr => {
            let n = gen.n;
            let mut diag: Vec<f64> = (0..n)
                .map(|_| {
                    let v = rng.random_range(0.0..100.0);
                    if rng.random::<f64>() < 0.98 {
                        0.0
                    } else {
                        v
                    }
                })
                .collect();
            if diag.iter().all(|&v| v == 0.0) {
                let i = rng.random_range(0..n);
                diag[i] = rng.random_range(0.0..100.0);
            }
            let sd = gen.spr_density.unwrap_or(0.006);
            let target = (sd * (n * n) as f64).round().max(1.0) as usize;
            let (r, ok) = jacobi_rotations(rng, &diag, target);
            if !ok {
                flags.push(format!("rotation budget exhausted: {} nonzeros vs target {target}", nnz_exact(&r)));
            }
            achieved = Some(nnz_exact(&r) as f64 / (n * n) as f64);
            r
        }
        Model::PhaseRetrieval => unreachable!("complex model"),
    };
    Ok((u, achieved, flags))
}

fn add_noise(rng: &mut ChaCha8Rng, b: &mut DVector<f64>, eta: f64) {
    for v in b.iter_mut() {
        *v += eta * normal(rng);
    }
}

/// Builds the instance and its ground truth.
pub fn generate(gen: &GenSpec) -> Result<Generated> {
    gen.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    let n_meas = gen.measurements();
    if gen.model == Model::PhaseRetrieval {
        let n = gen.n;
        let mut x = DVector::from_fn(n, |_, _| complex_normal(&mut rng));
        let zeros = (0.9 * n as f64).floor() as usize;
        for i in sample(&mut rng, n, zeros.min(n - 1)).into_iter() {
            x[i] = Complex64::new(0.0, 0.0);
        }
        let inf = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        x /= Complex64::new(inf, 0.0);
        let u = &x * x.adjoint();
        let factors = DMatrix::from_fn(n_meas, n, |_, _| complex_normal(&mut rng));
        let op = MeasurementOp::rank_one(factors)?;
        let mut b = op.apply(&u)?;
        add_noise(&mut rng, &mut b, gen.eta);
        let (u, rank, nnz) = finalize_truth(u);
        let spec = ProblemSpec::new(SpaceTag::PsdHermitian, op, b, rank.max(1), nnz.max(1), gen.tau)?
            .scale_problem()?
            .with_seed(gen.seed);
        let truth = GroundTruth { u, rank, nnz, x: Some(x), achieved_density: None, flags: Vec::new() };
        return Ok(Generated::Complex(spec, truth));
    }
    let (u, achieved, flags) = real_truth(gen, &mut rng)?;
    let space = gen.model.space();
    let (rows, cols) = u.shape();
    let op = if space.is_psd() {
        let factors = gaussian_matrix(&mut rng, n_meas, rows);
        MeasurementOp::rank_one(factors)?
    } else {
        let mats: Vec<DMatrix<f64>> = (0..n_meas).map(|_| gaussian_matrix(&mut rng, rows, cols)).collect();
        MeasurementOp::general(&mats, false)?
    };
    let mut b = op.apply(&u)?;
    add_noise(&mut rng, &mut b, gen.eta);
    let (u, rank, nnz) = finalize_truth(u);
    let spec = ProblemSpec::new(space, op, b, rank.max(1), nnz.max(1), gen.tau)?
        .scale_problem()?
        .with_seed(gen.seed);
    debug_assert!(fro_norm(&u).is_finite());
    let truth = GroundTruth { u, rank, nnz, x: None, achieved_density: achieved, flags };
    Ok(Generated::Real(spec, truth))
}
