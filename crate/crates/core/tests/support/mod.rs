//! Random instances and independent oracles shared by the integration tests and the
//! acceptance suite.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splr::datagen::{generate, GenSpec, Generated, Model};
use splr::linalg::{self, symmetrized};
use splr::prox;
use splr::sidca::{sidca_solve, SidcaConfig, StepKind};
use splr::space::{ConstraintSet, SpaceTag};
use splr::ssn::{self, CertificateStrategy, NewtonBackend, SpectralCache, SsnOptions, Subproblem};
use splr::{MeasurementOp, ProblemSpec, Scalar};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

pub fn scalar<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    let re = normal(rng);
    let im = normal(rng);
    T::from_parts(re, im)
}

pub fn matrix<T: Scalar>(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<T> {
    DMatrix::from_fn(m, n, |_, _| scalar(rng))
}

pub fn hermitian<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<T> {
    symmetrized(matrix(rng, n, n))
}

/// `G G^*` with `G` of size `n x k`.
pub fn psd<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<T> {
    let g: DMatrix<T> = matrix(rng, n, k);
    symmetrized(&g * g.adjoint())
}

pub fn nonneg(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| normal(rng).abs())
}

/// Random cone point of the space.
pub fn cone_point<T: Scalar>(rng: &mut ChaCha8Rng, space: SpaceTag, m: usize, n: usize) -> DMatrix<T> {
    if space.is_psd() {
        let k = rng.random_range(1..=n);
        psd(rng, n, k)
    } else {
        DMatrix::from_fn(m, n, |_, _| T::from_real(normal(rng).abs()))
    }
}

/// Random problem with a dense Gaussian stack (Hermitian parts on PSD spaces).
pub fn random_spec<T: Scalar>(rng: &mut ChaCha8Rng, space: SpaceTag, m: usize, n: usize, n_meas: usize) -> ProblemSpec<T> {
    let (m, n) = if space.is_psd() { (n, n) } else { (m, n) };
    let mats: Vec<DMatrix<T>> = (0..n_meas).map(|_| matrix(rng, m, n)).collect();
    let op = MeasurementOp::general(&mats, space.is_psd()).unwrap();
    let b = DVector::from_fn(n_meas, |_, _| normal(rng));
    let r = rng.random_range(1..=m.min(n));
    let s = rng.random_range(1..=m * n);
    ProblemSpec::new(space, op, b, r, s, 10.0).unwrap()
}

/// Subproblem data `(mu, c, W)` with `W` a DC subgradient at a random cone point.
pub fn random_subproblem_data<T: Scalar>(rng: &mut ChaCha8Rng, spec: &ProblemSpec<T>) -> (f64, f64, DMatrix<T>) {
    let (m, n) = spec.shape();
    let mu = rng.random_range(0.2..5.0);
    let c = rng.random_range(0.0..2.0);
    let u = cone_point::<T>(rng, spec.space, m, n);
    let w = prox::select_w_subgradient(&u, spec, mu, c).unwrap();
    (mu, c, w)
}

pub fn random_z(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| normal(rng))
}

/// `<A(U), z>` by an explicit double loop over the entries of every `A_i`.
pub fn apply_by_loops<T: Scalar>(mats: &[DMatrix<T>], u: &DMatrix<T>) -> DVector<f64> {
    DVector::from_iterator(
        mats.len(),
        mats.iter().map(|a| {
            let mut acc = 0.0;
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    acc += (a[(i, j)].conjugate() * u[(i, j)]).real();
                }
            }
            acc
        }),
    )
}

/// Central-difference gradient of `f` at `z` with step `h`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, z: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(z.len());
    for i in 0..z.len() {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[i] += h;
        zm[i] -= h;
        g[i] = (f(&zp) - f(&zm)) / (2.0 * h);
    }
    g
}

fn grad_error_for<T: Scalar>(space: SpaceTag, count: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..count {
        let mut rng = rng(seed.wrapping_add(k as u64));
        let n = rng.random_range(2..=8);
        let m = rng.random_range(2..=8);
        let n_meas = rng.random_range(5..=60);
        let spec = random_spec::<T>(&mut rng, space, m, n, n_meas);
        let (mu, c, w) = random_subproblem_data(&mut rng, &spec);
        let sub = Subproblem::new(&spec, mu, c, w);
        let z = random_z(&mut rng, n_meas);
        let g = sub.theta_grad(&z).unwrap();
        let fd = fd_gradient(|x| sub.theta_value(x).unwrap(), &z, 1e-6);
        worst = worst.max((&fd - &g).norm() / g.norm().max(1e-12));
    }
    worst
}

/// Largest relative error between `grad Theta` and central differences over `count` random
/// subproblems of the space.
pub fn theta_gradient_error(space: SpaceTag, count: usize, seed: u64) -> f64 {
    match space {
        SpaceTag::PsdHermitian => grad_error_for::<Complex64>(space, count, seed),
        _ => grad_error_for::<f64>(space, count, seed),
    }
}

/// Random unitary (orthogonal) factor from the eigenvectors of a random Hermitian matrix.
pub fn random_unitary<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<T> {
    SymmetricEigen::new(hermitian::<T>(rng, n)).eigenvectors
}

/// Nonincreasing spectrum with both signs present.
pub fn mixed_spectrum(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let n_pos = rng.random_range(1..n);
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let a = rng.random_range(0.1..3.0);
            if i < n_pos {
                a
            } else {
                -a
            }
        })
        .collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    DVector::from_vec(v)
}

fn hessian_gap_for<T: Scalar>(count: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..count {
        let mut rng = rng(seed.wrapping_add(k as u64));
        let n = rng.random_range(2..=10);
        let cache = SpectralCache::from_parts(mixed_spectrum(&mut rng, n), random_unitary::<T>(&mut rng, n));
        let d = hermitian::<T>(&mut rng, n);
        let a = ssn::hessian_action_low(&cache, &d).unwrap();
        let b = ssn::hessian_action_complement(&cache, &d).unwrap();
        worst = worst.max(linalg::dist(&a, &b) / linalg::fro_norm(&d).max(1.0));
    }
    worst
}

/// Largest gap between the two generalized-Jacobian forms over random mixed-sign spectra,
/// half real and half complex.
pub fn hessian_form_gap(count: usize, seed: u64) -> f64 {
    let half = count / 2;
    hessian_gap_for::<f64>(count - half, seed).max(hessian_gap_for::<Complex64>(half, seed ^ 0x5a5a))
}

/// Largest gap between the spectral Jacobian action and central differences of the PSD
/// projection at a differentiable point.
pub fn hessian_fd_gap(count: usize, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..count {
        let mut rng = rng(seed.wrapping_add(k as u64));
        let n = rng.random_range(2..=8);
        let q = random_unitary::<f64>(&mut rng, n);
        let l = mixed_spectrum(&mut rng, n);
        let x = symmetrized(&q * DMatrix::from_diagonal(&l) * q.transpose());
        let cache = SpectralCache::new(&x);
        let d = hermitian::<f64>(&mut rng, n);
        let h = 1e-6;
        let pp = SpectralCache::new(&(&x + &d * h)).positive_part();
        let pm = SpectralCache::new(&(&x - &d * h)).positive_part();
        let fd = (pp - pm) / (2.0 * h);
        let act = ssn::hessian_action_psd(&cache, &d).unwrap();
        worst = worst.max(linalg::dist(&fd, &act) / linalg::fro_norm(&d));
    }
    worst
}

/// Column `A(E_ij)` for every entry, assembled by applying the operator to unit matrices.
fn unit_columns(spec: &ProblemSpec<f64>, entries: &[(usize, usize)]) -> DMatrix<f64> {
    let (m, n) = spec.shape();
    let mut cols = DMatrix::zeros(spec.op.len(), entries.len());
    for (c, &(i, j)) in entries.iter().enumerate() {
        let mut e = DMatrix::zeros(m, n);
        e[(i, j)] = 1.0;
        cols.set_column(c, &spec.op.apply(&e).unwrap());
    }
    cols
}

/// Largest relative gap between the Woodbury Newton direction and a dense LU solve of the
/// assembled `(I + mu A_I A_I^T) d = -grad` on random orthant subproblems.
pub fn smw_dense_gap(count: usize, seed: u64) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 0..count {
        let mut rng = rng(seed.wrapping_add(k as u64));
        let m = rng.random_range(2..=5);
        let n = rng.random_range(2..=5);
        let n_meas = rng.random_range(m * n..=m * n + 20);
        let spec = random_spec::<f64>(&mut rng, SpaceTag::NonnegRect, m, n, n_meas);
        let (mu, c, w) = random_subproblem_data(&mut rng, &spec);
        let sub = Subproblem::new(&spec, mu, c, w);
        let z = random_z(&mut rng, n_meas);
        let eval = sub.evaluate(&z).unwrap();
        let ssn::ProjInfo::Active(active) = &eval.info else { unreachable!() };
        let dir = ssn::newton_direction(&sub, &eval, NewtonBackend::Auto, 500).unwrap();
        let a_i = unit_columns(&spec, active);
        let dense = DMatrix::identity(n_meas, n_meas) + &a_i * a_i.transpose() * mu;
        let oracle = dense.lu().solve(&(-&eval.grad)).unwrap();
        worst = worst.max((&dir.d - &oracle).norm() / oracle.norm().max(1e-300));
        checked += 1;
    }
    (worst, checked)
}

/// All `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Nearest point of a cardinality-type set by enumerating every support of size `s`.
pub fn enumerate_card_projection(m: &DMatrix<f64>, set: ConstraintSet) -> DMatrix<f64> {
    let s = match set {
        ConstraintSet::Card(s) | ConstraintSet::CardBox(s, _) | ConstraintSet::CardInOrthant(s) => s,
        _ => panic!("not a cardinality set"),
    };
    let kept = |v: f64| match set {
        ConstraintSet::Card(_) => v,
        ConstraintSet::CardBox(_, tau) => v.clamp(-tau, tau),
        _ => v.max(0.0),
    };
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for support in subsets(m.len(), s) {
        let mut p = DMatrix::zeros(m.nrows(), m.ncols());
        for &l in &support {
            p[l] = kept(m[l]);
        }
        let d = (m - &p).norm();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, p));
        }
    }
    best.unwrap().1
}

/// Largest distance gap between `project` and support enumeration on random 4x4 inputs for
/// `Card`, `CardBox` and `CardInOrthant` with `s` in 1..=3.
pub fn card_enumeration_gap(draws: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let m = matrix::<f64>(&mut rng, 4, 4);
        let tau = rng.random_range(0.2..2.0);
        for s in 1..=3 {
            for set in [ConstraintSet::Card(s), ConstraintSet::CardBox(s, tau), ConstraintSet::CardInOrthant(s)] {
                let p = prox::project(&m, set).unwrap();
                let oracle = enumerate_card_projection(&m, set);
                worst = worst.max((&p - &oracle).norm());
            }
        }
    }
    worst
}

/// Truncated SVD `sum_{k<r} f(sigma_k) u_k v_k^T` from the eigenvectors of the symmetric
/// dilation `[[0, M], [M^T, 0]]`.
pub fn dilation_truncation(m: &DMatrix<f64>, r: usize, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (p, q) = m.shape();
    let mut dil = DMatrix::zeros(p + q, p + q);
    dil.view_mut((0, p), (p, q)).copy_from(m);
    dil.view_mut((p, 0), (q, p)).copy_from(&m.transpose());
    let eig = SymmetricEigen::new(dil);
    let mut order: Vec<usize> = (0..p + q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut out = DMatrix::zeros(p, q);
    for &k in order.iter().take(r) {
        let w = eig.eigenvectors.column(k);
        let u = w.rows(0, p);
        let v = w.rows(p, q);
        out += (u * v.transpose()) * (2.0 * f(eig.eigenvalues[k]));
    }
    out
}

/// Largest gap between `Rank`/`RankSpecBox` projections and the dilation-based truncation.
pub fn rank_svd_gap(draws: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = rng.random_range(2..=6);
        let q = rng.random_range(2..=6);
        let m = matrix::<f64>(&mut rng, p, q);
        let r = rng.random_range(1..=p.min(q));
        let tau = rng.random_range(0.5..3.0);
        let a = prox::project(&m, ConstraintSet::Rank(r)).unwrap();
        let b = prox::project(&m, ConstraintSet::RankSpecBox(r, tau)).unwrap();
        worst = worst.max((&a - dilation_truncation(&m, r, |s| s)).norm());
        worst = worst.max((&b - dilation_truncation(&m, r, |s| s.min(tau))).norm());
    }
    worst
}

fn lemma_slack_for<T: Scalar>(space: SpaceTag, count: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let m = rng.random_range(2..=7);
        let n = rng.random_range(2..=7);
        let (m, n) = if space.is_psd() { (n, n) } else { (m, n) };
        let spec = random_spec::<T>(&mut rng, space, m, n, 3);
        let u = cone_point::<T>(&mut rng, space, m, n);
        let proj = prox::project_feasible(&u, &spec).unwrap();
        let slack = prox::penalty_residual(&u, &spec) + 1e-10 - linalg::dist(&u, &proj);
        worst = worst.min(slack);
    }
    worst
}

/// Smallest `P(U) + 1e-10 - ||U - Pi_R(U)||_F` over random cone points of the space.
pub fn lemma_bound_slack(space: SpaceTag, count: usize, seed: u64) -> f64 {
    match space {
        SpaceTag::PsdHermitian => lemma_slack_for::<Complex64>(space, count, seed),
        _ => lemma_slack_for::<f64>(space, count, seed),
    }
}

/// Worst-case quantities over siDCA runs; every field must be nonnegative for the invariants to hold.
#[derive(Clone, Copy, Debug)]
pub struct SidcaInvariants {
    /// `J(U^k) - J(U^{k+1}) - kappa/(2 mu) ||U^{k+1} - U^k||^2`, relative to `max(1, |J|)`.
    pub descent_slack: f64,
    /// `J(U^k) - J(U^{k+1})` over all steps, relative to `max(1, |J|)`.
    pub monotone_slack: f64,
    /// `eps_k - ||Delta~||` over accepted certificates.
    pub certificate_slack: f64,
    /// Largest fixed-point residual of an accepted certificate, relative to `max(1, ||U~||)`.
    pub fixed_point_residual: f64,
    pub serious_steps: usize,
    pub accepted_certificates: usize,
}

/// Small seeded instances: orthant Cliq 24x18 and real PSD Cliq 20 alternate with the seed.
pub fn small_instance(seed: u64) -> ProblemSpec<f64> {
    let gen = if seed % 2 == 0 {
        GenSpec::new(Model::CliqNn, 24, 18, 0.01, seed)
    } else {
        GenSpec::new(Model::CliqPsd, 20, 20, 0.01, seed)
    };
    match generate(&gen).unwrap() {
        Generated::Real(spec, _) => spec,
        Generated::Complex(..) => unreachable!(),
    }
}

/// Runs siDCA with both certificate strategies at a few `(mu, c)` pairs per seed and reports
/// the worst-case invariant slacks.
pub fn sidca_invariants(seeds: &[u64]) -> SidcaInvariants {
    let mut out = SidcaInvariants {
        descent_slack: f64::INFINITY,
        monotone_slack: f64::INFINITY,
        certificate_slack: f64::INFINITY,
        fixed_point_residual: 0.0,
        serious_steps: 0,
        accepted_certificates: 0,
    };
    for &seed in seeds {
        let spec = small_instance(seed);
        for (mu, c, strategy) in [(10.0, 0.05, CertificateStrategy::Cheap), (1.0, 0.5, CertificateStrategy::Exact)] {
            let cfg = SidcaConfig { strategy, max_iter: 300, eps: 1e-6, ..SidcaConfig::default() };
            let u0 = spec.zeros();
            let res = sidca_solve(&spec, mu, c, &u0, &cfg, None).unwrap();
            for rec in &res.trace {
                let scale = rec.j_before.abs().max(1.0);
                out.monotone_slack = out.monotone_slack.min((rec.j_before - rec.j_after) / scale);
                if rec.kind == StepKind::Serious {
                    let decrease = rec.j_before - rec.j_after;
                    let need = cfg.kappa / (2.0 * mu) * rec.step_norm * rec.step_norm;
                    out.descent_slack = out.descent_slack.min((decrease - need) / scale);
                    out.serious_steps += 1;
                }
                if rec.certificate_accepted {
                    let exact = rec.delta_exact.expect("accepted certificates carry the exact norm");
                    out.certificate_slack = out.certificate_slack.min(rec.eps_k - exact);
                    out.accepted_certificates += 1;
                }
            }
            // Independent fixed-point check on the final certificate pair.
            let w = prox::select_w_subgradient(&res.center, &spec, mu, c).unwrap();
            let sub = Subproblem::new(&spec, mu, c, w);
            let state = ssn::ssn_solve(&sub, &res.z, 1e-11, &SsnOptions::default()).unwrap();
            let cert = ssn::make_certificate(&sub, &state, CertificateStrategy::Exact, 1.0).unwrap();
            let delta = cert.delta.unwrap();
            let fp = fixed_point_by_substitution(&sub, &cert.v, &delta);
            out.fixed_point_residual = out.fixed_point_residual.max(fp / linalg::fro_norm(&cert.v).max(1.0));
            for rec in res.trace.iter().filter(|r| r.certificate_accepted) {
                let fp = rec.fixed_point_residual.expect("accepted certificates carry the residual");
                out.fixed_point_residual = out.fixed_point_residual.max(fp / res.center.norm().max(1.0));
            }
        }
    }
    out
}

/// `||U~ - Pi(U~ - mu grad F(U~) + mu Delta~)||` with `grad F` assembled from its definition.
pub fn fixed_point_by_substitution<T: Scalar>(
    sub: &Subproblem<'_, T>,
    v: &DMatrix<T>,
    delta: &DMatrix<T>,
) -> f64 {
    let spec = sub.spec;
    let resid = spec.op.apply(v).unwrap() - &spec.b;
    let grad = spec.op.adjoint(&resid).unwrap() - &sub.phi + v / T::from_real(sub.mu);
    let arg = v - (grad - delta) * T::from_real(sub.mu);
    let proj = if spec.space.is_psd() {
        let e = SymmetricEigen::new(symmetrized(arg));
        let pos = e.eigenvalues.map(|l| l.max(0.0));
        let d = DMatrix::from_diagonal(&pos.map(T::from_real));
        &e.eigenvectors * d * e.eigenvectors.adjoint()
    } else {
        arg.map(|x| T::from_real(x.real().max(0.0)))
    };
    linalg::dist(v, &proj)
}

/// Outcome of one SSN run for the quality criterion.
#[derive(Clone, Debug)]
pub struct SsnRun {
    pub iterations: usize,
    pub final_gamma: f64,
    pub converged: bool,
    /// Residual norms, starting with the initial one.
    pub residuals: Vec<f64>,
}

impl SsnRun {
    /// Last three ratios `||gamma_{j+1}|| / ||gamma_j||` strictly decreasing.
    pub fn superlinear_tail(&self) -> bool {
        let r = &self.residuals;
        if r.len() < 4 {
            return false;
        }
        let ratios: Vec<f64> = r.windows(2).map(|w| w[1] / w[0]).collect();
        let t = &ratios[ratios.len() - 3..];
        t[0] > t[1] && t[1] > t[2]
    }
}

fn ssn_run<T: Scalar>(space: SpaceTag, seed: u64) -> SsnRun {
    let mut rng = rng(seed);
    let (m, n, n_meas) = if space.is_psd() { (10, 10, 30) } else { (8, 6, 30) };
    let spec = random_spec::<T>(&mut rng, space, m, n, n_meas);
    let (_, c, w) = random_subproblem_data(&mut rng, &spec);
    let mu = rng.random_range(5.0..50.0);
    let sub = Subproblem::new(&spec, mu, c, w);
    let z0 = DVector::zeros(n_meas);
    let g0 = sub.theta_grad(&z0).unwrap().norm();
    let state = ssn::ssn_solve(&sub, &z0, 1e-10, &SsnOptions::default()).unwrap();
    let mut residuals = vec![g0];
    residuals.extend(state.trace.iter().map(|t| t.gamma_norm));
    SsnRun { iterations: state.iterations, final_gamma: state.gamma_norm(), converged: state.converged, residuals }
}

/// SSN runs on seeded subproblems cycling through the three spaces.
pub fn ssn_runs(count: usize, seed: u64) -> Vec<SsnRun> {
    (0..count as u64)
        .map(|k| match k % 3 {
            0 => ssn_run::<f64>(SpaceTag::PsdReal, seed + k),
            1 => ssn_run::<f64>(SpaceTag::NonnegRect, seed + k),
            _ => ssn_run::<Complex64>(SpaceTag::PsdHermitian, seed + k),
        })
        .collect()
}
