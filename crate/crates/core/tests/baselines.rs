mod support;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use splr::baselines::{
    admm_cspl_solve, admm_cspl_solve_with_diagnostics, power_iteration_lmax, ppalm_solve, ppalm_solve_with_diagnostics,
    sdcam_solve, y_step, y_step_residual, AdmmConfig, PpalmConfig, SdcamConfig,
};
use splr::datagen::{generate, GenSpec, Generated, Model};
use splr::report::TraceRecord;
use splr::space::SpaceTag;
use splr::{linalg, prox, Error, ProblemSpec};
use support::*;

fn real(gen: &GenSpec) -> (ProblemSpec<f64>, DMatrix<f64>) {
    match generate(gen).unwrap() {
        Generated::Real(spec, truth) => (spec, truth.u),
        Generated::Complex(..) => unreachable!(),
    }
}

fn phase(n: usize, seed: u64) -> ProblemSpec<Complex64> {
    match generate(&GenSpec::new(Model::PhaseRetrieval, n, n, 0.0, seed)).unwrap() {
        Generated::Complex(spec, _) => spec,
        Generated::Real(..) => unreachable!(),
    }
}

#[test]
fn power_iteration_matches_the_gram_spectrum() {
    let mut rng = rng(81);
    let spec = random_spec::<f64>(&mut rng, SpaceTag::NonnegRect, 4, 5, 12);
    let want = linalg::eigenvalues(&spec.op.gram().clone())[0];
    let got = power_iteration_lmax(&spec, 500, 1e-12).unwrap();
    assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
}

#[test]
fn ppalm_from_a_consistent_start_stops_immediately() {
    let (spec, truth) = real(&GenSpec::new(Model::CliqNn, 12, 12, 0.0, 5));
    let spec = ProblemSpec { b: spec.op.apply(&truth).unwrap(), ..spec };
    let rep = ppalm_solve(&spec, &PpalmConfig::matrix_recovery(), Some(&truth), Some(&truth)).unwrap();
    assert!(rep.converged);
    assert!(rep.vio_r.max(rep.vio_s) <= 1e-12);
    assert!(linalg::dist(&rep.solution, &truth) <= 1e-10 * truth.norm());
}

#[test]
fn ppalm_descends_and_keeps_membership() {
    for (gen, seed) in [(GenSpec::new(Model::CliqNn, 24, 18, 0.01, 6), 6), (GenSpec::new(Model::CliqPsd, 20, 20, 0.01, 7), 7)] {
        let (spec, _) = real(&gen);
        let (rep, diag) = ppalm_solve_with_diagnostics(&spec, &PpalmConfig::matrix_recovery(), None, None).unwrap();
        assert!(diag.inner_steps > 0, "seed {seed}");
        assert!(diag.max_phi_increase <= 1e-10, "seed {seed}: {}", diag.max_phi_increase);
        assert!(diag.max_membership_error <= 1e-10, "seed {seed}: {}", diag.max_membership_error);
        assert!(rep.vio_r.max(rep.vio_s) <= 1e-9 || rep.flags.iter().any(|f| f.contains("penalty cap")));
    }
}

#[test]
fn sdcam_stops_at_tolerance_or_floor_with_monotone_anchors() {
    let (spec, _) = real(&GenSpec::new(Model::CliqNn, 24, 18, 0.01, 8));
    let cfg = SdcamConfig::for_space(spec.space);
    let rep = sdcam_solve(&spec, &cfg, None).unwrap();
    let last = rep.trace.iter().rev().find_map(|r| match r {
        TraceRecord::Sdcam(s) => Some(s.clone()),
        _ => None,
    });
    let last = last.expect("stage records");
    assert!(last.vio_r.max(last.vio_s) <= cfg.vio_tol || last.mu / cfg.mu_decay <= cfg.mu_floor, "{last:?}");
    for r in &rep.trace {
        if let TraceRecord::Sdcam(s) = r {
            assert!(s.f_mu <= s.f_anchor * (1.0 + 1e-12) + 1e-15, "{s:?}");
        }
    }
}

#[test]
fn sdcam_from_the_truth_exits_immediately() {
    let (spec, truth) = real(&GenSpec::new(Model::CliqNn, 12, 12, 0.0, 9));
    let spec = ProblemSpec { b: spec.op.apply(&truth).unwrap(), ..spec };
    let rep = sdcam_solve(&spec, &SdcamConfig::for_space(spec.space), Some(&truth)).unwrap();
    assert!(rep.converged);
    assert!(rep.vio_r.max(rep.vio_s) <= 1e-12);
}

#[test]
fn admm_rejects_real_spaces() {
    let mut rng = rng(82);
    let spec = random_spec::<f64>(&mut rng, SpaceTag::PsdReal, 4, 4, 6);
    let rep = admm_cspl_solve(&spec, &AdmmConfig::default());
    assert!(matches!(rep, Err(Error::Unsupported(_))));
}

#[test]
fn admm_with_zero_data_converges_to_the_origin() {
    let spec = phase(10, 2);
    let spec = ProblemSpec { b: DVector::zeros(spec.b.len()), ..spec };
    let (rep, diag) = admm_cspl_solve_with_diagnostics(&spec, &AdmmConfig::default()).unwrap();
    assert!(rep.converged);
    assert!(linalg::fro_norm(&rep.solution) <= 1e-8);
    assert!(diag.pinf.max(diag.dinf) <= 1e-4);
}

#[test]
fn admm_internal_checks_on_small_phase_retrieval() {
    for seed in 1..=3 {
        let spec = phase(20, seed);
        let (rep, diag) = admm_cspl_solve_with_diagnostics(&spec, &AdmmConfig::default()).unwrap();
        assert!(rep.converged && diag.iterations <= 5000, "seed {seed}: {:?}", rep.flags);
        assert!(diag.pinf.max(diag.dinf) <= 1e-4);
        assert!(diag.max_z_residual <= 1e-10, "seed {seed}: {}", diag.max_z_residual);
        assert!(diag.max_y_residual <= 1e-10, "seed {seed}: {}", diag.max_y_residual);
        assert!(diag.max_y_asymmetry <= 1e-12, "seed {seed}: {}", diag.max_y_asymmetry);
        assert!(linalg::asymmetry(&rep.solution) <= 1e-12);
        assert!(prox::numerical_rank(&rep.solution) >= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn y_step_satisfies_prox_optimality(seed in any::<u64>(), n in 1usize..6, rho in 1e-3f64..1e3, alpha in 1e-4f64..1.0) {
        let mut rng = rng(seed);
        let g = hermitian::<Complex64>(&mut rng, n);
        let y = y_step(&g, rho, alpha);
        prop_assert!(y_step_residual(&g, &y, rho, alpha) <= 1e-10);
        prop_assert!(linalg::fro_norm(&(&y - y.adjoint())) <= 1e-12 * g.norm().max(1.0));
        // Moreau decomposition of the l1 prox: Y is the projection of G onto the alpha box.
        for v in y.iter() {
            prop_assert!(v.norm() <= alpha * (1.0 + 1e-12));
        }
    }
}
