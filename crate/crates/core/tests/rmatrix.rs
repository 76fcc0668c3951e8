use twistcm::cm_system::{CMSystem, SystemVariant};
use twistcm::elliptic::C64;
use twistcm::lie_twist::{build_twisted_algebra, CMat, Family, Variant};
use twistcm::report::substream;
use twistcm::rmatrix::*;
use twistcm::Error;

fn system(family: Family, rank: usize, variant: SystemVariant) -> CMSystem {
    let basis = if variant == SystemVariant::Sl2nLambda { Variant::Sl2nLambda } else { Variant::Diagram };
    CMSystem::new(build_twisted_algebra(family, rank, 2, basis).unwrap(), C64::new(0.05, 0.8), variant).unwrap()
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[test]
fn verify_suite_passes_for_small_diagram_twists() {
    for (family, rank, variant, samples) in [
        (Family::A, 2, SystemVariant::Vector, 6),
        (Family::A, 3, SystemVariant::Vector, 6),
        (Family::A, 4, SystemVariant::Vector, 3),
        (Family::A, 2, SystemVariant::Adjoint, 1),
    ] {
        let sys = system(family, rank, variant);
        let report = verify(&sys, samples, 21);
        assert_eq!(report.entries.len(), 9);
        assert!(report.all_passed(), "{family}{rank} {variant:?}\n{}", report.render_text());
    }
}

#[test]
fn rll_holds_for_d5_on_free_phases() {
    let sys = system(Family::D, 5, SystemVariant::Vector);
    let mut rng = substream(4, 0);
    for _ in 0..3 {
        let p = sys.random_phase(&mut rng, false, 0.5);
        let z1 = sys.random_spectral_point(&mut rng);
        let z2 = z1 + C64::new(0.31, 0.17);
        assert!(rll_residual(&sys, &p, z1, z2).unwrap() < 1e-12);
        assert!(rll_residual_with(&sys, &p, z1, z2, false).unwrap() > 1e-3);
    }
}

#[test]
fn lambda_basis_keeps_green_but_rejects_cdybe_and_rll() {
    let sys = system(Family::A, 3, SystemVariant::Sl2nLambda);
    let report = verify(&sys, 4, 2);
    assert!(report.all_passed(), "{}", report.render_text());
    assert!(report.get("rmatrix.cdybe").is_none());
    let p = sys.zero_phase();
    let z = [C64::new(0.1, 0.2), C64::new(0.4, 0.1), C64::new(0.7, 0.5)];
    assert!(matches!(cdybe_residual(&sys, &p.u, z[0], z[1], z[2]), Err(Error::InvalidConfig(_))));
    assert!(matches!(rll_residual(&sys, &p, z[0], z[1]), Err(Error::InvalidConfig(_))));
}

#[test]
fn casimir_contracts_to_the_identity_map() {
    for sys in [system(Family::A, 3, SystemVariant::Vector), system(Family::A, 2, SystemVariant::Adjoint), system(Family::A, 3, SystemVariant::Sl2nLambda)] {
        let casimir = casimir_tensor(&sys);
        for t in sys.representation() {
            assert!(max_abs(&(contract_second(&sys, &casimir, t) - t)) < 1e-12);
        }
    }
}

#[test]
fn residue_at_zero_is_the_casimir() {
    // every coefficient has a simple pole with unit residue at z = 0
    let sys = system(Family::A, 4, SystemVariant::Vector);
    let u = sys.zero_phase().u.iter().enumerate().map(|(k, _)| C64::new(0.11 * (k + 1) as f64, 0.03)).collect::<Vec<_>>();
    let eps = C64::new(1e-6, 0.0);
    let r = r_eval(&sys, &u, eps).unwrap().tensor * eps;
    assert!(max_abs(&(r - casimir_tensor(&sys))) < 1e-5);
}

#[test]
fn coincident_points_are_rejected() {
    let sys = system(Family::A, 2, SystemVariant::Vector);
    let u = vec![C64::new(0.13, 0.02)];
    let z = C64::new(0.2, 0.3);
    assert!(matches!(cdybe_residual(&sys, &u, z, z, z + 0.4), Err(Error::SingularArgument { .. })));
    assert!(matches!(green_residual(&sys, &u, z, z + 1.0), Err(Error::SingularArgument { .. })));
}

#[test]
fn resonant_u_is_rejected() {
    let sys = system(Family::A, 3, SystemVariant::Vector);
    assert!(r_eval(&sys, &[C64::new(0.0, 0.0), C64::new(0.0, 0.0)], C64::new(0.3, 0.2)).is_err());
    assert!(matches!(r_eval(&sys, &[C64::new(0.1, 0.0)], C64::new(0.3, 0.2)), Err(Error::Dimension(_))));
}

#[test]
fn grades_sum_to_the_tensor() {
    let sys = system(Family::D, 4, SystemVariant::Vector);
    let u: Vec<C64> = (0..sys.rank()).map(|k| C64::new(0.07 + 0.05 * k as f64, 0.02)).collect();
    let eval = r_eval(&sys, &u, C64::new(0.3, 0.25)).unwrap();
    let sum = eval.grades.iter().fold(CMat::zeros(eval.tensor.nrows(), eval.tensor.ncols()), |a, g| a + g);
    assert!(max_abs(&(sum - &eval.tensor)) < 1e-14);
    assert!(grade_covariance_residual(&sys, &u, C64::new(0.3, 0.25)).unwrap() < 1e-10);
}
