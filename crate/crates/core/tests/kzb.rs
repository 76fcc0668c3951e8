use twistcm::cm_system::{CMSystem, SystemVariant};
use twistcm::elliptic::{eisenstein1, C64};
use twistcm::kzb::*;
use twistcm::lie_twist::{build_twisted_algebra, CMat, Family, Variant};
use twistcm::rmatrix::r_eval;
use twistcm::Error;

fn a_system(rank: usize, variant: SystemVariant) -> CMSystem {
    CMSystem::new(build_twisted_algebra(Family::A, rank, 2, Variant::Diagram).unwrap(), C64::new(0.0, 0.9), variant).unwrap()
}

fn config(rank: usize, positions: Vec<C64>) -> KZBConfig {
    let sys = a_system(rank, SystemVariant::Vector);
    let u = (0..sys.rank()).map(|k| C64::new(0.21 - 0.07 * k as f64, 0.04)).collect();
    KZBConfig::new(sys, positions, u, 1e-4).unwrap()
}

fn two_points() -> Vec<C64> {
    vec![C64::new(0.13, 0.05), C64::new(-0.13, -0.05)]
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[test]
fn a2_two_points_is_flat() {
    let report = flatness_probe(&config(2, two_points()), 3, 5);
    assert!(report.all_passed(), "{}", report.render_text());
    for name in ["kzb.flat_points", "kzb.flat_tau", "kzb.second_order", "kzb.mutation"] {
        assert!(report.get(name).is_some(), "{name}");
    }
}

#[test]
fn three_points_and_higher_rank_are_flat() {
    let cfg = config(2, vec![C64::new(0.13, 0.05), C64::new(-0.31, 0.12), C64::new(0.18, -0.17)]);
    assert!(flatness_probe(&cfg, 1, 2).all_passed());
    assert!(flatness_probe(&config(3, two_points()), 1, 2).all_passed());
}

#[test]
fn single_point_probes_only_tau() {
    let report = flatness_probe(&config(2, vec![C64::new(0.0, 0.0)]), 2, 1);
    assert!(report.get("kzb.flat_points").is_none());
    assert!(report.get("kzb.mutation").is_none());
    assert!(report.get("kzb.flat_tau").unwrap().passed);
}

#[test]
fn slots_are_validated() {
    let cfg = config(2, two_points());
    assert!(matches!(kzb_coeffs(&cfg, 0, 0), Err(Error::InvalidSlot(..))));
    assert!(matches!(kzb_coeffs(&cfg, 0, 2), Err(Error::InvalidSlot(2, 2))));
    let section = |_: &KzbPoint| Ok(CVec::zeros(9));
    assert!(matches!(nabla_apply(&cfg, Nabla::Point(3), &section), Err(Error::InvalidSlot(..))));
}

#[test]
fn configurations_are_validated() {
    let sys = a_system(2, SystemVariant::Vector);
    let u = vec![C64::new(0.21, 0.04)];
    let off = vec![C64::new(0.1, 0.0), C64::new(0.3, 0.0)];
    assert!(matches!(KZBConfig::new(sys.clone(), off, u.clone(), 1e-4), Err(Error::InvalidConfig(_))));
    let same = vec![C64::new(0.1, 0.0), C64::new(0.1, 0.0), C64::new(-0.2, 0.0)];
    assert!(matches!(KZBConfig::new(sys.clone(), same, u.clone(), 1e-4), Err(Error::SingularArgument { .. })));
    assert!(KZBConfig::new(sys.clone(), two_points(), u.clone(), 0.0).is_err());
    assert!(KZBConfig::new(sys.clone(), two_points(), vec![], 1e-4).is_err());
    let wrapped = vec![C64::new(0.6, 0.0), C64::new(0.4, 0.0)];
    assert!(KZBConfig::new(sys, wrapped, u.clone(), 1e-4).is_ok());
    assert!(KZBConfig::new(a_system(2, SystemVariant::Adjoint), two_points(), u, 1e-4).is_err());
}

#[test]
fn coefficients_swap_under_relabeling() {
    let cfg = config(2, two_points());
    let ac = kzb_coeffs(&cfg, 0, 1).unwrap();
    let ca = kzb_coeffs(&cfg, 1, 0).unwrap();
    assert!(max_abs(&(&ac.r + &ca.r)) < 1e-10 * max_abs(&ac.r));
    assert!(max_abs(&(&ac.f - &ca.f)) < 1e-10 * max_abs(&ac.f));
}

#[test]
fn coefficients_embed_the_r_matrix() {
    let cfg = config(2, two_points());
    let r = r_eval(&cfg.sys, &cfg.u, cfg.positions[0] - cfg.positions[1]).unwrap().tensor;
    assert!(max_abs(&(kzb_coeffs(&cfg, 0, 1).unwrap().r - r)) < 1e-14);
}

#[test]
fn constant_section_sees_only_the_r_terms() {
    let cfg = config(2, two_points());
    let basis = cfg.zero_weight_basis();
    let mut v = CVec::zeros(cfg.space_dim());
    v[basis[0]] = C64::new(1.0, -0.5);
    let constant = v.clone();
    let section = move |_: &KzbPoint| Ok(constant.clone());
    let out = nabla_apply(&cfg, Nabla::Point(0), &section).unwrap();
    let expected = kzb_coeffs(&cfg, 0, 1).unwrap().r * &v;
    assert!((out - expected).iter().all(|c| c.norm() < 1e-12));
}

#[test]
fn linear_section_reproduces_its_slope() {
    let cfg = config(2, two_points());
    let basis = cfg.zero_weight_basis();
    let mut slope = CVec::zeros(cfg.space_dim());
    slope[basis[1]] = C64::new(0.3, 0.7);
    let origin = cfg.positions[0];
    let s = slope.clone();
    let section = move |p: &KzbPoint| Ok(&s * (p.z[0] - origin));
    let out = nabla_apply(&cfg, Nabla::Point(0), &section).unwrap();
    assert!((out - &slope).iter().all(|c| c.norm() < 1e-9));
}

#[test]
fn nonfinite_sections_are_rejected() {
    let cfg = config(2, two_points());
    let section = |_: &KzbPoint| Ok(CVec::from_element(9, C64::new(f64::NAN, 0.0)));
    assert!(matches!(nabla_apply(&cfg, Nabla::Tau, &section), Err(Error::NonFiniteSection)));
}

#[test]
fn grade_zero_diagonal_of_r_is_e1_weighted() {
    // root generators are off-diagonal, so the diagonal of the grade-0 block is
    // the Cartan term alone
    let cfg = config(2, two_points());
    let z = cfg.positions[0] - cfg.positions[1];
    let grade0 = &r_eval(&cfg.sys, &cfg.u, z).unwrap().grades[0];
    let h = &cfg.sys.representation()[cfg.sys.tla().cartan[0]];
    let e1 = eisenstein1(z, cfg.sys.ctx()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let expected = e1 * h[(i, i)] * h[(j, j)];
            assert!((grade0[(i * 3 + j, i * 3 + j)] - expected).norm() < 1e-12);
        }
    }
}
