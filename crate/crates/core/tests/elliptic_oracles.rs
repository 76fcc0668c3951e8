use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use twistcm::elliptic::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ctx(tau: C64) -> EllipticContext {
    EllipticContext::new(tau).unwrap()
}

/// `2 pi i` times the (s,t) double series of the Kronecker function, valid on
/// `|q| < |s|, |t| < 1`.
fn kronecker_double_series(u: C64, z: C64, tau: C64) -> C64 {
    let (s, t, q) = (e(u), e(z), e(tau));
    let mut sum = 1.0 - 1.0 / (1.0 - t) - 1.0 / (1.0 - s);
    for i in 1..80 {
        for n in 1..80 {
            let qin = q.powi(i * n);
            sum += s.powi(-i) * qin * t.powi(-n) - s.powi(i) * qin * t.powi(n);
        }
    }
    2.0 * PI * C64::i() * sum
}

/// First Eisenstein series resummed so that it converges on `|t| = 1`.
fn e1_series(z: C64, tau: C64) -> C64 {
    let (t, q) = (e(z), e(tau));
    let two_pi_i = 2.0 * PI * C64::i();
    let mut sum = -PI * C64::i() - two_pi_i * t / (1.0 - t);
    for k in 1..200 {
        let qk = q.powi(k);
        sum += two_pi_i * qk / (1.0 - qk) * (t.powi(-k) - t.powi(k));
    }
    sum
}

/// Weierstrass function from its lattice sum over `|m|, |n| <= 200`.
fn wp_lattice_sum(z: C64, tau: C64) -> C64 {
    let mut sum = 1.0 / (z * z);
    for m in -200i32..=200 {
        for n in -200i32..=200 {
            if m == 0 && n == 0 {
                continue;
            }
            let w = c(m as f64, 0.0) + tau * n as f64;
            sum += 1.0 / ((z - w) * (z - w)) - 1.0 / (w * w);
        }
    }
    sum
}

#[test]
fn theta_sum_matches_product() {
    let k = ctx(c(0.0, 0.8));
    let z = c(0.31, 0.17);
    assert!((theta(z, &k) - theta_product(z, &k)).norm() < 1e-12);
}

#[test]
fn kronecker_matches_double_series() {
    let k = ctx(c(0.0, 0.7));
    let (u, z) = (c(0.2, 0.1), c(0.3, -0.05));
    let oracle = kronecker_double_series(u, z, k.tau());
    assert!((kronecker(u, z, &k).unwrap() - oracle).norm() < 1e-10);
}

#[test]
fn eisenstein1_matches_series() {
    let k = ctx(c(0.0, 1.0));
    let z = c(0.3, 0.0);
    assert!((eisenstein1(z, &k).unwrap() - e1_series(z, k.tau())).norm() < 1e-10);
}

#[test]
fn eisenstein2_matches_finite_difference() {
    let k = ctx(c(0.0, 0.8));
    let z = c(0.27, 0.03);
    let h = 1e-5;
    let fd = -(eisenstein1(z + h, &k).unwrap() - eisenstein1(z - h, &k).unwrap()) / (2.0 * h);
    assert!((eisenstein2(z, &k).unwrap() - fd).norm() < 1e-7);
}

#[test]
fn eisenstein2_derivative_matches_finite_difference() {
    let k = ctx(c(0.1, 0.9));
    let z = c(0.21, -0.13);
    let h = 1e-5;
    let fd = (eisenstein2(z + h, &k).unwrap() - eisenstein2(z - h, &k).unwrap()) / (2.0 * h);
    assert!((eisenstein2_dz(z, &k).unwrap() - fd).norm() < 1e-6);
}

#[test]
fn weierstrass_matches_lattice_sum() {
    let k = ctx(c(0.0, 1.0));
    let z = c(0.25, 0.0);
    // the truncated lattice sum is only conditionally convergent; it carries an
    // error of order 1e-6 at this radius
    assert!((weierstrass_p(z, &k).unwrap() - wp_lattice_sum(z, k.tau())).norm() < 1e-5);
}

#[test]
fn weierstrass_minus_e2_is_constant() {
    let k = ctx(c(0.1, 0.9));
    let values: Vec<C64> = (0..10)
        .map(|j| {
            let z = c(0.05 + 0.09 * j as f64, 0.03 * j as f64 - 0.1);
            weierstrass_p(z, &k).unwrap() - eisenstein2(z, &k).unwrap()
        })
        .collect();
    let spread = values.iter().map(|v| (v - values[0]).norm()).fold(0.0, f64::max);
    assert!(spread < 1e-9);
}

#[test]
fn residues_at_zero() {
    let k = ctx(c(0.0, 0.9));
    let res_e1 = residue_numeric(|w| eisenstein1(w, &k).unwrap(), c(0.0, 0.0), 0.1, 64).unwrap();
    assert!((res_e1 - 1.0).norm() < 1e-12);
    let z = c(0.3, 0.1);
    let res_phi = residue_numeric(|w| kronecker(w, z, &k).unwrap(), c(0.0, 0.0), 0.05, 64).unwrap();
    assert!((res_phi - 1.0).norm() < 1e-12);
    for m in 0..3 {
        let res = residue_numeric(|w| g_twisted(m, c(0.17, 0.05), w, 3, &k).unwrap(), c(0.0, 0.0), 0.05, 64)
            .unwrap();
        assert!((res - 1.0).norm() < 1e-12, "m={m}");
    }
    let res_u0 = residue_numeric(|w| g_twisted(0, w, z, 3, &k).unwrap(), c(0.0, 0.0), 0.05, 64).unwrap();
    assert!((res_u0 - 1.0).norm() < 1e-12);
    // for m != 0 the u-pole of g^(m) sits at u = -m tau / r with residue e(m z / r)
    let pole = -k.tau() / 3.0;
    let res_u = residue_numeric(|w| g_twisted(1, w, z, 3, &k).unwrap(), pole, 0.05, 64).unwrap();
    assert!((res_u - e(z / 3.0)).norm() < 1e-12);
}

fn point() -> impl Strategy<Value = C64> {
    (-0.45f64..0.45, -0.3f64..0.3).prop_map(|(a, b)| c(a, b))
}

fn generic(k: &EllipticContext, zs: &[C64]) -> bool {
    zs.iter().all(|&z| k.lattice_distance(z) > 0.05)
}

proptest! {
    #[test]
    fn fay_identities_close(u1 in point(), u2 in point(), z in point(), re in -0.5f64..0.5, im in 0.35f64..1.2) {
        let k = ctx(c(re, im));
        prop_assume!(generic(&k, &[u1, u2, z, u1 + u2, u1 + z, u2 + z, u1 - u2]));
        let (first, second) = fay_residual(u1, u2, z, &k).unwrap();
        prop_assert!(first < 1e-9, "fi1 {first}");
        prop_assert!(second < 1e-9, "fi2 {second}");
    }

    #[test]
    fn green_identities_vanish(u in point(), z in point(), m in 0i64..3) {
        let k = ctx(c(0.1, 0.8));
        prop_assume!(generic(&k, &[u, z, u + z, u + k.tau() * (m as f64 / 3.0)]));
        prop_assert!(green_kronecker_residual(u, z, &k).unwrap() < 1e-9);
        prop_assert!(green_e1_residual(z, &k).unwrap() < 1e-9);
        prop_assert!(green_twisted_residual(m, u, z, 3, &k).unwrap() < 1e-9);
    }

    #[test]
    fn parity_relations(z in point()) {
        let k = ctx(c(-0.2, 0.75));
        prop_assume!(generic(&k, &[z]));
        prop_assert!((eisenstein1(-z, &k).unwrap() + eisenstein1(z, &k).unwrap()).norm() < 1e-10);
        prop_assert!((eisenstein2(-z, &k).unwrap() - eisenstein2(z, &k).unwrap()).norm() < 1e-9);
        prop_assert!((weierstrass_p(-z, &k).unwrap() - weierstrass_p(z, &k).unwrap()).norm() < 1e-9);
    }
}

#[test]
fn evaluation_is_deterministic() {
    let k = ctx(c(0.1, 0.8));
    let z = c(0.123, 0.045);
    assert_eq!(theta(z, &k).re.to_bits(), theta(z, &k).re.to_bits());
    assert_eq!(kronecker(z, z, &k).unwrap(), kronecker(z, z, &k).unwrap());
}
