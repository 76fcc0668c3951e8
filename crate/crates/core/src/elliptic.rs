//! Odd theta function, Kronecker kernel, Eisenstein series and their twisted
//! variants, all in the additive parameterization `t = e(z)`, `q = e(tau)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// `e(x) = exp(2 pi i x)`.
pub fn e(x: C64) -> C64 {
    (2.0 * PI * I * x).exp()
}

fn two_pi_i() -> C64 {
    2.0 * PI * I
}

/// Modular parameter together with the truncation policy used by every series.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticContext {
    tau: C64,
    q: C64,
    truncation_order: usize,
    tol: f64,
    lattice_exclusion_radius: f64,
}

impl EllipticContext {
    pub const DEFAULT_TOL: f64 = 1e-12;
    pub const DEFAULT_EXCLUSION: f64 = 1e-6;

    pub fn new(tau: C64) -> Result<Self> {
        Self::with_policy(tau, Self::DEFAULT_TOL, Self::DEFAULT_EXCLUSION)
    }

    pub fn with_policy(tau: C64, tol: f64, lattice_exclusion_radius: f64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() {
            return Err(Error::InvalidModulus(tau));
        }
        if !(tol > 0.0) || !(lattice_exclusion_radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance {tol} and exclusion radius {lattice_exclusion_radius} must be positive"
            )));
        }
        let q = e(tau);
        // smallest order with |q|^order < tol / 100
        let log_q = q.norm().ln();
        let truncation_order = ((tol / 100.0).ln() / log_q).floor() as usize + 1;
        Ok(Self { tau, q, truncation_order, tol, lattice_exclusion_radius })
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn q(&self) -> C64 {
        self.q
    }

    pub fn truncation_order(&self) -> usize {
        self.truncation_order
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn lattice_exclusion_radius(&self) -> f64 {
        self.lattice_exclusion_radius
    }

    /// Distance from `z` to the period lattice `Z + tau Z`.
    pub fn lattice_distance(&self, z: C64) -> f64 {
        let b0 = (z.im / self.tau.im).round();
        let mut best = f64::INFINITY;
        for db in -1..=1 {
            let b = b0 + db as f64;
            let w = z - self.tau * b;
            let a0 = w.re.round();
            for da in -1..=1 {
                best = best.min((w - (a0 + da as f64)).norm());
            }
        }
        best
    }

    fn ensure_regular(&self, z: C64, what: &'static str) -> Result<()> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite(what));
        }
        if self.lattice_distance(z) < self.lattice_exclusion_radius {
            return Err(Error::SingularArgument { what: what.to_string(), at: z });
        }
        Ok(())
    }
}

/// `d`-th z-derivative of the odd theta function
/// `theta(z) = i sum_n (-1)^n e(tau (n-1/2)^2 / 2) e((n-1/2) z)`,
/// summed outward from the dominant term until the tail is below rounding.
pub fn theta_derivative(z: C64, order: u32, ctx: &EllipticContext) -> C64 {
    let tau = ctx.tau;
    // |term(k)| ~ exp(-pi Im(tau) k^2 - 2 pi Im(z) k), k = n - 1/2
    let center = (-z.im / tau.im + 0.5).round() as i64;
    let term = |n: i64| -> C64 {
        let k = n as f64 - 0.5;
        let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let phase = e(tau * (k * k / 2.0) + z * k);
        sign * phase * (two_pi_i() * k).powu(order)
    };
    let mut sum = term(center);
    let mut peak = sum.norm();
    let mut step = 1;
    loop {
        let up = term(center + step);
        let down = term(center - step);
        sum += up + down;
        let m = up.norm().max(down.norm());
        peak = peak.max(m);
        if step > 3 && m <= peak * 1e-18 {
            break;
        }
        step += 1;
        if step > 4000 {
            break;
        }
    }
    I * sum
}

pub fn theta(z: C64, ctx: &EllipticContext) -> C64 {
    theta_derivative(z, 0, ctx)
}

/// Product form `2 q^{1/8} sin(pi z) prod (1-q^n)(1-q^n e(z))(1-q^n e(-z))`,
/// kept as an independent cross-check of [`theta`].
pub fn theta_product(z: C64, ctx: &EllipticContext) -> C64 {
    let q = ctx.q;
    let t = e(z);
    let mut prod = C64::new(1.0, 0.0);
    let mut qn = q;
    for _ in 0..(ctx.truncation_order + 8) {
        prod *= (1.0 - qn) * (1.0 - qn * t) * (1.0 - qn / t);
        qn *= q;
    }
    2.0 * e(ctx.tau / 8.0) * (PI * z).sin() * prod
}

/// `theta'(0)`; equals `2 pi eta(tau)^3` up to the convention above.
pub fn theta_prime_zero(ctx: &EllipticContext) -> C64 {
    theta_derivative(C64::new(0.0, 0.0), 1, ctx)
}

/// Kronecker kernel `phi(u,z) = theta(u+z) theta'(0) / (theta(u) theta(z))`.
pub fn kronecker(u: C64, z: C64, ctx: &EllipticContext) -> Result<C64> {
    ctx.ensure_regular(u, "kronecker u")?;
    ctx.ensure_regular(z, "kronecker z")?;
    Ok(theta(u + z, ctx) * theta_prime_zero(ctx) / (theta(u, ctx) * theta(z, ctx)))
}

/// `d/du phi(u,z) = phi(u,z) (E1(u+z) - E1(u))`.
pub fn kronecker_du(u: C64, z: C64, ctx: &EllipticContext) -> Result<C64> {
    let phi = kronecker(u, z, ctx)?;
    Ok(phi * (log_derivative(u + z, ctx) - eisenstein1(u, ctx)?))
}

/// `theta'/theta` without the lattice guard (used where the argument is a
/// regular point of the numerator, e.g. `u + z` in `d/du phi`).
fn log_derivative(z: C64, ctx: &EllipticContext) -> C64 {
    theta_derivative(z, 1, ctx) / theta(z, ctx)
}

/// First Eisenstein series `E1(z) = d/dz log theta(z)`.
pub fn eisenstein1(z: C64, ctx: &EllipticContext) -> Result<C64> {
    ctx.ensure_regular(z, "eisenstein1")?;
    Ok(log_derivative(z, ctx))
}

/// Second Eisenstein series `E2(z) = -d/dz E1(z)`.
pub fn eisenstein2(z: C64, ctx: &EllipticContext) -> Result<C64> {
    ctx.ensure_regular(z, "eisenstein2")?;
    let t0 = theta(z, ctx);
    let t1 = theta_derivative(z, 1, ctx);
    let t2 = theta_derivative(z, 2, ctx);
    let l1 = t1 / t0;
    Ok(l1 * l1 - t2 / t0)
}

/// `d/dz E2(z) = -E1''(z)`.
pub fn eisenstein2_dz(z: C64, ctx: &EllipticContext) -> Result<C64> {
    ctx.ensure_regular(z, "eisenstein2_dz")?;
    let t0 = theta(z, ctx);
    let l1 = theta_derivative(z, 1, ctx) / t0;
    let l2 = theta_derivative(z, 2, ctx) / t0;
    let l3 = theta_derivative(z, 3, ctx) / t0;
    Ok(-(l3 - 3.0 * l2 * l1 + 2.0 * l1 * l1 * l1))
}

/// `eta1 = 1 - 24 sum_n n q^n / (1 - q^n)`, the normalized log-derivative of
/// the Dedekind eta function.
pub fn eta1(ctx: &EllipticContext) -> C64 {
    let q = ctx.q;
    let mut sum = C64::new(0.0, 0.0);
    let mut qn = q;
    let mut n = 1.0;
    loop {
        let term = n * qn / (1.0 - qn);
        sum += term;
        if term.norm() < 1e-18 || n > 10_000.0 {
            break;
        }
        qn *= q;
        n += 1.0;
    }
    1.0 - 24.0 * sum
}

/// Weierstrass function `wp(z) = E2(z) - (pi^2/3) eta1`.
pub fn weierstrass_p(z: C64, ctx: &EllipticContext) -> Result<C64> {
    Ok(eisenstein2(z, ctx)? - PI * PI / 3.0 * eta1(ctx))
}

/// Coincident limit of `(E1(z)^2 - E2(z)) / 2` at `z = 0`,
/// equal to `theta'''(0) / (2 theta'(0))`.
pub fn half_e1_sq_minus_e2_at_zero(ctx: &EllipticContext) -> C64 {
    let zero = C64::new(0.0, 0.0);
    theta_derivative(zero, 3, ctx) / (2.0 * theta_derivative(zero, 1, ctx))
}

/// Twisted kernel `g^(m)(u,z) = e(m z / r) phi(u + m tau / r, z)`.
pub fn g_twisted(m: i64, u: C64, z: C64, r: u32, ctx: &EllipticContext) -> Result<C64> {
    if r == 0 {
        return Err(Error::InvalidConfig("twist order must be positive".into()));
    }
    let beta = m as f64 / r as f64;
    twisted_kernel(beta, u, z, ctx)
}

/// General twisted kernel `e(beta z) phi(w + beta tau, z)`; every Lax and
/// r-matrix coefficient is one of these.
pub fn twisted_kernel(beta: f64, w: C64, z: C64, ctx: &EllipticContext) -> Result<C64> {
    Ok(e(z * beta) * kronecker(w + ctx.tau * beta, z, ctx)?)
}

/// `d/dw` of [`twisted_kernel`].
pub fn twisted_kernel_dw(beta: f64, w: C64, z: C64, ctx: &EllipticContext) -> Result<C64> {
    Ok(e(z * beta) * kronecker_du(w + ctx.tau * beta, z, ctx)?)
}

/// Residuals of the two Fay identities
/// `phi(u,z) phi(-u,z) = E2(z) - E2(u)` and
/// `phi(u1,z) phi'(u2,z) - phi(u2,z) phi'(u1,z) = (E2(u1) - E2(u2)) phi(u1+u2,z)`.
pub fn fay_residual(u1: C64, u2: C64, z: C64, ctx: &EllipticContext) -> Result<(f64, f64)> {
    let first = kronecker(u1, z, ctx)? * kronecker(-u1, z, ctx)?
        - (eisenstein2(z, ctx)? - eisenstein2(u1, ctx)?);
    let lhs = kronecker(u1, z, ctx)? * kronecker_du(u2, z, ctx)?
        - kronecker(u2, z, ctx)? * kronecker_du(u1, z, ctx)?;
    let rhs = if (u1 - u2).norm() == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        (eisenstein2(u1, ctx)? - eisenstein2(u2, ctx)?) * kronecker(u1 + u2, z, ctx)?
    };
    Ok((first.norm(), (lhs - rhs).norm()))
}

/// Pointwise Green identity of the kernel: `|e(u) phi(u, z+tau) - phi(u, z)|`.
pub fn green_kronecker_residual(u: C64, z: C64, ctx: &EllipticContext) -> Result<f64> {
    Ok((e(u) * kronecker(u, z + ctx.tau, ctx)? - kronecker(u, z, ctx)?).norm())
}

/// `|-(E1(z+tau) - E1(z)) / (2 pi i) - 1|`.
pub fn green_e1_residual(z: C64, ctx: &EllipticContext) -> Result<f64> {
    let jump = eisenstein1(z + ctx.tau, ctx)? - eisenstein1(z, ctx)?;
    Ok((-jump / two_pi_i() - 1.0).norm())
}

/// `|e(u) g^(m)(u, z+tau) - g^(m)(u, z)|`.
pub fn green_twisted_residual(m: i64, u: C64, z: C64, r: u32, ctx: &EllipticContext) -> Result<f64> {
    Ok((e(u) * g_twisted(m, u, z + ctx.tau, r, ctx)? - g_twisted(m, u, z, r, ctx)?).norm())
}

/// `(1 / 2 pi i) \oint f` over the circle `|w - center| = radius` by the
/// trapezoidal rule with `points` nodes.
pub fn residue_numeric<F>(f: F, center: C64, radius: f64, points: usize) -> Result<C64>
where
    F: Fn(C64) -> C64,
{
    if points == 0 || !(radius > 0.0) {
        return Err(Error::InvalidConfig("quadrature needs points > 0 and radius > 0".into()));
    }
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..points {
        let offset = radius * (two_pi_i() * (k as f64 / points as f64)).exp();
        let value = f(center + offset);
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::NonFiniteSample(center + offset));
        }
        // dw = i * offset * dtheta, and the 1/(2 pi i) cancels against i * 2 pi / points
        acc += value * offset;
    }
    Ok(acc / points as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ctx(tau: C64) -> EllipticContext {
        EllipticContext::new(tau).unwrap()
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(matches!(EllipticContext::new(c(0.0, -1.0)), Err(Error::InvalidModulus(_))));
        assert!(EllipticContext::new(c(0.3, 0.0)).is_err());
    }

    #[test]
    fn truncation_bound_holds() {
        let k = ctx(c(0.1, 0.35));
        assert!(k.q().norm().powi(k.truncation_order() as i32) < k.tol() / 100.0);
    }

    #[test]
    fn theta_is_odd_and_vanishes_at_zero() {
        let k = ctx(c(0.0, 0.8));
        assert!(theta(c(0.0, 0.0), &k).norm() < 1e-16);
        let z = c(0.23, 0.11);
        assert!((theta(-z, &k) + theta(z, &k)).norm() < 1e-15);
    }

    #[test]
    fn theta_quasi_periodicity() {
        let k = ctx(c(0.2, 0.9));
        let z = c(0.31, -0.2);
        assert!((theta(z + 1.0, &k) + theta(z, &k)).norm() < 1e-13);
        let shifted = -e(-k.tau() / 2.0 - z) * theta(z, &k);
        assert!((theta(z + k.tau(), &k) - shifted).norm() < 1e-13);
    }

    #[test]
    fn singular_arguments_are_rejected() {
        let k = ctx(c(0.0, 1.0));
        assert!(matches!(eisenstein1(c(1.0, 1.0), &k), Err(Error::SingularArgument { .. })));
        assert!(kronecker(c(0.0, 0.0), c(0.2, 0.0), &k).is_err());
        assert!(kronecker(c(0.2, 0.1), c(0.0, 1.0) + 2.0, &k).is_err());
    }

    #[test]
    fn kronecker_is_symmetric() {
        let k = ctx(c(0.1, 0.8));
        let (u, z) = (c(0.17, 0.2), c(-0.3, 0.05));
        assert!((kronecker(u, z, &k).unwrap() - kronecker(z, u, &k).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn z_squared_e2_tends_to_one() {
        let k = ctx(c(0.0, 1.0));
        let z = c(1e-4, 1e-4);
        assert!((z * z * eisenstein2(z, &k).unwrap() - 1.0).norm() < 1e-7);
    }

    #[test]
    fn coincident_limit_matches_small_argument() {
        let k = ctx(c(0.1, 0.9));
        let z = c(1e-3, 0.0);
        let e1 = eisenstein1(z, &k).unwrap();
        let e2 = eisenstein2(z, &k).unwrap();
        let limit = half_e1_sq_minus_e2_at_zero(&k);
        assert!(((e1 * e1 - e2) / 2.0 - limit).norm() < 1e-5);
    }

    #[test]
    fn residue_of_simple_and_double_pole() {
        let a = c(0.3, -0.2);
        let simple = residue_numeric(|w| 1.0 / (w - a), a, 0.5, 32).unwrap();
        assert!((simple - 1.0).norm() < 1e-14);
        let double = residue_numeric(|w| 1.0 / ((w - a) * (w - a)), a, 0.5, 32).unwrap();
        assert!(double.norm() < 1e-14);
    }

    #[test]
    fn residue_reports_non_finite_samples() {
        let res = residue_numeric(|_| C64::new(f64::NAN, 0.0), c(0.0, 0.0), 0.1, 8);
        assert!(matches!(res, Err(Error::NonFiniteSample(_))));
        assert!(residue_numeric(|w| w, c(0.0, 0.0), 0.1, 0).is_err());
    }

    #[test]
    fn g_twisted_zero_is_kronecker() {
        let k = ctx(c(0.0, 0.7));
        let (u, z) = (c(0.21, 0.1), c(0.13, -0.04));
        let diff = g_twisted(0, u, z, 2, &k).unwrap() - kronecker(u, z, &k).unwrap();
        assert!(diff.norm() < 1e-15);
    }

    #[test]
    fn g_twisted_period_one_quasi_periodicity() {
        let k = ctx(c(0.05, 0.8));
        let (u, z) = (c(0.21, 0.1), c(0.13, -0.04));
        for r in [2u32, 3] {
            for m in 0..r as i64 {
                let lhs = g_twisted(m, u, z + 1.0, r, &k).unwrap();
                let rhs = e(c(m as f64 / r as f64, 0.0)) * g_twisted(m, u, z, r, &k).unwrap();
                assert!((lhs - rhs).norm() < 1e-12, "r={r} m={m}");
            }
        }
    }

    #[test]
    fn fay_antisymmetric_case_vanishes() {
        let k = ctx(c(0.0, 0.8));
        let u = c(0.2, 0.1);
        let (_, second) = fay_residual(u, u, c(0.33, -0.1), &k).unwrap();
        assert!(second < 1e-12);
    }
}
