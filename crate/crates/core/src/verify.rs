//! Verification suites: one report per module, with seeded sampling and
//! per-check tolerance overrides.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cm_system::{flow, flow_convergence_ratio, poisson, CMSystem, FlowResult, Observable, PhasePoint, PhaseSampler, SystemVariant};
use crate::elliptic::*;
use crate::error::{Error, Result};
use crate::kzb::{flatness_probe, KZBConfig};
use crate::lattice_charclass::{AlcoveReducer, ReductionFlavor};
use crate::lie_twist::{build_outer, build_root_system, build_twisted_algebra, CMat, Family, TwistedLieAlgebra, Variant};
use crate::rational;
use crate::report::{substream, ReportEntry, VerificationReport};
use crate::rmatrix;
use crate::table2::table2_row;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Elliptic,
    Lie,
    Lattice,
    Cm,
    Rmatrix,
    Kzb,
    All,
}

impl Suite {
    const MODULES: [Suite; 6] = [Suite::Elliptic, Suite::Lie, Suite::Lattice, Suite::Cm, Suite::Rmatrix, Suite::Kzb];

    fn default_samples(self) -> usize {
        match self {
            Suite::Elliptic => 100,
            Suite::Lie => 50,
            Suite::Lattice => 20,
            Suite::Cm => 10,
            Suite::Rmatrix => 20,
            Suite::Kzb => 3,
            Suite::All => 0,
        }
    }

    fn needs_matrices(self) -> bool {
        matches!(self, Suite::Cm | Suite::Rmatrix | Suite::Kzb)
    }
}

/// Algebra label such as `A3`, `D5` or `E6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraSpec {
    pub family: Family,
    pub rank: usize,
}

impl FromStr for AlgebraSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("algebra '{s}' is not of the form A3, D5 or E6"));
        let (head, tail) = s.split_at_checked(1).ok_or_else(bad)?;
        let family = match head.to_ascii_uppercase().as_str() {
            "A" => Family::A,
            "D" => Family::D,
            "E" => Family::E6,
            _ => return Err(bad()),
        };
        let rank = tail.parse::<usize>().map_err(|_| bad())?;
        if family == Family::E6 && rank != 6 {
            return Err(Error::UnsupportedAlgebra { family: "E".into(), rank });
        }
        Ok(Self { family, rank })
    }
}

impl std::fmt::Display for AlgebraSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.family, self.rank)
    }
}

/// Parses `re+imi`, `re-imi`, `imi` or `re`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let bad = || Error::InvalidConfig(format!("'{s}' is not a complex number of the form re+imi"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent or the leading sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        x => x,
    };
    Ok(C64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?))
}

/// Tolerance override for one check, or for every check when `check` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceOverride {
    pub check: Option<String>,
    pub tolerance: f64,
}

impl FromStr for ToleranceOverride {
    type Err = Error;

    /// `1e-8` or `cm.flow_energy_drift=1e-8`.
    fn from_str(s: &str) -> Result<Self> {
        let (check, value) = match s.split_once('=') {
            Some((c, v)) => (Some(c.trim().to_string()), v),
            None => (None, s),
        };
        let tolerance: f64 = value.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad tolerance '{s}'")))?;
        if !(tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got '{s}'")));
        }
        Ok(Self { check, tolerance })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub algebra: AlgebraSpec,
    pub order: u32,
    pub variant: SystemVariant,
    pub tau: C64,
    pub seed: u64,
    /// Per-suite default when absent.
    pub samples: Option<usize>,
    /// Number of marked points for the KZB probe.
    pub points: usize,
    pub fd_step: f64,
    pub tolerances: Vec<ToleranceOverride>,
    /// Record per-check wall time; reports are otherwise byte-identical for
    /// identical configurations.
    pub timed: bool,
}

impl SuiteConfig {
    pub fn new(suite: Suite, algebra: AlgebraSpec) -> Self {
        Self {
            suite,
            algebra,
            order: 2,
            variant: SystemVariant::Vector,
            tau: C64::new(0.0, 0.9),
            seed: 0,
            samples: None,
            points: 2,
            fd_step: 1e-4,
            tolerances: Vec::new(),
            timed: false,
        }
    }

    fn samples_for(&self, suite: Suite) -> usize {
        self.samples.unwrap_or_else(|| suite.default_samples()).max(1)
    }

    fn basis(&self) -> Variant {
        if self.variant == SystemVariant::Sl2nLambda {
            Variant::Sl2nLambda
        } else {
            Variant::Diagram
        }
    }

    fn validate(&self) -> Result<()> {
        let AlgebraSpec { family, rank } = self.algebra;
        let rs = build_root_system(family, rank)?;
        build_outer(&rs, self.order)?;
        if crate::table2::expected_row(family, rank, self.order).is_none() {
            return Err(Error::UnsupportedOrder { family: family.to_string(), rank, order: self.order });
        }
        EllipticContext::new(self.tau)?;
        if self.points == 0 {
            return Err(Error::InvalidConfig("at least one marked point is needed".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        if self.samples == Some(0) {
            return Err(Error::InvalidConfig("samples must be positive".into()));
        }
        Ok(())
    }

    fn algebra(&self) -> Result<TwistedLieAlgebra> {
        build_twisted_algebra(self.algebra.family, self.algebra.rank, self.order, self.basis())
    }

    fn system(&self) -> Result<CMSystem> {
        CMSystem::new(self.algebra()?, self.tau, self.variant)
    }

    /// Suites that a configuration can run. `all` leaves out matrix suites
    /// for lattice-only algebras and the KZB probe outside the vector
    /// representation of a diagram twist.
    fn suites(&self) -> Result<Vec<Suite>> {
        if self.suite != Suite::All {
            return Ok(vec![self.suite]);
        }
        let matrices = self.algebra().is_ok();
        Ok(Suite::MODULES
            .into_iter()
            .filter(|s| matrices || !s.needs_matrices())
            .filter(|s| *s != Suite::Kzb || self.variant == SystemVariant::Vector)
            .collect())
    }
}

/// Runs the configured suite. Configuration problems, including an algebra
/// without a matrix realization for a matrix suite, are errors; failed
/// checks are reported in the entries.
pub fn run_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let mut report = VerificationReport::new();
    for suite in cfg.suites()? {
        let part = match suite {
            Suite::Elliptic => elliptic_suite(cfg),
            Suite::Lie => lie_suite(cfg)?,
            Suite::Lattice => lattice_suite(cfg)?,
            Suite::Cm => cm_suite(cfg)?,
            Suite::Rmatrix => rmatrix_suite(cfg)?,
            Suite::Kzb => kzb_suite(cfg)?,
            Suite::All => unreachable!("expanded by suites()"),
        };
        report.extend(part);
    }
    apply_overrides(&mut report, &cfg.tolerances);
    report.sort();
    report.config_echo = serde_json::to_value(cfg).expect("config serializes");
    Ok(report)
}

fn apply_overrides(report: &mut VerificationReport, overrides: &[ToleranceOverride]) {
    for e in &mut report.entries {
        let chosen = overrides
            .iter()
            .rev()
            .find(|o| o.check.as_deref() == Some(e.check_name.as_str()))
            .or_else(|| overrides.iter().rev().find(|o| o.check.is_none()));
        if let Some(o) = chosen {
            e.tolerance = o.tolerance;
            e.passed = e.residual < o.tolerance;
        }
    }
}

/// Runs `check` for each sample and keeps the largest residual; an error
/// makes the whole entry fail.
fn worst<F>(samples: usize, mut check: F) -> f64
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut out = 0.0f64;
    for k in 0..samples {
        match check(k) {
            Ok(r) if r.is_finite() => out = out.max(r),
            _ => return f64::INFINITY,
        }
    }
    out
}

fn timed_entry(report: &mut VerificationReport, timed: bool, entry: impl FnOnce() -> ReportEntry) {
    report.run(timed, entry);
}

// ---------------------------------------------------------------- elliptic

const ELLIPTIC_TOL: f64 = 1e-9;
/// `|q| <= 0.12` for every sampled modulus.
const MIN_IM_TAU: f64 = 0.34;

struct EllipticSample {
    ctx: EllipticContext,
    u1: C64,
    u2: C64,
    z: C64,
}

fn elliptic_sample<R: Rng>(rng: &mut R) -> EllipticSample {
    let tau = C64::new(rng.random_range(-0.5..0.5), rng.random_range(MIN_IM_TAU..1.2));
    let ctx = EllipticContext::new(tau).expect("upper half plane");
    loop {
        let mut point = || C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.45..0.45) * tau.im);
        let (u1, u2, z) = (point(), point(), point());
        if [u1, u2, z, u1 + u2, u1 - u2].iter().all(|&w| ctx.lattice_distance(w) > 0.1) {
            return EllipticSample { ctx, u1, u2, z };
        }
    }
}

fn elliptic_suite(cfg: &SuiteConfig) -> VerificationReport {
    let n = cfg.samples_for(Suite::Elliptic);
    let seed = cfg.seed;
    let order = cfg.order;
    let mut report = VerificationReport::new();
    // all checks see the same samples
    let samples: Vec<EllipticSample> = {
        let mut rng = substream(seed, 100);
        (0..n).map(|_| elliptic_sample(&mut rng)).collect()
    };
    let entry = |name: &str, anchor: &str, residual: f64| {
        ReportEntry::new(format!("elliptic.{name}"), anchor, residual, ELLIPTIC_TOL).with_samples(n as u64, seed)
    };
    let s = &samples;
    timed_entry(&mut report, cfg.timed, || {
        entry("fay_quadratic", "phi(u,z) phi(-u,z) = E2(z) - E2(u)", worst(n, |k| Ok(fay_residual(s[k].u1, s[k].u2, s[k].z, &s[k].ctx)?.0)))
    });
    timed_entry(&mut report, cfg.timed, || {
        entry(
            "fay_derivative",
            "phi(u1,z) phi'(u2,z) - phi(u2,z) phi'(u1,z) = (E2(u1) - E2(u2)) phi(u1+u2,z)",
            worst(n, |k| Ok(fay_residual(s[k].u1, s[k].u2, s[k].z, &s[k].ctx)?.1)),
        )
    });
    timed_entry(&mut report, cfg.timed, || {
        entry("green_kronecker", "e(u) phi(u, z+tau) = phi(u, z)", worst(n, |k| green_kronecker_residual(s[k].u1, s[k].z, &s[k].ctx)))
    });
    timed_entry(&mut report, cfg.timed, || {
        entry("green_e1", "E1(z+tau) = E1(z) - 2 pi i", worst(n, |k| green_e1_residual(s[k].z, &s[k].ctx)))
    });
    timed_entry(&mut report, cfg.timed, || {
        entry(
            "green_twisted",
            "e(u) g^(m)(u, z+tau) = g^(m)(u, z)",
            worst(n, |k| {
                (0..order as i64).try_fold(0.0f64, |acc, m| Ok(acc.max(green_twisted_residual(m, s[k].u1, s[k].z, order, &s[k].ctx)?)))
            }),
        )
    });
    let zero = C64::new(0.0, 0.0);
    timed_entry(&mut report, cfg.timed, || {
        entry(
            "residue_kronecker",
            "Res_{z=0} phi(u, z) = 1",
            worst(n, |k| {
                let ctx = &s[k].ctx;
                let res = residue_numeric(|w| kronecker(s[k].u1, w, ctx).unwrap_or(C64::new(f64::NAN, 0.0)), zero, 0.05, 64)?;
                Ok((res - 1.0).norm())
            }),
        )
    });
    timed_entry(&mut report, cfg.timed, || {
        entry(
            "residue_e1",
            "Res_{z=0} E1(z) = 1",
            worst(n, |k| {
                let ctx = &s[k].ctx;
                let res = residue_numeric(|w| eisenstein1(w, ctx).unwrap_or(C64::new(f64::NAN, 0.0)), zero, 0.05, 64)?;
                Ok((res - 1.0).norm())
            }),
        )
    });
    timed_entry(&mut report, cfg.timed, || {
        entry(
            "residue_twisted",
            "Res_{z=0} g^(m)(u, z) = 1",
            worst(n, |k| {
                let ctx = &s[k].ctx;
                (0..order as i64).try_fold(0.0f64, |acc, m| {
                    let f = |w| g_twisted(m, s[k].u1, w, order, ctx).unwrap_or(C64::new(f64::NAN, 0.0));
                    Ok(acc.max((residue_numeric(f, zero, 0.05, 64)? - 1.0).norm()))
                })
            }),
        )
    });
    timed_entry(&mut report, cfg.timed, || {
        entry(
            "e2_derivative",
            "E2 = -E1'",
            worst(n, |k| {
                let (ctx, z) = (&s[k].ctx, s[k].z);
                // Cauchy: E1'(z) = Res_{w=z} E1(w) / (w - z)^2
                let f = |w: C64| eisenstein1(w, ctx).map(|v| v / ((w - z) * (w - z))).unwrap_or(C64::new(f64::NAN, 0.0));
                let derivative = residue_numeric(f, z, 0.05, 64)?;
                let e2 = eisenstein2(z, ctx)?;
                Ok((derivative + e2).norm() / e2.norm().max(1.0))
            }),
        )
    });
    timed_entry(&mut report, cfg.timed, || {
        entry(
            "wp_minus_e2_constant",
            "wp(z) - E2(z) is independent of z",
            worst(n, |k| {
                let ctx = &s[k].ctx;
                let d1 = weierstrass_p(s[k].z, ctx)? - eisenstein2(s[k].z, ctx)?;
                let d2 = weierstrass_p(s[k].u1, ctx)? - eisenstein2(s[k].u1, ctx)?;
                Ok((d1 - d2).norm() / d1.norm().max(1.0))
            }),
        )
    });
    report
}

// --------------------------------------------------------------------- lie

const LIE_TOL: f64 = 1e-12;

fn random_traceless<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let mut x = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let shift = x.trace() / n as f64;
    for k in 0..n {
        x[(k, k)] -= shift;
    }
    x
}

fn max_abs(x: &CMat) -> f64 {
    x.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn lie_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let (seed, samples) = (cfg.seed, cfg.samples_for(Suite::Lie));
    let mut report = VerificationReport::new();
    let tla = match cfg.algebra() {
        Ok(t) => t,
        Err(Error::MatrixRealizationUnavailable(_)) => return root_level_suite(cfg),
        Err(e) => return Err(e),
    };
    let entry = |name: &str, anchor: &str, residual: f64| ReportEntry::new(format!("lie.{name}"), anchor, residual, LIE_TOL);
    timed_entry(&mut report, cfg.timed, || entry("closure", "[T_a, T_b] stays in the basis span", tla.closure_residual()));
    timed_entry(&mut report, cfg.timed, || entry("grading", "[g_k, g_m] in g_{k+m}", tla.grading_residual()));
    timed_entry(&mut report, cfg.timed, || entry("eigen", "nu(T_a) = omega^{m_a} T_a", tla.eigen_residual()));
    timed_entry(&mut report, cfg.timed, || entry("gram", "(T_a, T_b) matches the tabulated norms", tla.gram_residual()));
    let n = tla.n();
    let order = tla.order();
    timed_entry(&mut report, cfg.timed, || {
        let mut rng = substream(seed, 200);
        let residual = worst(samples, |_| {
            let (x, y) = (random_traceless(n, &mut rng), random_traceless(n, &mut rng));
            let xy = &x * &y - &y * &x;
            let (nx, ny) = (tla.nu_apply(&x), tla.nu_apply(&y));
            Ok(max_abs(&(tla.nu_apply(&xy) - (&nx * &ny - &ny * &nx))) / max_abs(&xy).max(1.0))
        });
        entry("automorphism", "nu([X, Y]) = [nu X, nu Y]", residual).with_samples(samples as u64, seed)
    });
    timed_entry(&mut report, cfg.timed, || {
        let mut rng = substream(seed, 201);
        let residual = worst(samples, |_| {
            let x = random_traceless(n, &mut rng);
            let power = (0..order).fold(x.clone(), |acc, _| tla.nu_apply(&acc));
            Ok(max_abs(&(power - &x)) / max_abs(&x).max(1.0))
        });
        entry("nu_order", "nu^r = Id", residual).with_samples(samples as u64, seed)
    });
    Ok(report)
}

/// Root-level structure for algebras that only have lattice data.
fn root_level_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let rs = build_root_system(cfg.algebra.family, cfg.algebra.rank)?;
    let nu = build_outer(&rs, cfg.order)?;
    let mut report = VerificationReport::new();
    let count = |bad: usize| bad as f64;
    timed_entry(&mut report, cfg.timed, || {
        ReportEntry::new("lie.root_duality", "simple roots pair with fundamental weights to the identity", count(usize::from(!rs.duality_holds())), 0.5)
    });
    timed_entry(&mut report, cfg.timed, || {
        let bad = rs.roots.iter().filter(|r| !rs.roots.contains(&nu.apply(r))).count();
        ReportEntry::new("lie.nu_permutes_roots", "nu maps roots to roots", count(bad), 0.5)
    });
    timed_entry(&mut report, cfg.timed, || {
        let bad = rs.roots.iter().filter(|a| rs.roots.iter().any(|b| rs.pair(&nu.apply(a), &nu.apply(b)) != rs.pair(a, b))).count();
        ReportEntry::new("lie.nu_isometry", "(nu a, nu b) = (a, b)", count(bad), 0.5)
    });
    timed_entry(&mut report, cfg.timed, || {
        ReportEntry::new("lie.nu_order", "nu^r = Id", count(usize::from(!nu.is_identity_power())), 0.5)
    });
    Ok(report)
}

// ----------------------------------------------------------------- lattice

fn lattice_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let AlgebraSpec { family, rank } = cfg.algebra;
    let (seed, samples) = (cfg.seed, cfg.samples_for(Suite::Lattice));
    let row = table2_row(family, rank, cfg.order)?;
    let mut report = VerificationReport::new();
    let (e, c) = (&row.expected, &row.computed);
    let mismatch = |a: bool| f64::from(u8::from(!a));
    // exact comparisons: a residual of 0 passes, any mismatch gives 1
    let exact = |name: &str, anchor: &str, ok: bool| ReportEntry::new(format!("lattice.{name}"), anchor, mismatch(ok), 0.5);
    report.push(exact("invariant_subalgebra", "invariant subalgebra of the twist", e.invariant_subalgebra == c.invariant_subalgebra));
    report.push(exact("twisted_group", "P^Y / Q^Y", e.twisted == c.twisted));
    report.push(exact("center", "P / Q", e.center == c.center));
    report.push(exact("weight_generators", "fundamental weights generating P^Y / Q^Y", e.weight_generators == c.weight_generators));
    report.push(exact("coweight_quotient", "invariant coweights modulo invariant coroots", e.coweight_quotient == c.coweight_quotient));

    let rs = build_root_system(family, rank)?;
    let nu = build_outer(&rs, cfg.order)?;
    let mut reducers = vec![
        ("coweight", AlcoveReducer::new(&rs, &nu, ReductionFlavor::Coweight)?),
        ("coroot", AlcoveReducer::new(&rs, &nu, ReductionFlavor::Coroot)?),
    ];
    if cfg.variant == SystemVariant::Sl2nLambda && family == Family::A && rank % 2 == 1 {
        reducers.push(("lambda", AlcoveReducer::sl2n_lambda(rank.div_ceil(2) / 2)?));
    }
    let tau = cfg.tau;
    for (k, (flavor, reducer)) in reducers.iter().enumerate() {
        if reducer.dim() == 0 {
            continue;
        }
        let close = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let dim = reducer.dim();
        let point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<C64> {
            (0..dim).map(|_| C64::new(rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0))).collect()
        };
        timed_entry(&mut report, cfg.timed, || {
            let mut rng = substream(seed, 300 + k as u64);
            let residual = worst(samples, |_| {
                let once = reducer.reduce(&point(&mut rng), tau)?;
                let twice = reducer.reduce(&once.reduced, tau)?;
                let moved = if twice.transcript.is_empty() { 0.0 } else { 1.0 };
                Ok(close(&twice.reduced, &once.reduced).max(moved))
            });
            ReportEntry::new(format!("lattice.bs_fixed_points_{flavor}"), "reduced points are fixed by the reduction", residual, 1e-12)
                .with_samples(samples as u64, seed)
        });
        timed_entry(&mut report, cfg.timed, || {
            let mut rng = substream(seed, 310 + k as u64);
            let residual = worst(samples, |_| {
                let u = point(&mut rng);
                let g1: Vec<i64> = (0..dim).map(|_| rng.random_range(-3..=3)).collect();
                let g2: Vec<i64> = (0..dim).map(|_| rng.random_range(-3..=3)).collect();
                let (s1, s2) = (reducer.lattice_vector(&g1), reducer.lattice_vector(&g2));
                let shifted: Vec<C64> = u.iter().zip(s1.iter().zip(&s2)).map(|(z, (a, b))| z + a + tau * b).collect();
                Ok(close(&reducer.reduce(&u, tau)?.reduced, &reducer.reduce(&shifted, tau)?.reduced))
            });
            ReportEntry::new(format!("lattice.bs_shift_invariance_{flavor}"), "lattice shifts do not change the reduction", residual, 1e-11)
                .with_samples(samples as u64, seed)
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------- cm

const LAX_TOL: f64 = 1e-9;
const HAMILTONIAN_TOL: f64 = 1e-8;
const INVOLUTION_TOL: f64 = 1e-7;
const DRIFT_TOL: f64 = 1e-8;
const BS_TOL: f64 = 1e-9;

/// Closest approach to the resonant set that a flow start may make.
const FLOW_CLEARANCE: f64 = 0.15;
const FLOW_ATTEMPTS: u64 = 10;

/// Start point and 1000-step trajectory for the conservation checks. RK4
/// error grows sharply near resonant positions, so starts whose trajectory
/// comes within [`FLOW_CLEARANCE`] of one are skipped; if none of the
/// attempts clears it, the one with the widest clearance is used. Real
/// positions come first; high-rank systems have no real positions that far
/// from every root and fall back to slower, complex ones.
pub fn flow_start(sys: &CMSystem, seed: u64) -> Result<(PhasePoint, FlowResult)> {
    let samplers = [
        PhaseSampler { spin_scale: 0.05, momentum_scale: 0.2, min_resonance: 0.05, real_position: true, constrained: true },
        PhaseSampler { spin_scale: 0.02, momentum_scale: 0.1, min_resonance: 0.05, real_position: false, constrained: true },
    ];
    let mut best: Option<(f64, PhasePoint, FlowResult)> = None;
    for (k, sampler) in samplers.iter().enumerate() {
        for attempt in 0..FLOW_ATTEMPTS {
            let mut rng = substream(seed, 403 + 1000 * (k as u64 * FLOW_ATTEMPTS + attempt));
            let Ok(start) = sys.sample_phase(&mut rng, sampler) else { continue };
            let Ok(out) = flow(sys, &start, 1e-3, 1000) else { continue };
            let clearance = out.trajectory.iter().map(|q| sys.resonance_distance(&q.u)).fold(f64::INFINITY, f64::min);
            if clearance >= FLOW_CLEARANCE {
                return Ok((start, out));
            }
            if best.as_ref().is_none_or(|b| clearance > b.0) {
                best = Some((clearance, start, out));
            }
        }
    }
    best.map(|(_, p, out)| (p, out)).ok_or_else(|| Error::InvalidConfig("no flow start point found".into()))
}

fn spectral_points(sys: &CMSystem, seed: u64, stream: u64, count: usize) -> Vec<C64> {
    let mut rng = substream(seed, stream);
    (0..count).map(|_| sys.random_spectral_point(&mut rng)).collect()
}

fn shifted(p: &PhasePoint, real: &[f64], imag: &[f64], tau: C64) -> PhasePoint {
    let mut out = p.clone();
    for (k, x) in out.u.iter_mut().enumerate() {
        *x += real[k] + tau * imag[k];
    }
    out
}

type ShiftBasis = Vec<Vec<f64>>;

/// Lattice generators of each shift flavor, in the Cartan coordinates of `u`.
fn shift_lattices(sys: &CMSystem) -> Result<Vec<(&'static str, ShiftBasis)>> {
    let tla = sys.tla();
    if sys.variant() == SystemVariant::Sl2nLambda {
        // Lambda-commuting lattice: d_k = sum_{k' <= k} (e_{k'} - e_{n+1-k'} + e_{n+k'} - e_{2n+1-k'})
        let n = tla.n() / 2;
        let shifts = (1..=n / 2)
            .map(|k| {
                let mut d = vec![0.0; 2 * n];
                for kp in 1..=k {
                    d[kp - 1] += 1.0;
                    d[n - kp] -= 1.0;
                    d[n + kp - 1] += 1.0;
                    d[2 * n - kp] -= 1.0;
                }
                tla.matrix_to_cartan(&tla.diag_embed(&d))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(vec![("lambda", shifts)]);
    }
    let mut out = Vec::new();
    for (name, flavor) in [("coweight", ReductionFlavor::Coweight), ("coroot", ReductionFlavor::Coroot)] {
        let reducer = AlcoveReducer::new(&tla.root_system, &tla.nu, flavor)?;
        let axes = reducer.axes().ok_or_else(|| Error::InvalidConfig("reducer has no ambient axes".into()))?.to_vec();
        let shifts = reducer
            .lattice()
            .basis()
            .iter()
            .map(|coords| {
                let ambient = coords
                    .iter()
                    .zip(&axes)
                    .fold(rational::zeros(axes[0].len()), |acc, (c, ax)| rational::add(&acc, &rational::scale(*c, ax)));
                tla.ambient_to_cartan(&ambient)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((name, shifts));
    }
    Ok(out)
}

fn cm_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let sys = cfg.system()?;
    let (seed, samples) = (cfg.seed, cfg.samples_for(Suite::Cm));
    let phases: Vec<PhasePoint> = {
        let mut rng = substream(seed, 400);
        (0..samples).map(|_| sys.random_phase(&mut rng, true, 0.5)).collect()
    };
    let mut report = VerificationReport::new();
    let with = |e: ReportEntry| e.with_samples(samples as u64, seed);

    // the three conditions fixing L, worst over phases
    timed_entry(&mut report, cfg.timed, || {
        let mut merged: Vec<ReportEntry> = Vec::new();
        for (k, p) in phases.iter().enumerate() {
            for e in sys.verify_lax_conditions(p, 10, seed.wrapping_add(k as u64)).entries {
                match merged.iter_mut().find(|m| m.check_name == e.check_name) {
                    Some(m) => m.residual = m.residual.max(e.residual),
                    None => merged.push(e),
                }
            }
        }
        let residual = merged.iter().map(|e| e.residual).fold(0.0, f64::max);
        let anchor = merged.iter().map(|e| e.anchor.as_str()).collect::<Vec<_>>().join("; ");
        with(ReportEntry::new("cm.lax_conditions", anchor, residual, LAX_TOL))
    });

    timed_entry(&mut report, cfg.timed, || {
        let residual = worst(samples, |k| Ok(sys.hamiltonian_spectral(&phases[k], &spectral_points(&sys, seed, 401 + k as u64, 4))?.1));
        with(ReportEntry::new("cm.hamiltonian_spread", "1/2 (L(z), L(z)) - E2(z) C2 is independent of z", residual, HAMILTONIAN_TOL))
    });
    timed_entry(&mut report, cfg.timed, || {
        let residual = worst(samples, |k| {
            let (mean, _) = sys.hamiltonian_spectral(&phases[k], &spectral_points(&sys, seed, 401 + k as u64, 4))?;
            Ok((mean - sys.hamiltonian_closed(&phases[k])?).norm())
        });
        with(ReportEntry::new("cm.hamiltonian_agreement", "closed-form H equals the spectral value", residual, HAMILTONIAN_TOL))
    });
    timed_entry(&mut report, cfg.timed, || {
        let mut rng = substream(seed, 402);
        let residual = worst(samples, |k| {
            let z0 = sys.random_spectral_point(&mut rng);
            Ok(poisson(&sys, &Observable::Hamiltonian, &Observable::TraceLaxPower { z: z0, power: 2 }, &phases[k])?.norm())
        });
        with(ReportEntry::new("cm.involution", "{H, tr L(z0)^2} = 0", residual, INVOLUTION_TOL))
    });

    // one trajectory: 1000 RK4 steps at dt = 1e-3
    let (start, trajectory) = flow_start(&sys, seed)?;
    timed_entry(&mut report, cfg.timed, || {
        ReportEntry::new("cm.flow_energy_drift", "|H(t) - H(0)| / |H(0)| over 1000 steps", trajectory.energy_drift, DRIFT_TOL).with_samples(1, seed)
    });
    timed_entry(&mut report, cfg.timed, || {
        ReportEntry::new("cm.flow_trace_drift", "tr L(z0)^2 is conserved over 1000 steps", trajectory.trace_drift, DRIFT_TOL).with_samples(1, seed)
    });
    timed_entry(&mut report, cfg.timed, || {
        let ratio = flow_convergence_ratio(&sys, &start, 0.02, 25).unwrap_or(f64::INFINITY);
        ReportEntry::new("cm.flow_fourth_order", "halving dt divides the error by 16", (ratio / 16.0 - 1.0).abs(), 0.25).with_samples(1, seed)
    });

    // moduli invariance under the lattice shifts of each flavor
    let tau = sys.tau();
    for (name, shifts) in shift_lattices(&sys)? {
        timed_entry(&mut report, cfg.timed, || {
            let residual = worst(samples, |k| {
                let p = &phases[k];
                let h = sys.hamiltonian_closed(p)?;
                let mut out = 0.0f64;
                for (i, g1) in shifts.iter().enumerate() {
                    let g2 = &shifts[(i + 1) % shifts.len()];
                    for (a, b) in [(1.0, 0.0), (0.0, 1.0), (1.0, -2.0)] {
                        let real: Vec<f64> = g1.iter().map(|x| x * a).collect();
                        let imag: Vec<f64> = g2.iter().map(|x| x * b).collect();
                        out = out.max((sys.hamiltonian_closed(&shifted(p, &real, &imag, tau))? - h).norm());
                    }
                }
                Ok(out)
            });
            with(ReportEntry::new(format!("cm.bs_invariance_{name}"), "H(u + g1 + tau g2) = H(u)", residual, BS_TOL))
        });
    }
    Ok(report)
}

// ----------------------------------------------------------------- rmatrix

fn rmatrix_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let sys = cfg.system()?;
    // the r-matrix checks share their samples, so the sweep is timed as a whole
    let start = std::time::Instant::now();
    let mut report = rmatrix::verify(&sys, cfg.samples_for(Suite::Rmatrix), cfg.seed);
    if cfg.timed {
        let per = start.elapsed().as_secs_f64() * 1e3 / report.entries.len().max(1) as f64;
        report.entries.iter_mut().for_each(|e| e.wall_time_ms = Some(per));
    }
    Ok(report)
}

// --------------------------------------------------------------------- kzb

/// Seeded marked points summing to zero and a nonresonant `u`, all at
/// lattice distance at least 0.1 from the singular set.
pub fn kzb_config(sys: CMSystem, points: usize, fd_step: f64, seed: u64) -> Result<KZBConfig> {
    let mut rng = substream(seed, 500);
    let tau = sys.tau();
    for _ in 0..1000 {
        let mut positions: Vec<C64> =
            (0..points - 1).map(|_| C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2) * tau.im)).collect();
        positions.push(-positions.iter().sum::<C64>());
        let u: Vec<C64> = (0..sys.rank()).map(|_| C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.05..0.05))).collect();
        let separated = positions
            .iter()
            .enumerate()
            .all(|(i, a)| positions[i + 1..].iter().all(|c| sys.ctx().lattice_distance(a - c) > 0.1));
        if separated && sys.resonance_distance(&u) > 0.1 {
            return KZBConfig::new(sys, positions, u, fd_step);
        }
    }
    Err(Error::InvalidConfig(format!("no admissible placement of {points} marked points found")))
}

fn kzb_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let sys = cfg.system()?;
    let kzb = kzb_config(sys, cfg.points, cfg.fd_step, cfg.seed)?;
    let trials = cfg.samples_for(Suite::Kzb);
    let start = std::time::Instant::now();
    let mut report = flatness_probe(&kzb, trials, cfg.seed);
    if cfg.timed {
        let per = start.elapsed().as_secs_f64() * 1e3 / report.entries.len().max(1) as f64;
        report.entries.iter_mut().for_each(|e| e.wall_time_ms = Some(per));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(suite: Suite, algebra: &str) -> SuiteConfig {
        SuiteConfig { samples: Some(3), ..SuiteConfig::new(suite, algebra.parse().unwrap()) }
    }

    #[test]
    fn parses_complex_numbers() {
        assert_eq!(parse_complex("0+0.9i").unwrap(), C64::new(0.0, 0.9));
        assert_eq!(parse_complex("0.1-0.8i").unwrap(), C64::new(0.1, -0.8));
        assert_eq!(parse_complex("-0.1 + 1e-1i").unwrap(), C64::new(-0.1, 0.1));
        assert_eq!(parse_complex("1.5e-1-2E+0i").unwrap(), C64::new(0.15, -2.0));
        assert_eq!(parse_complex("0.9i").unwrap(), C64::new(0.0, 0.9));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("2").unwrap(), C64::new(2.0, 0.0));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("1+2j").is_err());
    }

    #[test]
    fn parses_algebras_and_tolerances() {
        assert_eq!("D5".parse::<AlgebraSpec>().unwrap(), AlgebraSpec { family: Family::D, rank: 5 });
        assert_eq!("e6".parse::<AlgebraSpec>().unwrap().family, Family::E6);
        assert!("E7".parse::<AlgebraSpec>().is_err());
        assert!("B3".parse::<AlgebraSpec>().is_err());
        assert!("A".parse::<AlgebraSpec>().is_err());
        let t: ToleranceOverride = "cm.involution=1e-3".parse().unwrap();
        assert_eq!(t.check.as_deref(), Some("cm.involution"));
        assert_eq!("1e-3".parse::<ToleranceOverride>().unwrap().check, None);
        assert!("x=-1".parse::<ToleranceOverride>().is_err());
    }

    #[test]
    fn lattice_suite_passes_for_triality() {
        let cfg = SuiteConfig { order: 3, ..config(Suite::Lattice, "D4") };
        let report = run_suite(&cfg).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
        assert!(report.get("lattice.twisted_group").is_some());
    }

    #[test]
    fn matrix_suites_refuse_lattice_only_algebras() {
        assert!(matches!(run_suite(&config(Suite::Cm, "E6")), Err(Error::MatrixRealizationUnavailable(_))));
        let report = run_suite(&config(Suite::Lie, "E6")).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
        assert!(report.get("lie.nu_permutes_roots").is_some());
    }

    #[test]
    fn bad_configurations_are_errors() {
        assert!(run_suite(&SuiteConfig { order: 3, ..config(Suite::Lattice, "A3") }).is_err());
        assert!(run_suite(&SuiteConfig { tau: C64::new(0.0, -1.0), ..config(Suite::Elliptic, "A2") }).is_err());
        assert!(run_suite(&SuiteConfig { samples: Some(0), ..config(Suite::Elliptic, "A2") }).is_err());
        assert!(run_suite(&config(Suite::Lattice, "A1")).is_err());
    }

    #[test]
    fn overrides_are_applied_and_echoed() {
        let mut cfg = config(Suite::Lie, "A3");
        cfg.tolerances = vec!["1e-300".parse().unwrap(), "lie.closure=1".parse().unwrap()];
        let report = run_suite(&cfg).unwrap();
        assert_eq!(report.get("lie.closure").unwrap().tolerance, 1.0);
        assert_eq!(report.get("lie.gram").unwrap().tolerance, 1e-300);
        assert_eq!(report.config_echo["tolerances"][1]["check"], "lie.closure");
    }

    #[test]
    fn reports_are_sorted_and_deterministic() {
        let cfg = config(Suite::Elliptic, "A2");
        let a = run_suite(&cfg).unwrap();
        assert!(a.entries.windows(2).all(|w| w[0].check_name <= w[1].check_name));
        assert_eq!(a.to_json(), run_suite(&cfg).unwrap().to_json());
        assert!(a.entries.iter().all(|e| e.wall_time_ms.is_none()));
        let timed = run_suite(&SuiteConfig { timed: true, ..cfg }).unwrap();
        assert!(timed.entries.iter().all(|e| e.wall_time_ms.is_some()));
    }

    #[test]
    fn all_skips_matrix_suites_for_e6() {
        let report = run_suite(&config(Suite::All, "E6")).unwrap();
        assert!(report.entries.iter().all(|e| !e.check_name.starts_with("cm.")));
        assert!(report.get("lattice.center").is_some());
    }
}
