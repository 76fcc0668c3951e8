//! KZB connection on `l` marked points with values in `V^{(x) l}`.
//!
//! Marked points are additive coordinates `z_a` (`t_a = e(z_a)`), so the
//! product constraint reads `sum z_a = 0 mod 1`. Sections are functions of
//! `(z_1, .., z_l, tau, u)`.

use nalgebra::DVector;
use rand::Rng;

use crate::cm_system::{CMSystem, SystemVariant};
use crate::elliptic::{eisenstein1, eisenstein2, half_e1_sq_minus_e2_at_zero, twisted_kernel_dw, C64};
use crate::error::{Error, Result};
use crate::lie_twist::{CMat, GeneratorKind};
use crate::report::{substream, ReportEntry, VerificationReport};
use crate::rmatrix::{dual_generators, r_eval};

pub type CVec = DVector<C64>;

const TWO_PI_I: C64 = C64::new(0.0, 2.0 * std::f64::consts::PI);
const SECTION_DEGREE: u32 = 3;
const ROUNDOFF_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KZBConfig {
    pub sys: CMSystem,
    /// Additive marked points `z_a`.
    pub positions: Vec<C64>,
    pub u: Vec<C64>,
    pub fd_step: f64,
    /// Negative control: flips the sign of every `f^{ac}`, `a != c`.
    pub flip_f_sign: bool,
}

/// A point `(z, tau, u)` of the base.
#[derive(Debug, Clone, PartialEq)]
pub struct KzbPoint {
    pub z: Vec<C64>,
    pub tau: C64,
    pub u: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nabla {
    Point(usize),
    Tau,
}

/// `r^{ac}` and `f^{ac}` embedded in `V^{(x) l}`.
#[derive(Debug, Clone)]
pub struct KzbCoefficients {
    pub r: CMat,
    pub f: CMat,
}

impl KzbPoint {
    fn coords(&self) -> Vec<C64> {
        self.z.iter().copied().chain(std::iter::once(self.tau)).chain(self.u.iter().copied()).collect()
    }

    fn from_coords(x: &[C64], points: usize) -> Self {
        Self { z: x[..points].to_vec(), tau: x[points], u: x[points + 1..].to_vec() }
    }
}

impl KZBConfig {
    pub fn new(sys: CMSystem, positions: Vec<C64>, u: Vec<C64>, fd_step: f64) -> Result<Self> {
        if sys.variant() != SystemVariant::Vector {
            return Err(Error::InvalidConfig("the KZB connection is built on the defining representation".into()));
        }
        if positions.is_empty() {
            return Err(Error::InvalidConfig("at least one marked point is needed".into()));
        }
        if !(fd_step > 0.0 && fd_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("fd_step must be positive, got {fd_step}")));
        }
        if u.len() != sys.rank() {
            return Err(Error::Dimension(format!("u has length {}, expected {}", u.len(), sys.rank())));
        }
        let total: C64 = positions.iter().sum();
        if total.im.abs() > 1e-12 || (total.re - total.re.round()).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("marked points must satisfy sum z_a = 0 mod 1, got {total}")));
        }
        for (i, a) in positions.iter().enumerate() {
            for c in &positions[i + 1..] {
                if sys.ctx().lattice_distance(a - c) < sys.ctx().lattice_exclusion_radius() {
                    return Err(Error::SingularArgument { what: "coincident marked points".into(), at: a - c });
                }
            }
        }
        let rep = sys.representation();
        for &h in &sys.tla().cartan {
            if (0..rep[h].nrows()).any(|i| (0..rep[h].ncols()).any(|j| i != j && rep[h][(i, j)].norm() > 0.0)) {
                return Err(Error::InvalidConfig("Cartan generators must act diagonally".into()));
            }
        }
        for (j, &hj) in sys.tla().cartan.iter().enumerate() {
            for (k, &hk) in sys.tla().cartan.iter().enumerate() {
                let expected = if j == k { 1.0 } else { 0.0 };
                if (sys.pairing(hj, hk) - expected).abs() > 1e-12 {
                    return Err(Error::InvalidConfig("Cartan basis is not orthonormal".into()));
                }
            }
        }
        r_eval(&sys, &u, C64::new(0.25, 0.0) + sys.tau() * 0.5)?;
        Ok(Self { sys, positions, u, fd_step, flip_f_sign: false })
    }

    pub fn points(&self) -> usize {
        self.positions.len()
    }

    pub fn base_point(&self) -> KzbPoint {
        KzbPoint { z: self.positions.clone(), tau: self.sys.tau(), u: self.u.clone() }
    }

    /// Dimension of `V^{(x) l}`.
    pub fn space_dim(&self) -> usize {
        self.sys.matrix_size().pow(self.points() as u32)
    }

    fn check_slot(&self, a: usize) -> Result<()> {
        if a >= self.points() {
            return Err(Error::InvalidSlot(a, self.points()));
        }
        Ok(())
    }

    /// Basis vectors of `V^{(x) l}` annihilated by `sum_a H_(a)`.
    pub fn zero_weight_basis(&self) -> Vec<usize> {
        let n = self.sys.matrix_size();
        let l = self.points();
        let rep = self.sys.representation();
        (0..self.space_dim())
            .filter(|&idx| {
                let digits = digits(idx, n, l);
                self.sys.tla().cartan.iter().all(|&h| digits.iter().map(|&i| rep[h][(i, i)]).sum::<C64>().norm() < 1e-12)
            })
            .collect()
    }
}

fn digits(mut idx: usize, n: usize, l: usize) -> Vec<usize> {
    let mut out = vec![0; l];
    for slot in (0..l).rev() {
        out[slot] = idx % n;
        idx /= n;
    }
    out
}

/// A two-slot tensor (slot 1 -> `a`, slot 2 -> `c`) acting on `V^{(x) l}`.
pub fn embed_pair(x: &CMat, n: usize, l: usize, a: usize, c: usize) -> CMat {
    let dim = n.pow(l as u32);
    CMat::from_fn(dim, dim, |row, col| {
        let (i, j) = (digits(row, n, l), digits(col, n, l));
        if (0..l).any(|s| s != a && s != c && i[s] != j[s]) {
            return C64::new(0.0, 0.0);
        }
        x[(i[a] * n + i[c], j[a] * n + j[c])]
    })
}

/// A one-slot operator acting in slot `a` of `V^{(x) l}`.
pub fn embed_single(x: &CMat, n: usize, l: usize, a: usize) -> CMat {
    let dim = n.pow(l as u32);
    CMat::from_fn(dim, dim, |row, col| {
        let (i, j) = (digits(row, n, l), digits(col, n, l));
        if (0..l).any(|s| s != a && i[s] != j[s]) {
            return C64::new(0.0, 0.0);
        }
        x[(i[a], j[a])]
    })
}

/// `f(u, z) = sum_a d_w kernel_a T_a (x) T^a + 1/2 (E1^2 - E2)(z) sum_k H_k (x) H^k`.
fn f_tensor(sys: &CMSystem, u: &[C64], z: C64) -> Result<CMat> {
    let n = sys.matrix_size();
    let dual = dual_generators(sys);
    let e1 = eisenstein1(z, sys.ctx())?;
    let cartan = (e1 * e1 - eisenstein2(z, sys.ctx())?) * 0.5;
    let mut acc = CMat::zeros(n * n, n * n);
    for (a, t) in sys.representation().iter().enumerate() {
        let g = &sys.tla().generators[a];
        let coef = match g.kind {
            GeneratorKind::Kernel => {
                let w = sys.kernel_argument(a, u) - sys.tau() * g.twist;
                twisted_kernel_dw(g.twist, w, z, sys.ctx())?
            }
            _ => cartan,
        };
        acc += t.kronecker(&dual[a]) * coef;
    }
    Ok(acc)
}

/// Coincident-point term `f^{aa}`: `-E2(w_a) T_a T^a` on kernel generators
/// and `F(0) H_k H^k` on the Cartan part.
fn f_diagonal(sys: &CMSystem, u: &[C64]) -> Result<CMat> {
    let n = sys.matrix_size();
    let dual = dual_generators(sys);
    let cartan = half_e1_sq_minus_e2_at_zero(sys.ctx());
    let mut acc = CMat::zeros(n, n);
    for (a, t) in sys.representation().iter().enumerate() {
        let coef = match sys.tla().generators[a].kind {
            GeneratorKind::Kernel => -eisenstein2(sys.kernel_argument(a, u), sys.ctx())?,
            _ => cartan,
        };
        acc += t * &dual[a] * coef;
    }
    Ok(acc)
}

fn coefficients_at(sys: &CMSystem, point: &KzbPoint, a: usize, c: usize) -> Result<KzbCoefficients> {
    let n = sys.matrix_size();
    let l = point.z.len();
    let dz = point.z[a] - point.z[c];
    let r = r_eval(sys, &point.u, dz)?.tensor;
    let f = f_tensor(sys, &point.u, dz)?;
    Ok(KzbCoefficients { r: embed_pair(&r, n, l, a, c), f: embed_pair(&f, n, l, a, c) })
}

/// `r^{ac}(u, z_a - z_c)` and `f^{ac}(u, z_a - z_c)` at the configuration.
pub fn kzb_coeffs(cfg: &KZBConfig, a: usize, c: usize) -> Result<KzbCoefficients> {
    cfg.check_slot(a)?;
    cfg.check_slot(c)?;
    if a == c {
        return Err(Error::InvalidSlot(c, cfg.points()));
    }
    coefficients_at(&cfg.sys, &cfg.base_point(), a, c)
}

/// Section of `V^{(x) l}` over the base.
pub type Section<'a> = dyn Fn(&KzbPoint) -> Result<CVec> + 'a;

fn shifted(x: &[C64], k: usize, h: f64) -> Vec<C64> {
    let mut y = x.to_vec();
    y[k] += h;
    y
}

fn finite(v: CVec) -> Result<CVec> {
    if v.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFiniteSection)
    }
}

struct Stencil<'s, 'a> {
    section: &'s Section<'a>,
    points: usize,
    h: f64,
}

impl Stencil<'_, '_> {
    fn eval(&self, x: &[C64]) -> Result<CVec> {
        finite((self.section)(&KzbPoint::from_coords(x, self.points))?)
    }

    fn d1(&self, x: &[C64], k: usize) -> Result<CVec> {
        Ok((self.eval(&shifted(x, k, self.h))? - self.eval(&shifted(x, k, -self.h))?) / C64::new(2.0 * self.h, 0.0))
    }

    fn d2(&self, x: &[C64], k: usize, center: &CVec) -> Result<CVec> {
        let sum = self.eval(&shifted(x, k, self.h))? + self.eval(&shifted(x, k, -self.h))? - center * C64::new(2.0, 0.0);
        Ok(sum / C64::new(self.h * self.h, 0.0))
    }
}

fn nabla_at(cfg: &KZBConfig, which: Nabla, section: &Section<'_>, point: &KzbPoint) -> Result<CVec> {
    let l = cfg.points();
    let n = cfg.sys.matrix_size();
    let stencil = Stencil { section, points: l, h: cfg.fd_step };
    let x = point.coords();
    let center = stencil.eval(&x)?;
    let retargeted;
    let sys = if point.tau == cfg.sys.tau() {
        &cfg.sys
    } else {
        retargeted = cfg.sys.with_tau(point.tau)?;
        &retargeted
    };
    let u_offset = l + 1;
    match which {
        Nabla::Point(a) => {
            cfg.check_slot(a)?;
            let dual = dual_generators(sys);
            let mut out = stencil.d1(&x, a)?;
            for (k, &h) in sys.tla().cartan.iter().enumerate() {
                out -= embed_single(&dual[h], n, l, a) * stencil.d1(&x, u_offset + k)?;
            }
            for c in (0..l).filter(|&c| c != a) {
                out += coefficients_at(sys, point, a, c)?.r * &center;
            }
            Ok(out)
        }
        Nabla::Tau => {
            let mut out = stencil.d1(&x, l)? * TWO_PI_I;
            for k in 0..sys.rank() {
                out += stencil.d2(&x, u_offset + k, &center)? * C64::new(0.5, 0.0);
            }
            let sign = if cfg.flip_f_sign { -0.5 } else { 0.5 };
            for a in 0..l {
                for c in (0..l).filter(|&c| c != a) {
                    out += coefficients_at(sys, point, a, c)?.f * &center * C64::new(sign, 0.0);
                }
            }
            let diagonal = f_diagonal(sys, &point.u)?;
            for a in 0..l {
                out += embed_single(&diagonal, n, l, a) * &center * C64::new(0.5, 0.0);
            }
            Ok(out)
        }
    }
}

/// `nabla_a section` or `nabla_tau section` at the configuration, with all
/// derivatives by central differences of step `cfg.fd_step`.
pub fn nabla_apply(cfg: &KZBConfig, which: Nabla, section: &Section<'_>) -> Result<CVec> {
    nabla_at(cfg, which, section, &cfg.base_point())
}

/// `[nabla_x, nabla_y] section` at the configuration.
pub fn commutator(cfg: &KZBConfig, x: Nabla, y: Nabla, section: &Section<'_>) -> Result<(CVec, f64)> {
    let inner_y = |p: &KzbPoint| nabla_at(cfg, y, section, p);
    let inner_x = |p: &KzbPoint| nabla_at(cfg, x, section, p);
    let xy = nabla_apply(cfg, x, &inner_y)?;
    let yx = nabla_apply(cfg, y, &inner_x)?;
    let scale = xy.iter().chain(yx.iter()).map(|c| c.norm()).fold(1.0, f64::max);
    Ok((xy - yx, scale))
}

type SparseVec = Vec<(usize, C64)>;

/// Polynomial test section of total degree <= 3 in the base coordinates
/// around the configuration, valued in the zero-weight subspace.
#[derive(Debug, Clone)]
pub struct PolynomialSection {
    origin: Vec<C64>,
    points: usize,
    dim: usize,
    /// Monomial exponents with their sparse coefficient vectors.
    terms: Vec<(Vec<u32>, SparseVec)>,
}

impl PolynomialSection {
    pub fn random<R: Rng>(cfg: &KZBConfig, rng: &mut R) -> Self {
        let origin = cfg.base_point().coords();
        let basis = cfg.zero_weight_basis();
        let terms = monomials(origin.len(), SECTION_DEGREE)
            .into_iter()
            .map(|m| {
                let coef = basis.iter().map(|&b| (b, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))).collect();
                (m, coef)
            })
            .collect();
        Self { origin, points: cfg.points(), dim: cfg.space_dim(), terms }
    }

    pub fn eval(&self, p: &KzbPoint) -> Result<CVec> {
        let x = p.coords();
        if x.len() != self.origin.len() || p.z.len() != self.points {
            return Err(Error::Dimension("section evaluated on a different base".into()));
        }
        let d: Vec<C64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        let mut out = CVec::zeros(self.dim);
        for (powers, coef) in &self.terms {
            let m: C64 = d.iter().zip(powers).map(|(di, &k)| di.powu(k)).product();
            for &(b, c) in coef {
                out[b] += c * m;
            }
        }
        Ok(out)
    }
}

fn monomials(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    if vars == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..=degree {
        for mut rest in monomials(vars - 1, degree - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn max_abs(v: &CVec) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Worst relative commutator residual over random sections.
fn worst_commutator(cfg: &KZBConfig, pairs: &[(Nabla, Nabla)], trials: usize, seed: u64, stream: u64) -> f64 {
    let mut rng = substream(seed, stream);
    let mut worst = 0.0f64;
    for _ in 0..trials.max(1) {
        let psi = PolynomialSection::random(cfg, &mut rng);
        let section = |p: &KzbPoint| psi.eval(p);
        for &(x, y) in pairs {
            match commutator(cfg, x, y, &section) {
                Ok((c, scale)) => worst = worst.max(max_abs(&c) / scale),
                Err(_) => return f64::INFINITY,
            }
        }
    }
    worst
}

/// Flatness of the connection on random polynomial sections, the
/// second-order decay of the stencil error and the sign-flip control.
pub fn flatness_probe(cfg: &KZBConfig, trials: usize, seed: u64) -> VerificationReport {
    let mut report = VerificationReport::new();
    let l = cfg.points();
    let samples = trials.max(1) as u64;
    let tol = 1e-4;
    let point_pairs: Vec<(Nabla, Nabla)> =
        (0..l).flat_map(|a| (a + 1..l).map(move |c| (Nabla::Point(a), Nabla::Point(c)))).collect();
    let tau_pairs: Vec<(Nabla, Nabla)> = (0..l).map(|a| (Nabla::Point(a), Nabla::Tau)).collect();

    if !point_pairs.is_empty() {
        let residual = worst_commutator(cfg, &point_pairs, trials, seed, 0);
        report.push(ReportEntry::new("kzb.flat_points", "[nabla_a, nabla_c] = 0", residual, tol).with_samples(samples, seed));
    }
    let residual = worst_commutator(cfg, &tau_pairs, trials, seed, 1);
    report.push(ReportEntry::new("kzb.flat_tau", "[nabla_a, nabla_tau] = 0", residual, tol).with_samples(samples, seed));

    // halving from 2h to h; below h the nested third differences hit
    // roundoff, and a residual already at roundoff has no stencil error to track
    let mut doubled = cfg.clone();
    doubled.fd_step *= 2.0;
    let coarse = worst_commutator(&doubled, &tau_pairs, trials, seed, 1);
    if !(coarse < ROUNDOFF_FLOOR) {
        let ratio = coarse / residual;
        report.push(
            ReportEntry::new("kzb.second_order", "halving fd_step divides the residual by 4", (ratio / 4.0 - 1.0).abs(), 0.25)
                .with_samples(samples, seed),
        );
    }

    if l > 1 {
        let mut mutated = cfg.clone();
        mutated.flip_f_sign = !cfg.flip_f_sign;
        let control = residual / worst_commutator(&mutated, &tau_pairs, trials, seed, 1);
        report.push(
            ReportEntry::new("kzb.mutation", "flipping the sign of f^{ac} breaks flatness", control, 1e-2)
                .with_samples(samples, seed),
        );
    }
    report
}
