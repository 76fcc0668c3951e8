//! Spin Calogero-Moser systems attached to a twisted Lie algebra: the Lax
//! operator, its defining conditions, the quadratic Hamiltonian and the
//! Poisson structure.

mod poisson;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::{e, eisenstein1, eisenstein2, twisted_kernel, twisted_kernel_dw, EllipticContext, C64};
use crate::error::{Error, Result};
use crate::lattice_charclass::{weight_shift_solution, WeightShift};
use crate::lie_twist::{CMat, GeneratorKind, TwistedLieAlgebra, Variant};
use crate::rational::Q;
use crate::report::{substream, ReportEntry, VerificationReport};

pub use poisson::{flow, flow_convergence_ratio, poisson, FlowResult, Gradient, Observable};


/// Matrix representation in which the Lax operator is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemVariant {
    /// Defining representation of a diagram-twisted algebra.
    Vector,
    /// Adjoint representation of a diagram-twisted algebra.
    Adjoint,
    /// Defining representation of `sl(2n)` twisted by `Lambda`.
    Sl2nLambda,
}

/// Radius of the contour used for the residue at `z = 0`.
const RESIDUE_RADIUS: f64 = 0.05;
const RESIDUE_POINTS: usize = 64;

#[derive(Debug, Clone)]
pub struct CMSystem {
    tla: TwistedLieAlgebra,
    ctx: EllipticContext,
    variant: SystemVariant,
    /// 1-based index `j` of the fundamental weight shifting `u`.
    char_class_shift: Option<usize>,
    /// Invariant part of that weight in Cartan coordinates (zero without a shift).
    shift: Vec<f64>,
    rep: Vec<CMat>,
    /// `tr(rho(X) rho(Y)) = trace_normalization * (X, Y)`, where `(,)` is the
    /// Killing form divided by the Cartan norm.
    trace_normalization: f64,
    /// `{S_a, S_b} = sum_c coef * S_c`.
    spin_bracket: BTreeMap<(usize, usize), Vec<(usize, C64)>>,
}

/// Phase space point: Cartan position `u`, momentum `v` and the spin
/// coefficients over the generators of the twisted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    pub spin: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseJson {
    u: Vec<C64>,
    v: Vec<C64>,
    spin: BTreeMap<String, C64>,
}

/// Distribution of random phase points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSampler {
    pub spin_scale: f64,
    pub momentum_scale: f64,
    /// Lower bound on the lattice distance of every kernel argument.
    pub min_resonance: f64,
    /// Real `u` and `v` (spins stay complex).
    pub real_position: bool,
    pub constrained: bool,
}

impl Default for PhaseSampler {
    fn default() -> Self {
        Self { spin_scale: 0.5, momentum_scale: 1.0, min_resonance: 0.1, real_position: false, constrained: true }
    }
}

#[derive(Debug, Clone)]
pub struct LaxEvaluation {
    pub z: C64,
    pub matrix: CMat,
    /// `grades[m]` is the part of `matrix` in the `omega^m` eigenspace of `nu`.
    pub grades: Vec<CMat>,
    /// Coefficients over the twisted basis.
    pub coefficients: Vec<C64>,
}

/// `dL/du_k`, `dL/dv_k` and `dL/dS_a` at one spectral point.
#[derive(Debug, Clone)]
pub struct LaxDerivatives {
    pub u: Vec<CMat>,
    pub v: Vec<CMat>,
    pub spin: Vec<CMat>,
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn relative(diff: &CMat, scale: &CMat) -> f64 {
    max_abs(diff) / max_abs(scale).max(1.0)
}

impl CMSystem {
    pub fn new(tla: TwistedLieAlgebra, tau: C64, variant: SystemVariant) -> Result<Self> {
        let ctx = EllipticContext::new(tau)?;
        let lambda_algebra = tla.variant == Variant::Sl2nLambda;
        if lambda_algebra != (variant == SystemVariant::Sl2nLambda) {
            return Err(Error::InvalidConfig(format!("system variant {variant:?} does not match the algebra basis")));
        }
        if tla.order() < 2 {
            return Err(Error::InvalidConfig("the automorphism must be nontrivial".into()));
        }
        let rep: Vec<CMat> = match variant {
            SystemVariant::Adjoint => adjoint_matrices(&tla),
            _ => tla.generators.iter().map(|g| g.matrix.clone()).collect(),
        };
        let kappa = tla.cartan_norm();
        let h = tla.cartan[0];
        let trace_normalization = ((&rep[h] * &rep[h]).trace() / (tla.generators[h].norm as f64 / kappa)).re;
        let spin_bracket = spin_bracket(&tla);
        let shift = vec![0.0; tla.rank()];
        Ok(Self { tla, ctx, variant, char_class_shift: None, shift, rep, trace_normalization, spin_bracket })
    }

    /// System on the bundle with characteristic class `e(xi)`: `u` is shifted
    /// by the fundamental weight solving `nu(w_j) - w_j = xi` modulo `Q^Y`.
    pub fn with_char_class(tla: TwistedLieAlgebra, tau: C64, variant: SystemVariant, xi: &[Q]) -> Result<Self> {
        let mut sys = Self::new(tla, tau, variant)?;
        if variant == SystemVariant::Sl2nLambda {
            return Err(Error::InvalidConfig("characteristic class shifts apply to diagram twists only".into()));
        }
        match weight_shift_solution(&sys.tla.root_system, &sys.tla.nu, xi)? {
            WeightShift::NoShift => {}
            WeightShift::NoSolution => {
                return Err(Error::InvalidConfig("no fundamental weight realizes this characteristic class".into()))
            }
            WeightShift::Fundamental(j) => {
                let weight = &sys.tla.root_system.fundamental_weights[j - 1];
                sys.shift = sys.tla.ambient_to_cartan(&sys.tla.nu.average(weight))?;
                sys.char_class_shift = Some(j);
            }
        }
        Ok(sys)
    }

    /// The same system over the curve with modulus `tau`.
    pub fn with_tau(&self, tau: C64) -> Result<Self> {
        let ctx = EllipticContext::with_policy(tau, self.ctx.tol(), self.ctx.lattice_exclusion_radius())?;
        Ok(Self { ctx, ..self.clone() })
    }

    pub fn tla(&self) -> &TwistedLieAlgebra {
        &self.tla
    }

    pub fn ctx(&self) -> &EllipticContext {
        &self.ctx
    }

    pub fn tau(&self) -> C64 {
        self.ctx.tau()
    }

    pub fn variant(&self) -> SystemVariant {
        self.variant
    }

    pub fn char_class_shift(&self) -> Option<usize> {
        self.char_class_shift
    }

    /// Cartan coordinates of the shift applied to `u` inside the kernels.
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn trace_normalization(&self) -> f64 {
        self.trace_normalization
    }

    pub fn rank(&self) -> usize {
        self.tla.rank()
    }

    pub fn dim(&self) -> usize {
        self.tla.dim()
    }

    /// Size of the representation matrices.
    pub fn matrix_size(&self) -> usize {
        self.rep[0].nrows()
    }

    /// Generator matrices in the representation of the system.
    pub fn representation(&self) -> &[CMat] {
        &self.rep
    }

    pub(crate) fn spin_bracket_terms(&self) -> &BTreeMap<(usize, usize), Vec<(usize, C64)>> {
        &self.spin_bracket
    }

    /// Killing form divided by the Cartan norm, between generators `a` and `b`.
    pub fn pairing(&self, a: usize, b: usize) -> f64 {
        crate::rational::q_to_f64(self.tla.killing_gram[a][b]) / self.tla.cartan_norm()
    }

    /// Whether the spin coefficient of generator `a` is removed by the moment
    /// constraint.
    pub fn is_constrained(&self, a: usize) -> bool {
        self.tla.generators[a].kind != GeneratorKind::Kernel
    }

    /// Argument `c_a - lambda_a(u + shift) + beta_a tau` of the Kronecker
    /// kernel of a kernel generator.
    pub fn kernel_argument(&self, a: usize, u: &[C64]) -> C64 {
        let g = &self.tla.generators[a];
        let shifted: C64 = g.weight.iter().zip(u.iter().zip(&self.shift)).map(|(w, (x, s))| (x + s) * *w).sum();
        C64::new(g.shift, 0.0) - shifted + self.tau() * g.twist
    }

    /// Smallest lattice distance of the kernel arguments at `u`.
    pub fn resonance_distance(&self, u: &[C64]) -> f64 {
        self.kernel_indices().map(|a| self.ctx.lattice_distance(self.kernel_argument(a, u))).fold(f64::INFINITY, f64::min)
    }

    fn kernel_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(|&a| self.tla.generators[a].kind == GeneratorKind::Kernel)
    }

    fn check_point(&self, p: &PhasePoint) -> Result<()> {
        let n = self.rank();
        if p.u.len() != n || p.v.len() != n || p.spin.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "phase point has |u| = {}, |v| = {}, |spin| = {}; expected {n}, {n}, {}",
                p.u.len(),
                p.v.len(),
                p.spin.len(),
                self.dim()
            )));
        }
        let finite = |c: &C64| c.re.is_finite() && c.im.is_finite();
        if !(p.u.iter().all(finite) && p.v.iter().all(finite) && p.spin.iter().all(finite)) {
            return Err(Error::NonFinite("phase point"));
        }
        Ok(())
    }

    fn check_nonresonant(&self, u: &[C64]) -> Result<()> {
        for a in self.kernel_indices() {
            let arg = self.kernel_argument(a, u);
            if self.ctx.lattice_distance(arg) < self.ctx.lattice_exclusion_radius() {
                return Err(Error::SingularArgument { what: self.tla.generators[a].label.clone(), at: arg });
            }
        }
        Ok(())
    }

    /// Coefficients of `L(z)` over the twisted basis.
    pub fn lax_coefficients(&self, p: &PhasePoint, z: C64) -> Result<Vec<C64>> {
        self.check_point(p)?;
        self.check_nonresonant(&p.u)?;
        let e1 = eisenstein1(z, &self.ctx)?;
        let mut coeffs = vec![C64::new(0.0, 0.0); self.dim()];
        for (a, g) in self.tla.generators.iter().enumerate() {
            coeffs[a] = match g.kind {
                GeneratorKind::Cartan | GeneratorKind::ZeroMode => p.spin[a] * e1,
                GeneratorKind::Kernel => {
                    let w = self.kernel_argument(a, &p.u) - self.tau() * g.twist;
                    p.spin[a] * twisted_kernel(g.twist, w, z, &self.ctx)?
                }
            };
        }
        for (k, &h) in self.tla.cartan.iter().enumerate() {
            coeffs[h] += p.v[k];
        }
        Ok(coeffs)
    }

    /// Partial derivatives of `L(z)` with respect to `u`, `v` and the spins.
    pub fn lax_derivatives(&self, p: &PhasePoint, z: C64) -> Result<LaxDerivatives> {
        self.check_point(p)?;
        self.check_nonresonant(&p.u)?;
        let size = self.matrix_size();
        let e1 = eisenstein1(z, &self.ctx)?;
        let mut du = vec![CMat::zeros(size, size); self.rank()];
        let mut spin = Vec::with_capacity(self.dim());
        for (a, g) in self.tla.generators.iter().enumerate() {
            let value = match g.kind {
                GeneratorKind::Cartan | GeneratorKind::ZeroMode => e1,
                GeneratorKind::Kernel => {
                    let w = self.kernel_argument(a, &p.u) - self.tau() * g.twist;
                    let dw = twisted_kernel_dw(g.twist, w, z, &self.ctx)? * p.spin[a];
                    for (k, wk) in g.weight.iter().enumerate() {
                        if *wk != 0.0 {
                            du[k] -= &self.rep[a] * (dw * *wk);
                        }
                    }
                    twisted_kernel(g.twist, w, z, &self.ctx)?
                }
            };
            spin.push(&self.rep[a] * value);
        }
        let dv = self.tla.cartan.iter().map(|&h| self.rep[h].clone()).collect();
        Ok(LaxDerivatives { u: du, v: dv, spin })
    }

    pub fn lax(&self, p: &PhasePoint, z: C64) -> Result<LaxEvaluation> {
        let coefficients = self.lax_coefficients(p, z)?;
        let size = self.matrix_size();
        let mut grades = vec![CMat::zeros(size, size); self.tla.order() as usize];
        for ((c, m), g) in coefficients.iter().zip(&self.rep).zip(&self.tla.generators) {
            grades[g.grade as usize] += m * *c;
        }
        let matrix = grades.iter().fold(CMat::zeros(size, size), |acc, x| acc + x);
        Ok(LaxEvaluation { z, matrix, grades, coefficients })
    }

    /// Lax operator of the `Lambda`-twisted `sl(2n)` system.
    pub fn lax_sl2n_lambda(&self, p: &PhasePoint, z: C64) -> Result<LaxEvaluation> {
        if self.variant != SystemVariant::Sl2nLambda {
            return Err(Error::InvalidConfig("lax_sl2n_lambda needs the sl2n_lambda variant".into()));
        }
        self.lax(p, z)
    }

    /// `sum_a S_a rho(T_a)`.
    pub fn spin_matrix(&self, spin: &[C64]) -> CMat {
        let size = self.matrix_size();
        spin.iter().zip(&self.rep).fold(CMat::zeros(size, size), |acc, (s, m)| acc + m * *s)
    }

    /// `nu` in the representation of the system.
    pub fn nu_rep(&self, x: &CMat) -> CMat {
        match self.variant {
            SystemVariant::Adjoint => {
                let omega = self.tla.omega();
                let phase: Vec<C64> = self.tla.generators.iter().map(|g| omega.powu(g.grade)).collect();
                DMatrix::from_fn(x.nrows(), x.ncols(), |c, b| x[(c, b)] * phase[c] / phase[b])
            }
            _ => self.tla.nu_apply(x),
        }
    }

    /// `Ad_g x` for `g = e(u + shift)` (times `Lambda` in the `Lambda` case).
    pub fn quasi_periodicity_conjugate(&self, u: &[C64], x: &CMat) -> CMat {
        let shifted: Vec<C64> = u.iter().zip(&self.shift).map(|(a, s)| a + s).collect();
        match self.variant {
            SystemVariant::Adjoint => {
                let phase: Vec<C64> = (0..self.dim()).map(|b| e(self.tla.weight_at(b, &shifted))).collect();
                DMatrix::from_fn(x.nrows(), x.ncols(), |c, b| x[(c, b)] * phase[c] / phase[b])
            }
            _ => {
                let cartan = self.tla.cartan_element(&shifted);
                let d: Vec<C64> = (0..cartan.nrows()).map(|i| e(cartan[(i, i)])).collect();
                let conj = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * d[i] / d[j]);
                match self.tla.lambda() {
                    Some(lam) => lam * conj * lam,
                    None => conj,
                }
            }
        }
    }

    /// Residue of `L` at `z = 0` by the trapezoidal rule on a small circle.
    pub fn lax_residue(&self, p: &PhasePoint) -> Result<CMat> {
        let size = self.matrix_size();
        let mut acc = CMat::zeros(size, size);
        for k in 0..RESIDUE_POINTS {
            let offset = e(C64::new(k as f64 / RESIDUE_POINTS as f64, 0.0)) * RESIDUE_RADIUS;
            acc += self.lax(p, offset)?.matrix * offset;
        }
        Ok(acc / C64::new(RESIDUE_POINTS as f64, 0.0))
    }

    /// Residuals of the three conditions fixing `L`: `nu(L(z)) = L(z - 1)`,
    /// `L(z + tau) = Ad_g L(z)` and `Res_{z=0} L = S`, over random points.
    pub fn verify_lax_conditions(&self, p: &PhasePoint, samples: usize, seed: u64) -> VerificationReport {
        let tol = 1e-9;
        let mut report = VerificationReport::new();
        let mut rng = substream(seed, 0);
        let mut worst = [0.0f64; 2];
        let mut failure = None;
        for _ in 0..samples.max(1) {
            let z = self.random_spectral_point(&mut rng);
            let sample = (|| -> Result<[f64; 2]> {
                let l = self.lax(p, z)?.matrix;
                let shifted = self.lax(p, z - 1.0)?.matrix;
                let c1 = relative(&(self.nu_rep(&l) - &shifted), &l);
                let up = self.lax(p, z + self.tau())?.matrix;
                let c2 = relative(&(up - self.quasi_periodicity_conjugate(&p.u, &l)), &l);
                Ok([c1, c2])
            })();
            match sample {
                Ok(r) => {
                    worst[0] = worst[0].max(r[0]);
                    worst[1] = worst[1].max(r[1]);
                }
                Err(err) => failure = Some(err),
            }
        }
        let residue = self.lax_residue(p).map(|res| {
            let s = self.spin_matrix(&p.spin);
            relative(&(res - &s), &s)
        });
        let samples = samples.max(1) as u64;
        if failure.is_some() {
            worst = [f64::INFINITY; 2];
        }
        report.push(ReportEntry::new("lax.nu_equivariance", "nu(L(z)) = L(z-1)", worst[0], tol).with_samples(samples, seed));
        report.push(
            ReportEntry::new("lax.tau_quasi_periodicity", "L(z+tau) = Ad_g L(z)", worst[1], tol).with_samples(samples, seed),
        );
        report.push(ReportEntry::new("lax.residue", "Res_{z=0} L = S", residue.unwrap_or(f64::INFINITY), tol));
        report
    }

    /// `C2 = 1/2 (S, S)`.
    pub fn casimir2(&self, p: &PhasePoint) -> C64 {
        let half: C64 = self
            .tla
            .generators
            .iter()
            .enumerate()
            .map(|(a, g)| p.spin[a] * p.spin[g.partner] * self.pairing(a, g.partner))
            .sum();
        half * 0.5
    }

    /// `H = 1/2 sum v_k^2 - 1/2 sum (T_a, T_b) S_a S_b E2(arg_a)` over kernel
    /// generators; requires the moment constraint.
    pub fn hamiltonian_closed(&self, p: &PhasePoint) -> Result<C64> {
        self.check_point(p)?;
        if let Some(a) = (0..self.dim()).find(|&a| self.is_constrained(a) && p.spin[a] != C64::new(0.0, 0.0)) {
            return Err(Error::ConstraintNotApplied { label: self.tla.generators[a].label.clone(), value: p.spin[a] });
        }
        self.hamiltonian_unchecked(p)
    }

    /// Closed-form Hamiltonian ignoring the constrained spin components.
    pub(crate) fn hamiltonian_unchecked(&self, p: &PhasePoint) -> Result<C64> {
        self.check_nonresonant(&p.u)?;
        let kinetic: C64 = p.v.iter().map(|x| x * x).sum::<C64>() * 0.5;
        let mut potential = C64::new(0.0, 0.0);
        for a in self.kernel_indices() {
            let b = self.tla.generators[a].partner;
            potential += p.spin[a] * p.spin[b] * self.pairing(a, b) * eisenstein2(self.kernel_argument(a, &p.u), &self.ctx)?;
        }
        Ok(kinetic - potential * 0.5)
    }

    /// `1/2 (L(z), L(z)) - E2(z) C2` at each sample; returns the mean and the
    /// largest deviation from it.
    pub fn hamiltonian_spectral(&self, p: &PhasePoint, z_samples: &[C64]) -> Result<(C64, f64)> {
        if z_samples.len() < 2 {
            return Err(Error::InvalidConfig("the spectral Hamiltonian needs at least two sample points".into()));
        }
        let c2 = self.casimir2(p);
        let values: Vec<C64> = z_samples
            .iter()
            .map(|&z| {
                let l = self.lax(p, z)?.matrix;
                Ok((&l * &l).trace() * 0.5 / self.trace_normalization - eisenstein2(z, &self.ctx)? * c2)
            })
            .collect::<Result<_>>()?;
        let mean = values.iter().sum::<C64>() / values.len() as f64;
        let spread = values.iter().map(|x| (x - mean).norm()).fold(0.0, f64::max);
        Ok((mean, spread))
    }

    /// Copy of `p` with the Cartan and zero-mode spin components set to zero.
    pub fn apply_moment_constraint(&self, p: &PhasePoint) -> PhasePoint {
        let mut out = p.clone();
        for (a, s) in out.spin.iter_mut().enumerate() {
            if self.is_constrained(a) {
                *s = C64::new(0.0, 0.0);
            }
        }
        out
    }

    pub fn zero_phase(&self) -> PhasePoint {
        let zero = C64::new(0.0, 0.0);
        PhasePoint { u: vec![zero; self.rank()], v: vec![zero; self.rank()], spin: vec![zero; self.dim()] }
    }

    /// Random phase point with resonance distance at least 0.1. Spin entries
    /// have real and imaginary parts in `[-spin_scale, spin_scale)`.
    pub fn random_phase<R: Rng>(&self, rng: &mut R, constrained: bool, spin_scale: f64) -> PhasePoint {
        let sampler = PhaseSampler { spin_scale, constrained, ..PhaseSampler::default() };
        self.sample_phase(rng, &sampler).expect("resonance distance 0.1 is always attainable")
    }

    pub fn sample_phase<R: Rng>(&self, rng: &mut R, sampler: &PhaseSampler) -> Result<PhasePoint> {
        let n = self.rank();
        let mut sym = |s: f64| C64::new(rng.random_range(-s..=s), rng.random_range(-s..=s));
        let spin: Vec<C64> = (0..self.dim()).map(|_| sym(sampler.spin_scale)).collect();
        let mut v: Vec<C64> = (0..n).map(|_| sym(sampler.momentum_scale)).collect();
        if sampler.real_position {
            v.iter_mut().for_each(|x| x.im = 0.0);
        }
        for _ in 0..10_000 {
            let u: Vec<C64> = (0..n)
                .map(|_| {
                    let im = if sampler.real_position { 0.0 } else { rng.random_range(-0.1..0.1) * self.tau().im };
                    C64::new(rng.random_range(-0.5..0.5), im)
                })
                .collect();
            if self.resonance_distance(&u) > sampler.min_resonance {
                let p = PhasePoint { u, v, spin };
                return Ok(if sampler.constrained { self.apply_moment_constraint(&p) } else { p });
            }
        }
        Err(Error::InvalidConfig(format!("no position with resonance distance {} found", sampler.min_resonance)))
    }

    /// Random spectral point at distance at least 0.1 from the lattice.
    pub fn random_spectral_point<R: Rng>(&self, rng: &mut R) -> C64 {
        loop {
            let z = C64::new(rng.random_range(0.0..1.0), 0.0) + self.tau() * rng.random_range(0.0..1.0);
            if self.ctx.lattice_distance(z) > 0.1 {
                return z;
            }
        }
    }

    pub fn phase_to_json(&self, p: &PhasePoint) -> String {
        let spin = self
            .tla
            .generators
            .iter()
            .zip(&p.spin)
            .filter(|(_, s)| **s != C64::new(0.0, 0.0))
            .map(|(g, s)| (g.label.clone(), *s))
            .collect();
        serde_json::to_string(&PhaseJson { u: p.u.clone(), v: p.v.clone(), spin }).expect("phase point serializes")
    }

    /// Parses the phase point schema; absent spin labels are zero.
    pub fn phase_from_json(&self, text: &str) -> Result<PhasePoint> {
        let raw: PhaseJson = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let mut spin = vec![C64::new(0.0, 0.0); self.dim()];
        for (label, value) in raw.spin {
            let a = self.tla.find(&label).ok_or_else(|| Error::Schema(format!("unknown generator label {label}")))?;
            spin[a] = value;
        }
        let p = PhasePoint { u: raw.u, v: raw.v, spin };
        self.check_point(&p).map_err(|e| Error::Schema(e.to_string()))?;
        Ok(p)
    }
}

/// `ad(T_a)` in the generator basis: `ad(T_a)[c][b]` is the `T_c` component
/// of `[T_a, T_b]`.
fn adjoint_matrices(tla: &TwistedLieAlgebra) -> Vec<CMat> {
    let d = tla.dim();
    (0..d)
        .map(|a| {
            let mut m = CMat::zeros(d, d);
            for b in 0..d {
                if let Some(terms) = tla.structure_constants.get(&(a, b)) {
                    for &(c, f) in terms {
                        m[(c, b)] = f;
                    }
                }
            }
            m
        })
        .collect()
}

/// Lie-Poisson bracket `{S_a, S_b} = -(S, [T^a, T^b])` for the form
/// `(x, y) = killing(x, y) / cartan_norm` (the one pairing `u` with `v`), with
/// `T^a` dual for that form, expanded over the spin coordinates.
fn spin_bracket(tla: &TwistedLieAlgebra) -> BTreeMap<(usize, usize), Vec<(usize, C64)>> {
    let gens = &tla.generators;
    let mut out = BTreeMap::new();
    for (a, ga) in gens.iter().enumerate() {
        for (b, gb) in gens.iter().enumerate() {
            let Some(terms) = tla.structure_constants.get(&(ga.partner, gb.partner)) else {
                continue;
            };
            let scale = (ga.norm * gb.norm) as f64 / tla.cartan_norm();
            // (S, T_c) = S_{partner(c)} * norm_c
            let expanded: Vec<(usize, C64)> =
                terms.iter().map(|&(c, f)| (gens[c].partner, -f * gens[c].norm as f64 / scale)).collect();
            if !expanded.is_empty() {
                out.insert((a, b), expanded);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_twist::{build_twisted_algebra, Family};

    fn a2() -> CMSystem {
        CMSystem::new(build_twisted_algebra(Family::A, 2, 2, Variant::Diagram).unwrap(), C64::new(0.0, 0.8), SystemVariant::Vector)
            .unwrap()
    }

    #[test]
    fn variant_must_match_basis() {
        let tla = build_twisted_algebra(Family::A, 3, 2, Variant::Diagram).unwrap();
        assert!(CMSystem::new(tla, C64::new(0.0, 1.0), SystemVariant::Sl2nLambda).is_err());
        let tla = build_twisted_algebra(Family::A, 3, 2, Variant::Sl2nLambda).unwrap();
        assert!(CMSystem::new(tla, C64::new(0.0, 1.0), SystemVariant::Vector).is_err());
    }

    #[test]
    fn resonant_position_is_rejected() {
        let sys = a2();
        let mut p = sys.zero_phase();
        assert!(matches!(sys.lax(&p, C64::new(0.3, 0.2)), Err(Error::SingularArgument { .. })));
        p.u = vec![C64::new(0.1, 0.0)];
        assert!(sys.lax(&p, C64::new(0.3, 0.2)).is_ok());
        assert!(matches!(sys.lax(&p, C64::new(0.0, 0.0)), Err(Error::SingularArgument { .. })));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = a2();
        let mut p = sys.zero_phase();
        p.v.push(C64::new(1.0, 0.0));
        assert!(matches!(sys.hamiltonian_closed(&p), Err(Error::Dimension(_))));
    }

    #[test]
    fn spectral_needs_two_points() {
        let sys = a2();
        let mut p = sys.zero_phase();
        p.u = vec![C64::new(0.2, 0.0)];
        assert!(sys.hamiltonian_spectral(&p, &[C64::new(0.3, 0.1)]).is_err());
    }

    #[test]
    fn schema_errors() {
        let sys = a2();
        assert!(matches!(sys.phase_from_json("{"), Err(Error::Schema(_))));
        assert!(matches!(sys.phase_from_json(r#"{"u":[[0,0]],"v":[[0,0]],"spin":{"nope":[1,0]}}"#), Err(Error::Schema(_))));
        assert!(matches!(sys.phase_from_json(r#"{"u":[],"v":[[0,0]],"spin":{}}"#), Err(Error::Schema(_))));
    }
}
