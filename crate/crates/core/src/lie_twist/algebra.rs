//! Graded bases of `sl(N)` and `so(2m)` adapted to an outer automorphism, with
//! Killing Gram matrices and structure constants.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::roots::{build_outer, build_root_system, orbit_decompose, Family, Folding, OuterAutomorphism, RootSystem};
use crate::error::{Error, Result};
use crate::rational::{self, QMat, QVec, Q};

pub type CMat = DMatrix<C64>;

const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Diagram,
    Sl2nLambda,
}

/// How a generator enters the Lax operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Invariant Cartan direction: carries momentum and an `E1` residue term.
    Cartan,
    /// Zero weight, trivial twist, but outside the `u` directions; carries an
    /// `E1` term and is removed by the moment constraint.
    ZeroMode,
    /// Carries the twisted kernel `e(beta z) phi(c - lambda(u) + beta tau, z)`.
    Kernel,
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub label: String,
    /// Eigenvalue index of `nu`: `nu(T) = omega^grade T`.
    pub grade: u32,
    /// Eigenvalue index of `Ad_Lambda` (always 0 in the diagram variant).
    pub sector: u32,
    pub matrix: CMat,
    /// `[H_k, T] = weight[k] T` for the Cartan generators `H_k`.
    pub weight: Vec<f64>,
    /// Exact restricted weight in ambient coordinates (diagram variant).
    pub restricted_weight: Option<QVec>,
    pub kind: GeneratorKind,
    /// Spectral twist `beta` of the kernel.
    pub twist: f64,
    /// Constant shift `c` of the kernel argument.
    pub shift: f64,
    /// Index of the generator with nonzero pairing.
    pub partner: usize,
    /// Pairing with the partner.
    pub norm: i64,
}

impl Generator {
    pub fn is_cartan(&self) -> bool {
        self.kind == GeneratorKind::Cartan
    }
}

/// Defining representation and the matrix form of `nu`.
#[derive(Debug, Clone)]
struct Realization {
    n: usize,
    family: Family,
    /// `nu(x) = -M x^T M^{-1}` (type A) or `P x P` (type D).
    conj: CMat,
    lambda: Option<CMat>,
}

impl Realization {
    fn nu(&self, x: &CMat) -> CMat {
        match self.family {
            Family::A => -(&self.conj * x.transpose() * self.conj.transpose()),
            _ => &self.conj * x * &self.conj,
        }
    }

    /// Matrix of `i`-th canonical Cartan vector.
    fn diag_embed(&self, ambient: &[f64]) -> CMat {
        let mut d = CMat::zeros(self.n, self.n);
        match self.family {
            Family::A => {
                for (i, x) in ambient.iter().enumerate() {
                    d[(i, i)] = C64::new(*x, 0.0);
                }
            }
            _ => {
                for (i, x) in ambient.iter().enumerate() {
                    d[(i, i)] = C64::new(*x, 0.0);
                    d[(self.n - 1 - i, self.n - 1 - i)] = C64::new(-*x, 0.0);
                }
            }
        }
        d
    }

    /// Weight of the `i`-th basis vector of the defining representation.
    fn index_weight(&self, i: usize, dim: usize) -> QVec {
        match self.family {
            Family::A => rational::unit(dim, i),
            _ => {
                if i < dim {
                    rational::unit(dim, i)
                } else {
                    rational::scale(rational::q(-1), &rational::unit(dim, self.n - 1 - i))
                }
            }
        }
    }

    /// Root vector for a positive root.
    fn root_vector(&self, root: &[Q], dim: usize) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j || (self.family == Family::D && j == self.n - 1 - i) {
                    continue;
                }
                let w = rational::sub(&self.index_weight(i, dim), &self.index_weight(j, dim));
                if w == root {
                    m[(i, j)] = C64::new(1.0, 0.0);
                    if self.family == Family::D {
                        m[(self.n - 1 - j, self.n - 1 - i)] = C64::new(-1.0, 0.0);
                    }
                    return m;
                }
            }
        }
        unreachable!("every root has a root vector in the defining representation")
    }
}

fn mat_norm(x: &CMat) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn unit_matrix(n: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

/// A simple Lie algebra with a diagram automorphism, its graded basis, Killing
/// Gram and structure constants.
#[derive(Debug, Clone)]
pub struct TwistedLieAlgebra {
    pub root_system: RootSystem,
    pub nu: OuterAutomorphism,
    pub folding: Folding,
    pub variant: Variant,
    pub generators: Vec<Generator>,
    /// Indices of the Cartan generators; `u` and `v` are coordinates in this basis.
    pub cartan: Vec<usize>,
    /// Exact Killing Gram in the generator basis.
    pub killing_gram: QMat,
    /// Killing form = `form_scale * trace` on the defining representation.
    pub form_scale: f64,
    /// Killing-dual generators `T^a`.
    pub dual: Vec<CMat>,
    /// `[T_a, T_b] = sum_c f[(a,b)][c] T_c`, stored sparsely.
    pub structure_constants: BTreeMap<(usize, usize), Vec<(usize, C64)>>,
    realization: Realization,
}

impl TwistedLieAlgebra {
    pub fn n(&self) -> usize {
        self.realization.n
    }

    pub fn order(&self) -> u32 {
        self.nu.order
    }

    pub fn rank(&self) -> usize {
        self.cartan.len()
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    /// Pairing of the Cartan generators with themselves (1 or 4); the
    /// Hamiltonian and Casimir use the Killing form divided by this constant.
    pub fn cartan_norm(&self) -> f64 {
        self.generators[self.cartan[0]].norm as f64
    }

    pub fn form(&self, x: &CMat, y: &CMat) -> C64 {
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..x.nrows() {
            for k in 0..x.ncols() {
                tr += x[(i, k)] * y[(k, i)];
            }
        }
        tr * self.form_scale
    }

    pub fn nu_apply(&self, x: &CMat) -> CMat {
        self.realization.nu(x)
    }

    /// Action of `nu` on the group: `g -> M g^{-T} M^{-1}` (A) or `P g P` (D).
    pub fn nu_group(&self, g: &CMat) -> Option<CMat> {
        match self.realization.family {
            Family::A => {
                let inv_t = g.clone().try_inverse()?.transpose();
                Some(&self.realization.conj * inv_t * self.realization.conj.transpose())
            }
            _ => Some(&self.realization.conj * g * &self.realization.conj),
        }
    }

    pub fn lambda(&self) -> Option<&CMat> {
        self.realization.lambda.as_ref()
    }

    pub fn omega(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * PI / self.order() as f64)
    }

    /// `omega^m` eigencomponent `(1/r) sum_j omega^{-jm} nu^j(x)`.
    pub fn grade_project(&self, x: &CMat, m: i64) -> CMat {
        let r = self.order() as i64;
        let mut acc = CMat::zeros(x.nrows(), x.ncols());
        let mut cur = x.clone();
        for j in 0..r {
            let phase = C64::from_polar(1.0, -2.0 * PI * ((j * m).rem_euclid(r)) as f64 / r as f64);
            acc += &cur * phase;
            cur = self.nu_apply(&cur);
        }
        acc / C64::new(r as f64, 0.0)
    }

    /// Coefficients of `x` over the generators.
    pub fn expand(&self, x: &CMat) -> Vec<C64> {
        self.dual.iter().map(|d| self.form(x, d)).collect()
    }

    pub fn assemble(&self, coeffs: &[C64]) -> CMat {
        let n = self.n();
        coeffs.iter().zip(&self.generators).fold(CMat::zeros(n, n), |acc, (c, g)| acc + &g.matrix * *c)
    }

    /// `sum_k u_k H_k`.
    pub fn cartan_element(&self, u: &[C64]) -> CMat {
        let n = self.n();
        self.cartan.iter().zip(u).fold(CMat::zeros(n, n), |acc, (&k, c)| acc + &self.generators[k].matrix * *c)
    }

    /// `lambda_a(u) = sum_k u_k weight_a[k]`.
    pub fn weight_at(&self, a: usize, u: &[C64]) -> C64 {
        self.generators[a].weight.iter().zip(u).map(|(w, x)| x * *w).sum()
    }

    /// Coordinates in the Cartan basis of an invariant ambient vector
    /// (diagram variant only).
    pub fn ambient_to_cartan(&self, ambient: &[Q]) -> Result<Vec<f64>> {
        if self.variant != Variant::Diagram {
            return Err(Error::InvalidConfig("ambient coordinates exist only for the diagram variant".into()));
        }
        self.matrix_to_cartan(&self.realization.diag_embed(&rational::to_f64(ambient)))
    }

    /// Coordinates of a Cartan matrix in the basis `H_k`; fails if `h` is not
    /// in their span.
    pub fn matrix_to_cartan(&self, h: &CMat) -> Result<Vec<f64>> {
        let kappa = self.cartan_norm();
        let coords: Vec<f64> = self.cartan.iter().map(|&k| (self.form(h, &self.generators[k].matrix) / kappa).re).collect();
        let rebuilt = self.cartan_element(&coords.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        if mat_norm(&(rebuilt - h)) > 1e-9 {
            return Err(Error::Dimension("matrix is not in the invariant Cartan subalgebra".into()));
        }
        Ok(coords)
    }

    pub fn diag_embed(&self, ambient: &[f64]) -> CMat {
        self.realization.diag_embed(ambient)
    }

    pub fn find(&self, label: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.label == label)
    }

    /// Largest residual of `[T_a, T_b] - sum_c f_ab^c T_c`.
    pub fn closure_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, ga) in self.generators.iter().enumerate() {
            for (b, gb) in self.generators.iter().enumerate() {
                let comm = &ga.matrix * &gb.matrix - &gb.matrix * &ga.matrix;
                let mut rebuilt = CMat::zeros(self.n(), self.n());
                if let Some(terms) = self.structure_constants.get(&(a, b)) {
                    for (c, f) in terms {
                        rebuilt += &self.generators[*c].matrix * *f;
                    }
                }
                worst = worst.max(mat_norm(&(comm - rebuilt)));
            }
        }
        worst
    }

    /// Largest structure constant violating the grading (and the
    /// `Ad_Lambda` sector grading in the Lambda variant).
    pub fn grading_residual(&self) -> f64 {
        let r = self.order();
        let mut worst: f64 = 0.0;
        for ((a, b), terms) in &self.structure_constants {
            let (ga, gb) = (&self.generators[*a], &self.generators[*b]);
            for (c, f) in terms {
                let gc = &self.generators[*c];
                let grade_ok = (ga.grade + gb.grade) % r == gc.grade;
                let sector_ok = (ga.sector + gb.sector) % 2 == gc.sector;
                if !(grade_ok && sector_ok) {
                    worst = worst.max(f.norm());
                }
            }
        }
        worst
    }

    /// Largest deviation of the numeric Gram from the exact one.
    pub fn gram_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, ga) in self.generators.iter().enumerate() {
            for (b, gb) in self.generators.iter().enumerate() {
                let exact = rational::q_to_f64(self.killing_gram[a][b]);
                worst = worst.max((self.form(&ga.matrix, &gb.matrix) - exact).norm());
            }
        }
        worst
    }

    /// Largest residual of `nu(T_a) = omega^{m_a} T_a` and
    /// `Ad_Lambda T_a = (-1)^{a} T_a`.
    pub fn eigen_residual(&self) -> f64 {
        let omega = self.omega();
        let mut worst: f64 = 0.0;
        for g in &self.generators {
            let lhs = self.nu_apply(&g.matrix);
            worst = worst.max(mat_norm(&(lhs - &g.matrix * omega.powu(g.grade))));
            if let Some(lam) = self.lambda() {
                let sign = if g.sector == 0 { 1.0 } else { -1.0 };
                let conj = lam * &g.matrix * lam;
                worst = worst.max(mat_norm(&(conj - &g.matrix * C64::new(sign, 0.0))));
            }
        }
        worst
    }

    /// Builds the finite-order automorphism `sigma = nu . Ad_{e(kappa)}` for
    /// marks `s = (s_0, ..., s_n)`.
    pub fn sigma_rs(&self, s: &[i64]) -> Result<SigmaRs> {
        if self.variant != Variant::Diagram {
            return Err(Error::InvalidConfig("sigma_rs is defined on the diagram basis".into()));
        }
        let n = self.folding.rank();
        if s.len() != n + 1 {
            return Err(Error::InvalidMarks(format!("expected {} marks, got {}", n + 1, s.len())));
        }
        if s.iter().any(|&x| x < 0) {
            return Err(Error::InvalidMarks("marks must be nonnegative".into()));
        }
        let g = s.iter().fold(0i64, |acc, &x| acc.gcd(&x));
        if g != 1 {
            return Err(Error::InvalidMarks(format!("marks have common factor {g}")));
        }
        let r = self.order() as i64;
        let p = r * (s[0] + self.folding.marks.iter().zip(&s[1..]).map(|(a, x)| a * x).sum::<i64>());
        let rs = &self.root_system;
        let simple = &self.folding.simple;
        let gram: QMat = simple.iter().map(|a| simple.iter().map(|b| rs.pair(a, b)).collect()).collect();
        let rhs: QVec = s[1..].iter().map(|&x| Q::new(r * x, p)).collect();
        let coeffs = rational::solve_in_basis(&gram, &rhs).expect("simple roots are independent");
        let kappa = simple
            .iter()
            .zip(&coeffs)
            .fold(rational::zeros(rs.dim()), |acc, (a, c)| rational::add(&acc, &rational::scale(*c, a)));
        let emb = self.realization.diag_embed(&rational::to_f64(&kappa));
        let n = self.n();
        let torus = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::from_polar(1.0, 2.0 * PI * emb[(i, i)].re)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(SigmaRs { marks: s.to_vec(), order: p, kappa, torus })
    }
}

/// Finite-order automorphism `nu . Ad_{e(kappa)}`.
#[derive(Debug, Clone)]
pub struct SigmaRs {
    pub marks: Vec<i64>,
    pub order: i64,
    /// Torus element `kappa` in ambient coordinates.
    pub kappa: QVec,
    torus: CMat,
}

impl SigmaRs {
    pub fn apply(&self, tla: &TwistedLieAlgebra, x: &CMat) -> CMat {
        let inv = self.torus.map(|c| c.conj());
        tla.nu_apply(&(&self.torus * x * inv))
    }

    /// Exact eigenphase (mod 1) of `sigma` on a generator with a restricted
    /// weight: `grade / r + <weight, kappa>`.
    pub fn phase(&self, tla: &TwistedLieAlgebra, generator: usize) -> Option<Q> {
        let g = &tla.generators[generator];
        let w = g.restricted_weight.as_ref()?;
        let base = Q::new(g.grade as i64, tla.order() as i64);
        Some(rational::mod_one(base + tla.root_system.pair(w, &self.kappa)))
    }
}

/// Builds the twisted basis for the requested variant.
pub fn build_twisted_algebra(family: Family, rank: usize, order: u32, variant: Variant) -> Result<TwistedLieAlgebra> {
    let rs = build_root_system(family, rank)?;
    let nu = build_outer(&rs, order)?;
    let unavailable = || Error::MatrixRealizationUnavailable(format!("{family}{rank} with order {order}"));
    if family == Family::E6 || order != 2 {
        return Err(unavailable());
    }
    if variant == Variant::Sl2nLambda && !(family == Family::A && rank % 2 == 1) {
        return Err(Error::InvalidConfig("the Lambda variant needs sl(2n), i.e. A with odd rank".into()));
    }
    let folding = orbit_decompose(&rs, &nu);
    let realization = realization(&rs, variant);
    let built = match variant {
        Variant::Diagram => diagram_basis(&rs, &nu, &realization),
        Variant::Sl2nLambda => lambda_basis(&realization),
    };
    finish(rs, nu, folding, variant, realization, built)
}

fn realization(rs: &RootSystem, variant: Variant) -> Realization {
    let one = C64::new(1.0, 0.0);
    match rs.family {
        Family::A => {
            let n = rs.rank + 1;
            let mut conj = CMat::zeros(n, n);
            if n % 2 == 1 {
                for i in 0..n {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    conj[(i, n - 1 - i)] = C64::new(sign, 0.0);
                }
            } else {
                let h = n / 2;
                for i in 0..h {
                    conj[(i, n - 1 - i)] = one;
                    conj[(h + i, h - 1 - i)] = -one;
                }
            }
            let lambda = (variant == Variant::Sl2nLambda).then(|| {
                let h = n / 2;
                let mut lam = CMat::zeros(n, n);
                for i in 0..h {
                    lam[(i, h + i)] = one;
                    lam[(h + i, i)] = one;
                }
                lam
            });
            Realization { n, family: Family::A, conj, lambda }
        }
        _ => {
            let n = 2 * rs.rank;
            let mut conj = CMat::identity(n, n);
            let (a, b) = (rs.rank - 1, rs.rank);
            conj[(a, a)] = C64::new(0.0, 0.0);
            conj[(b, b)] = C64::new(0.0, 0.0);
            conj[(a, b)] = one;
            conj[(b, a)] = one;
            Realization { n, family: Family::D, conj, lambda: None }
        }
    }
}

struct Candidate {
    label: String,
    grade: u32,
    sector: u32,
    matrix: CMat,
    restricted_weight: Option<QVec>,
    norm: i64,
    partner_offset: Option<usize>,
}

fn family_scale(rs: &RootSystem, variant: Variant) -> f64 {
    match (rs.family, variant) {
        (Family::A, Variant::Sl2nLambda) => 1.0,
        (Family::A, _) if rs.rank.is_multiple_of(2) => 2.0,
        (Family::A, _) => 1.0,
        _ => 0.5,
    }
}

fn form_with(scale: f64, x: &CMat, y: &CMat) -> C64 {
    (x * y).trace() * scale
}

/// Gram-Schmidt under the (real, symmetric) Killing form, dropping vectors
/// that become dependent.
fn orthonormalize(scale: f64, vectors: Vec<CMat>, against: &[CMat], target: f64) -> Vec<CMat> {
    let mut out: Vec<CMat> = Vec::new();
    for v in vectors {
        let mut w = v;
        for b in against.iter().chain(out.iter()) {
            let c = form_with(scale, &w, b) / form_with(scale, b, b);
            w -= b * c;
        }
        if mat_norm(&w) < ZERO_TOL {
            continue;
        }
        let nrm = form_with(scale, &w, &w);
        let factor = (C64::new(target, 0.0) / nrm).sqrt();
        out.push(w * factor);
    }
    out
}

fn diagram_basis(rs: &RootSystem, nu: &OuterAutomorphism, real: &Realization) -> Vec<Candidate> {
    let scale = family_scale(rs, Variant::Diagram);
    let r = nu.order;
    let dim = rs.dim();
    let even_a = rs.family == Family::A && rs.rank.is_multiple_of(2);
    let cartan_target = if even_a { 4.0 } else { 1.0 };
    let mut out: Vec<Candidate> = Vec::new();

    // Cartan generators, grade by grade
    let canon: Vec<CMat> = (0..real.n)
        .filter(|&i| rs.family == Family::A || i < dim)
        .map(|i| match rs.family {
            Family::A => unit_matrix(real.n, i, i),
            _ => real.diag_embed(&rational::to_f64(&rational::unit(dim, i))),
        })
        .collect();
    let identity = CMat::identity(real.n, real.n);
    let against: Vec<CMat> = if rs.family == Family::A { vec![identity] } else { vec![] };
    for m in 0..r {
        let projected: Vec<CMat> = canon.iter().map(|h| grade_project_with(real, r, h, m as i64)).collect();
        let basis = orthonormalize(scale, projected, &against, cartan_target);
        for (k, h) in basis.into_iter().enumerate() {
            out.push(Candidate {
                label: format!("eps{m}_{}", k + 1),
                grade: m,
                sector: 0,
                matrix: h,
                restricted_weight: Some(rational::zeros(dim)),
                norm: cartan_target as i64,
                partner_offset: None,
            });
        }
    }

    // root orbits: positive orbits, then their transposes
    let positive: Vec<&QVec> = rs.roots.iter().filter(|a| rs.is_positive(a)).collect();
    let mut done: BTreeSet<QVec> = BTreeSet::new();
    let mut positive_block: Vec<Candidate> = Vec::new();
    for alpha in positive {
        if done.contains(alpha) {
            continue;
        }
        let orbit = nu.orbit(alpha);
        for b in &orbit {
            done.insert(b.clone());
        }
        let restricted = nu.average(alpha);
        let e_alpha = real.root_vector(alpha, dim);
        let target = |_m: u32| -> i64 {
            if even_a {
                if orbit.len() == 1 || rs.pair(alpha, &nu.apply(alpha)) != Q::zero() {
                    8
                } else {
                    4
                }
            } else if orbit.len() == 1 {
                1
            } else {
                r as i64
            }
        };
        for m in 0..r {
            let x = grade_project_with(real, r, &e_alpha, m as i64) * C64::new(r as f64, 0.0);
            if mat_norm(&x) < ZERO_TOL {
                continue;
            }
            let raw = form_with(scale, &x, &x.transpose());
            let t = target(m);
            let factor = (t as f64 / raw.re).sqrt();
            let prefix = if m == 0 { "E".to_string() } else { format!("t{m}") };
            positive_block.push(Candidate {
                label: format!("{prefix}{}", rational::format_vec(&restricted)),
                grade: m,
                sector: 0,
                matrix: x * C64::new(factor, 0.0),
                restricted_weight: Some(restricted.clone()),
                norm: t,
                partner_offset: None,
            });
        }
    }
    let count = positive_block.len();
    let negative: Vec<Candidate> = positive_block
        .iter()
        .map(|c| {
            let neg = rational::scale(rational::q(-1), c.restricted_weight.as_ref().unwrap());
            let prefix = c.label.split('(').next().unwrap_or("E");
            Candidate {
                label: format!("{prefix}{}", rational::format_vec(&neg)),
                grade: (r - c.grade) % r,
                sector: 0,
                matrix: c.matrix.transpose(),
                restricted_weight: Some(neg),
                norm: c.norm,
                partner_offset: None,
            }
        })
        .collect();
    // transposing maps the grade m block to grade m, so pair positive k with negative k
    let base = out.len();
    for (k, mut c) in positive_block.into_iter().enumerate() {
        c.partner_offset = Some(base + count + k);
        out.push(c);
    }
    for (k, mut c) in negative.into_iter().enumerate() {
        c.partner_offset = Some(base + k);
        out.push(c);
    }
    out
}

fn grade_project_with(real: &Realization, r: u32, x: &CMat, m: i64) -> CMat {
    let r = r as i64;
    let mut acc = CMat::zeros(x.nrows(), x.ncols());
    let mut cur = x.clone();
    for j in 0..r {
        let phase = C64::from_polar(1.0, -2.0 * PI * ((j * m).rem_euclid(r)) as f64 / r as f64);
        acc += &cur * phase;
        cur = real.nu(&cur);
    }
    acc / C64::new(r as f64, 0.0)
}

/// Projection onto the `(a, b)` eigenspace of `(Ad_Lambda, nu)`.
fn sector_project(real: &Realization, x: &CMat, a: u32, b: u32) -> CMat {
    let lam = real.lambda.as_ref().expect("Lambda variant");
    let nu_x = real.nu(x);
    let sa = if a == 0 { 1.0 } else { -1.0 };
    let sb = if b == 0 { 1.0 } else { -1.0 };
    let terms = x + &nu_x * C64::new(sb, 0.0) + lam * x * lam * C64::new(sa, 0.0) + lam * &nu_x * lam * C64::new(sa * sb, 0.0);
    terms / C64::new(4.0, 0.0)
}

fn lambda_basis(real: &Realization) -> Vec<Candidate> {
    let n = real.n;
    let half = n / 2;
    let scale = 1.0;
    let mut out: Vec<Candidate> = Vec::new();
    let identity = CMat::identity(n, n);
    let sectors = [(0u32, 0u32), (0, 1), (1, 0), (1, 1)];

    // diagonal sectors; (0,0) is the Cartan subalgebra of the u directions
    for &(a, b) in &sectors {
        let projected: Vec<CMat> = (0..n).map(|i| sector_project(real, &unit_matrix(n, i, i), a, b)).collect();
        for (k, h) in orthonormalize(scale, projected, std::slice::from_ref(&identity), 4.0).into_iter().enumerate() {
            out.push(Candidate {
                label: format!("H_{a}{b}_{}", k + 1),
                grade: b,
                sector: a,
                matrix: h,
                restricted_weight: None,
                norm: 4,
                partner_offset: None,
            });
        }
    }

    let orbit_of = |i: usize, j: usize| -> BTreeSet<(usize, usize)> {
        let x = unit_matrix(n, i, j);
        let lam = real.lambda.as_ref().unwrap();
        let images = [x.clone(), real.nu(&x), lam * &x * lam, lam * real.nu(&x) * lam];
        images
            .iter()
            .map(|m| {
                let (pos, _) = m.iter().enumerate().find(|(_, c)| c.norm() > 0.5).unwrap();
                // column-major storage
                (pos % n, pos / n)
            })
            .collect()
    };
    let mut done: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut blocks: Vec<(Vec<Candidate>, Vec<Candidate>)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || done.contains(&(i, j)) {
                continue;
            }
            let orbit = orbit_of(i, j);
            let transposed: BTreeSet<(usize, usize)> = orbit.iter().map(|&(x, y)| (y, x)).collect();
            done.extend(orbit.iter().copied());
            done.extend(transposed.iter().copied());
            let self_dual = transposed == orbit;
            let x = unit_matrix(n, i, j);
            let alpha = u32::from((i < half) != (j < half));
            let (jj, kk) = (i % half + 1, j % half + 1);
            let (ti, tj) = *transposed.iter().next().unwrap();
            let t_alpha = u32::from((ti < half) != (tj < half));
            let (tjj, tkk) = (ti % half + 1, tj % half + 1);
            let mut forward = Vec::new();
            let mut backward = Vec::new();
            for &(a, b) in &sectors {
                let p = sector_project(real, &x, a, b);
                if mat_norm(&p) < ZERO_TOL {
                    continue;
                }
                let raw = form_with(scale, &p, &p.transpose());
                let mut m = p * C64::new((4.0 / raw.re).sqrt(), 0.0);
                if self_dual {
                    // partner is the element itself: make its square trace positive
                    let sq = form_with(scale, &m, &m);
                    if sq.re < 0.0 {
                        m *= C64::new(0.0, 1.0);
                    }
                    forward.push(Candidate {
                        label: format!("T{alpha}_{a}{b}_{jj}_{kk}"),
                        grade: b,
                        sector: a,
                        matrix: m,
                        restricted_weight: None,
                        norm: 4,
                        partner_offset: None,
                    });
                } else {
                    backward.push(Candidate {
                        label: format!("T{t_alpha}_{a}{b}_{tjj}_{tkk}"),
                        grade: b,
                        sector: a,
                        matrix: m.transpose(),
                        restricted_weight: None,
                        norm: 4,
                        partner_offset: None,
                    });
                    forward.push(Candidate {
                        label: format!("T{alpha}_{a}{b}_{jj}_{kk}"),
                        grade: b,
                        sector: a,
                        matrix: m,
                        restricted_weight: None,
                        norm: 4,
                        partner_offset: None,
                    });
                }
            }
            blocks.push((forward, backward));
        }
    }
    for (forward, backward) in blocks {
        let base = out.len();
        let count = forward.len();
        let has_back = !backward.is_empty();
        for (k, mut c) in forward.into_iter().enumerate() {
            c.partner_offset = Some(if has_back { base + count + k } else { base + k });
            out.push(c);
        }
        for (k, mut c) in backward.into_iter().enumerate() {
            c.partner_offset = Some(base + k);
            out.push(c);
        }
    }
    out
}

fn finish(
    rs: RootSystem,
    nu: OuterAutomorphism,
    folding: Folding,
    variant: Variant,
    realization: Realization,
    candidates: Vec<Candidate>,
) -> Result<TwistedLieAlgebra> {
    let scale = family_scale(&rs, variant);
    let r = nu.order;
    let dim = candidates.len();
    let cartan: Vec<usize> = candidates.iter().enumerate().filter(|(_, c)| c.grade == 0 && c.sector == 0 && is_diagonal(&c.matrix)).map(|(i, _)| i).collect();
    let partner: Vec<usize> = candidates.iter().enumerate().map(|(i, c)| c.partner_offset.unwrap_or(i)).collect();

    let mut killing_gram = vec![rational::zeros(dim); dim];
    for (a, c) in candidates.iter().enumerate() {
        killing_gram[a][partner[a]] = rational::q(c.norm);
    }
    let dual: Vec<CMat> =
        candidates.iter().enumerate().map(|(a, c)| &candidates[partner[a]].matrix / C64::new(c.norm as f64, 0.0)).collect();

    let generators: Vec<Generator> = candidates
        .iter()
        .enumerate()
        .map(|(a, c)| {
            let weight: Vec<f64> = cartan
                .iter()
                .map(|&k| {
                    let h = &candidates[k].matrix;
                    let comm = h * &c.matrix - &c.matrix * h;
                    let num: C64 = comm.iter().zip(c.matrix.iter()).map(|(x, y)| x * y.conj()).sum();
                    let den: f64 = c.matrix.iter().map(|y| y.norm_sqr()).sum();
                    (num / den).re
                })
                .collect();
            let (twist, shift) = match variant {
                Variant::Diagram => (-(c.grade as f64) / r as f64, 0.0),
                Variant::Sl2nLambda => (c.grade as f64 / 2.0, c.sector as f64 / 2.0),
            };
            let zero_weight = weight.iter().all(|w| w.abs() < 1e-12);
            let kind = if cartan.contains(&a) {
                GeneratorKind::Cartan
            } else if zero_weight && twist == 0.0 && shift == 0.0 {
                GeneratorKind::ZeroMode
            } else {
                GeneratorKind::Kernel
            };
            Generator {
                label: c.label.clone(),
                grade: c.grade,
                sector: c.sector,
                matrix: c.matrix.clone(),
                weight,
                restricted_weight: c.restricted_weight.clone(),
                kind,
                twist,
                shift,
                partner: partner[a],
                norm: c.norm,
            }
        })
        .collect();

    let mut structure_constants = BTreeMap::new();
    for (a, ga) in generators.iter().enumerate() {
        for (b, gb) in generators.iter().enumerate() {
            let comm = &ga.matrix * &gb.matrix - &gb.matrix * &ga.matrix;
            if mat_norm(&comm) < 1e-14 {
                continue;
            }
            let terms: Vec<(usize, C64)> = dual
                .iter()
                .enumerate()
                .map(|(c, d)| (c, form_with(scale, &comm, d)))
                .filter(|(_, f)| f.norm() > 1e-13)
                .collect();
            structure_constants.insert((a, b), terms);
        }
    }

    Ok(TwistedLieAlgebra {
        root_system: rs,
        nu,
        folding,
        variant,
        generators,
        cartan,
        killing_gram,
        form_scale: scale,
        dual,
        structure_constants,
        realization,
    })
}

fn is_diagonal(m: &CMat) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].norm() < ZERO_TOL))
}

impl TwistedLieAlgebra {
    /// `nu` of a root vector of the defining representation (for tests of the
    /// sign conventions).
    pub fn root_vector(&self, root: &[Q]) -> CMat {
        let rs = &self.root_system;
        if rs.is_positive(root) {
            self.realization.root_vector(root, rs.dim())
        } else {
            let neg = rational::scale(rational::q(-1), root);
            self.realization.root_vector(&neg, rs.dim()).transpose()
        }
    }

}
