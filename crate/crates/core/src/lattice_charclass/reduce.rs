//! Reduction of `u = a + b tau` to a fundamental domain of `W_0 x (tau L + L)`.
//!
//! `a` is moved into the closed alcove `0 <= <beta, a> <= t_beta` (positive
//! `beta`) by affine reflections, where `t_beta` is the smallest level for which
//! the reflection lies in the group. Translations in `L` not generated by
//! reflections are resolved by picking the lexicographically smallest image.
//! `b` is reduced into the half-open unit cell of `L`.

use super::{coroot, invariant_lattices, lattice_quotient, restricted_roots, IntegerLattice};
use crate::elliptic::C64;
use crate::error::{Error, Result};
use crate::lie_twist::{OuterAutomorphism, RootSystem};
use crate::rational::{self, q, QVec, Q};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const WALL_TOL: f64 = 1e-11;
const MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionFlavor {
    /// Invariant coweight lattice, adjoint group.
    Coweight,
    /// Invariant coroot lattice, simply connected group.
    Coroot,
    /// Invariant coweight lattice of the `sl(2n)` case twisted by `Lambda`.
    Sl2nLambda,
}

/// One group element of a reduction transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BsStep {
    /// `u -> u + gamma_1 + gamma_2 tau`, lattice coordinates of both shifts.
    Shift { real: Vec<i64>, tau: Vec<i64> },
    /// Affine reflection `a -> a - (<beta, a> - level) beta^vee`, linear on `b`.
    Reflect {
        root: usize,
        #[serde(with = "ratio_string")]
        level: Q,
    },
}

mod ratio_string {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub reduced: Vec<C64>,
    /// Steps applied in order to the input to reach `reduced`.
    pub transcript: Vec<BsStep>,
}

/// Affine Weyl data in a fixed coordinate system on the invariant Cartan
/// subalgebra.
#[derive(Debug, Clone)]
pub struct AlcoveReducer {
    pub flavor: ReductionFlavor,
    dim: usize,
    /// Positive roots as linear forms on coordinates.
    roots: Vec<QVec>,
    /// Corresponding coroots in coordinates.
    coroots: Vec<QVec>,
    /// Smallest affine level `t_beta` of each root.
    levels: Vec<Q>,
    /// Translation lattice in coordinates.
    lattice: IntegerLattice,
    lattice_inverse: DMatrix<f64>,
    /// Representatives of `L / L_refl` in lattice coordinates.
    cosets: Vec<Vec<i64>>,
    /// Coordinate axes as ambient vectors (absent for the `Lambda` flavor).
    axes: Option<Vec<QVec>>,
}

impl AlcoveReducer {
    /// Reducer for the coweight or coroot flavor of a twisted root system.
    /// Coordinates are taken with respect to the invariant fundamental coweights.
    pub fn new(rs: &RootSystem, nu: &OuterAutomorphism, flavor: ReductionFlavor) -> Result<Self> {
        let lattices = invariant_lattices(rs, nu)?;
        let axes = lattices.coweights.clone();
        let in_coords = |v: &[Q]| {
            rational::solve_in_basis(&axes, v).ok_or_else(|| Error::Dimension("vector outside the invariant subspace".into()))
        };
        let mut roots = Vec::new();
        let mut coroots = Vec::new();
        for beta in restricted_roots(rs, nu) {
            let form: QVec = axes.iter().map(|w| rs.pair(&beta, w)).collect();
            if form.iter().all(|x| *x >= q(0)) {
                coroots.push(in_coords(&coroot(rs, &beta))?);
                roots.push(form);
            }
        }
        let lattice_basis: Vec<QVec> = match flavor {
            ReductionFlavor::Coweight => (0..axes.len()).map(|k| rational::unit(axes.len(), k)).collect(),
            ReductionFlavor::Coroot => {
                lattices.coroot_lattice.basis().iter().map(|v| in_coords(v)).collect::<Result<_>>()?
            }
            ReductionFlavor::Sl2nLambda => {
                return Err(Error::InvalidConfig("use AlcoveReducer::sl2n_lambda for the Lambda flavor".into()))
            }
        };
        Self::from_parts(flavor, roots, coroots, lattice_basis, Some(axes))
    }

    /// Reducer for the `Lambda`-twisted `sl(2n)` case in the coordinates
    /// `(u_1, ..., u_l)`, `l = floor(n / 2)`, with lattice `Z^l` and the
    /// signed-permutation Weyl group.
    pub fn sl2n_lambda(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidConfig("the Lambda case needs n >= 2".into()));
        }
        let mut roots = Vec::new();
        let mut coroots = Vec::new();
        for i in 0..l {
            for j in i + 1..l {
                let minus = rational::sub(&rational::unit(l, i), &rational::unit(l, j));
                let plus = rational::add(&rational::unit(l, i), &rational::unit(l, j));
                roots.push(minus.clone());
                coroots.push(minus);
                roots.push(plus.clone());
                coroots.push(plus);
            }
            roots.push(rational::scale(q(2), &rational::unit(l, i)));
            coroots.push(rational::unit(l, i));
        }
        let lattice = (0..l).map(|k| rational::unit(l, k)).collect();
        Self::from_parts(ReductionFlavor::Sl2nLambda, roots, coroots, lattice, None)
    }

    fn from_parts(
        flavor: ReductionFlavor,
        roots: Vec<QVec>,
        coroots: Vec<QVec>,
        lattice_basis: Vec<QVec>,
        axes: Option<Vec<QVec>>,
    ) -> Result<Self> {
        let dim = lattice_basis.len();
        let lattice = IntegerLattice::from_basis(dim, lattice_basis)?;
        let mut levels = Vec::with_capacity(roots.len());
        let mut translations = Vec::with_capacity(roots.len());
        for cv in &coroots {
            let coords = rational::solve_in_basis(lattice.basis(), cv)
                .ok_or_else(|| Error::Dimension("coroot outside the lattice span".into()))?;
            let denom = rational::common_denominator(&coords);
            let numer_gcd = coords.iter().fold(0i64, |acc, x| num_integer::gcd(acc, (x * denom).to_integer()));
            let level = Q::new(denom, numer_gcd);
            translations.push(rational::scale(level, cv));
            levels.push(level);
        }
        let refl = IntegerLattice::span(dim, &translations)?;
        let quotient = lattice_quotient(&lattice, &refl)?;
        let mut cosets: Vec<Vec<i64>> = vec![vec![0; dim]];
        for (gen, order) in quotient.generators.iter().zip(&quotient.invariant_factors) {
            let g = lattice.coordinates(gen).expect("generator lies in the lattice");
            let mut next = Vec::new();
            for base in &cosets {
                for k in 0..*order {
                    next.push(base.iter().zip(&g).map(|(b, x)| b + k * x).collect());
                }
            }
            cosets = next;
        }
        let basis_f = DMatrix::from_fn(dim, dim, |i, j| rational::q_to_f64(lattice.basis()[j][i]));
        let lattice_inverse = basis_f.try_inverse().ok_or_else(|| Error::Dimension("degenerate lattice".into()))?;
        Ok(Self { flavor, dim, roots, coroots, levels, lattice, lattice_inverse, cosets, axes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lattice(&self) -> &IntegerLattice {
        &self.lattice
    }

    /// Ambient vectors of the coordinate axes.
    pub fn axes(&self) -> Option<&[QVec]> {
        self.axes.as_deref()
    }

    pub fn positive_roots(&self) -> &[QVec] {
        &self.roots
    }

    pub fn levels(&self) -> &[Q] {
        &self.levels
    }

    /// Number of translation classes not generated by reflections.
    pub fn extension_order(&self) -> usize {
        self.cosets.len()
    }

    /// Lattice vector in coordinates.
    pub fn lattice_vector(&self, coeffs: &[i64]) -> Vec<f64> {
        rational::to_f64(&self.lattice.vector(coeffs))
    }

    /// Finite Weyl group element `s_beta` applied to real coordinates.
    pub fn reflect_linear(&self, root: usize, x: &[f64]) -> Vec<f64> {
        let p = pair_f(&self.roots[root], x);
        x.iter().zip(&self.coroots[root]).map(|(xi, c)| xi - p * rational::q_to_f64(*c)).collect()
    }

    pub fn in_closed_alcove(&self, a: &[f64]) -> bool {
        self.violation(a).is_none()
    }

    fn violation(&self, a: &[f64]) -> Option<(usize, Q)> {
        let mut worst: Option<(usize, Q, f64)> = None;
        for (k, (root, level)) in self.roots.iter().zip(&self.levels).enumerate() {
            let p = pair_f(root, a);
            let top = rational::q_to_f64(*level);
            let (excess, wall) = if p < -WALL_TOL {
                (-p, q(0))
            } else if p > top + WALL_TOL {
                (p - top, *level)
            } else {
                continue;
            };
            if worst.as_ref().is_none_or(|w| excess > w.2 + WALL_TOL) {
                worst = Some((k, wall, excess));
            }
        }
        worst.map(|(k, wall, _)| (k, wall))
    }

    /// Applies one step to `(a, b)`.
    pub fn apply_step(&self, step: &BsStep, a: &mut [f64], b: &mut [f64]) {
        match step {
            BsStep::Shift { real, tau } => {
                for (x, d) in a.iter_mut().zip(self.lattice_vector(real)) {
                    *x += d;
                }
                for (x, d) in b.iter_mut().zip(self.lattice_vector(tau)) {
                    *x += d;
                }
            }
            BsStep::Reflect { root, level } => {
                let p = pair_f(&self.roots[*root], a) - rational::q_to_f64(*level);
                let pb = pair_f(&self.roots[*root], b);
                for ((x, y), c) in a.iter_mut().zip(b.iter_mut()).zip(&self.coroots[*root]) {
                    let c = rational::q_to_f64(*c);
                    *x -= p * c;
                    *y -= pb * c;
                }
            }
        }
    }

    fn inverse_step(step: &BsStep) -> BsStep {
        match step {
            BsStep::Shift { real, tau } => BsStep::Shift {
                real: real.iter().map(|x| -x).collect(),
                tau: tau.iter().map(|x| -x).collect(),
            },
            reflect => reflect.clone(),
        }
    }

    /// Real coordinates of `x` in the lattice basis.
    pub fn lattice_coordinates(&self, x: &[f64]) -> Vec<f64> {
        (&self.lattice_inverse * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
    }

    fn unit_cell_shift(&self, x: &[f64]) -> Vec<i64> {
        self.lattice_coordinates(x).iter().map(|c| -((c + 1e-10).floor() as i64)).collect()
    }

    /// Moves `a` into the closed alcove by reflections, recording the steps.
    fn reflect_into_alcove(&self, a: &mut [f64], b: &mut [f64], steps: &mut Vec<BsStep>) -> Result<()> {
        let mut count = 0;
        while let Some((root, level)) = self.violation(a) {
            count += 1;
            if count > MAX_STEPS {
                return Err(Error::NonConvergence(MAX_STEPS));
            }
            let step = BsStep::Reflect { root, level };
            self.apply_step(&step, a, b);
            steps.push(step);
        }
        Ok(())
    }

    /// Splits `u = a + b tau` into real coordinate vectors.
    pub fn split(u: &[C64], tau: C64) -> (Vec<f64>, Vec<f64>) {
        let b: Vec<f64> = u.iter().map(|z| z.im / tau.im).collect();
        let a = u.iter().zip(&b).map(|(z, bi)| z.re - bi * tau.re).collect();
        (a, b)
    }

    pub fn join(a: &[f64], b: &[f64], tau: C64) -> Vec<C64> {
        a.iter().zip(b).map(|(x, y)| C64::new(*x, 0.0) + tau * *y).collect()
    }

    pub fn reduce(&self, u: &[C64], tau: C64) -> Result<Reduction> {
        if u.len() != self.dim {
            return Err(Error::Dimension(format!("expected {} coordinates, got {}", self.dim, u.len())));
        }
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::InvalidModulus(tau));
        }
        if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("u"));
        }
        let (mut a, mut b) = Self::split(u, tau);
        let mut transcript = Vec::new();
        if !self.in_closed_alcove(&a) {
            let shift = self.unit_cell_shift(&a);
            if shift.iter().any(|&x| x != 0) {
                let step = BsStep::Shift { real: shift, tau: vec![0; self.dim] };
                self.apply_step(&step, &mut a, &mut b);
                transcript.push(step);
            }
            self.reflect_into_alcove(&mut a, &mut b, &mut transcript)?;
        }
        if self.cosets.len() > 1 {
            let mut best: Option<(Vec<f64>, Vec<f64>, Vec<BsStep>)> = None;
            for coset in &self.cosets {
                let (mut ca, mut cb) = (a.clone(), b.clone());
                let mut steps = Vec::new();
                if coset.iter().any(|&x| x != 0) {
                    let step = BsStep::Shift { real: coset.clone(), tau: vec![0; self.dim] };
                    self.apply_step(&step, &mut ca, &mut cb);
                    steps.push(step);
                    self.reflect_into_alcove(&mut ca, &mut cb, &mut steps)?;
                }
                if best.as_ref().is_none_or(|(ba, _, _)| lex_less(&ca, ba)) {
                    best = Some((ca, cb, steps));
                }
            }
            let (ba, bb, steps) = best.expect("at least the trivial coset");
            a = ba;
            b = bb;
            transcript.extend(steps);
        }
        let tau_shift = self.unit_cell_shift(&b);
        if tau_shift.iter().any(|&x| x != 0) {
            let step = BsStep::Shift { real: vec![0; self.dim], tau: tau_shift };
            self.apply_step(&step, &mut a, &mut b);
            transcript.push(step);
        }
        Ok(Reduction { reduced: Self::join(&a, &b, tau), transcript })
    }

    /// Undoes a transcript, recovering the original point from the reduced one.
    pub fn restore(&self, reduction: &Reduction, tau: C64) -> Vec<C64> {
        let (mut a, mut b) = Self::split(&reduction.reduced, tau);
        for step in reduction.transcript.iter().rev() {
            self.apply_step(&Self::inverse_step(step), &mut a, &mut b);
        }
        Self::join(&a, &b, tau)
    }
}

fn pair_f(form: &[Q], x: &[f64]) -> f64 {
    form.iter().zip(x).map(|(f, xi)| rational::q_to_f64(*f) * xi).sum()
}

fn lex_less(x: &[f64], y: &[f64]) -> bool {
    for (a, b) in x.iter().zip(y) {
        if (a - b).abs() > 1e-9 {
            return a < b;
        }
    }
    false
}

pub fn bs_reduce(reducer: &AlcoveReducer, u: &[C64], tau: C64) -> Result<Reduction> {
    reducer.reduce(u, tau)
}
