//! Integer lattices attached to an outer automorphism: the image of
//! `x -> nu(x) - x`, characteristic-class groups, invariant coweight and
//! coroot lattices, and reduction of Cartan positions to a fundamental domain.

mod integer;
mod reduce;

pub use reduce::{bs_reduce, AlcoveReducer, BsStep, Reduction, ReductionFlavor};

use crate::error::{Error, Result};
use crate::lie_twist::{build_outer, build_root_system, Family, OuterAutomorphism, RootSystem};
use crate::rational::{self, QVec, Q};
use integer::{hermite_rows, smith};
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

/// Integer span of linearly independent rational vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerLattice {
    ambient: usize,
    basis: Vec<QVec>,
}

impl IntegerLattice {
    /// Lattice spanned by `generators`; dependent generators are reduced to a basis.
    pub fn span(ambient: usize, generators: &[QVec]) -> Result<Self> {
        if generators.iter().any(|g| g.len() != ambient) {
            return Err(Error::Dimension(format!("lattice generators must have length {ambient}")));
        }
        let denom = generators.iter().fold(1i64, |acc, g| num_integer::lcm(acc, rational::common_denominator(g)));
        let rows: Vec<Vec<i128>> = generators
            .iter()
            .map(|g| g.iter().map(|x| i128::from(*x.numer()) * i128::from(denom / x.denom())).collect())
            .collect();
        let basis = hermite_rows(&rows)
            .into_iter()
            .map(|row| row.into_iter().map(|x| Q::new(to_i64(x), denom)).collect())
            .collect();
        Ok(Self { ambient, basis })
    }

    /// Lattice with exactly this basis; fails if the vectors are dependent.
    pub fn from_basis(ambient: usize, basis: Vec<QVec>) -> Result<Self> {
        if basis.iter().any(|g| g.len() != ambient) {
            return Err(Error::Dimension(format!("lattice basis vectors must have length {ambient}")));
        }
        if rational::rank(&basis) != basis.len() {
            return Err(Error::InvalidConfig("lattice basis is linearly dependent".into()));
        }
        Ok(Self { ambient, basis })
    }

    pub fn zero(ambient: usize) -> Self {
        Self { ambient, basis: Vec::new() }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[QVec] {
        &self.basis
    }

    /// Integer coordinates of `v`, if it belongs to the lattice.
    pub fn coordinates(&self, v: &[Q]) -> Option<Vec<i64>> {
        let c = rational::solve_in_basis(&self.basis, v)?;
        rational::is_integral(&c).then(|| c.iter().map(|x| x.to_integer()).collect())
    }

    pub fn contains(&self, v: &[Q]) -> bool {
        self.coordinates(v).is_some()
    }

    pub fn contains_lattice(&self, other: &IntegerLattice) -> bool {
        other.basis.iter().all(|b| self.contains(b))
    }

    pub fn vector(&self, coeffs: &[i64]) -> QVec {
        self.basis
            .iter()
            .zip(coeffs)
            .fold(rational::zeros(self.ambient), |acc, (b, &c)| rational::add(&acc, &rational::scale(rational::q(c), b)))
    }

    /// Lattice generated by the images of the basis under a linear map.
    pub fn image(&self, map: impl Fn(&[Q]) -> QVec) -> Result<Self> {
        let gens: Vec<QVec> = self.basis.iter().map(|b| map(b)).collect();
        Self::span(self.ambient, &gens)
    }
}

fn to_i64(x: i128) -> i64 {
    x.to_i64().expect("lattice entries fit in i64")
}

/// Finite abelian group `sup / sub` in invariant-factor form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CharClassGroup {
    /// Invariant factors `d_1 | d_2 | ...`, all at least 2.
    pub invariant_factors: Vec<i64>,
    /// Vectors of the larger lattice whose classes generate the cyclic factors.
    #[serde(serialize_with = "serialize_qvecs")]
    pub generators: Vec<QVec>,
}

fn serialize_qvecs<S: serde::Serializer>(v: &[QVec], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.iter().map(ToString::to_string).collect::<Vec<_>>())?;
    }
    seq.end()
}

impl CharClassGroup {
    pub fn order(&self) -> i64 {
        self.invariant_factors.iter().product()
    }

    pub fn is_trivial(&self) -> bool {
        self.invariant_factors.is_empty()
    }

    /// `Z_2 + Z_2` style label; `1` for the trivial group.
    pub fn label(&self) -> String {
        if self.is_trivial() {
            return "1".into();
        }
        self.invariant_factors.iter().map(|d| format!("Z_{d}")).collect::<Vec<_>>().join(" + ")
    }
}

/// `sup / sub` for lattices of equal rank.
pub fn lattice_quotient(sup: &IntegerLattice, sub: &IntegerLattice) -> Result<CharClassGroup> {
    if sup.ambient != sub.ambient {
        return Err(Error::Dimension("lattices live in different spaces".into()));
    }
    if sup.rank() != sub.rank() {
        return Err(Error::NotASublattice(format!("rank {} in rank {}: quotient is infinite", sub.rank(), sup.rank())));
    }
    let coords: Vec<Vec<i128>> = sub
        .basis
        .iter()
        .map(|b| {
            sup.coordinates(b)
                .map(|c| c.into_iter().map(i128::from).collect())
                .ok_or_else(|| Error::NotASublattice(format!("{} is not in the larger lattice", rational::format_vec(b))))
        })
        .collect::<Result<_>>()?;
    let (diag, w) = smith(&coords);
    let mut invariant_factors = Vec::new();
    let mut generators = Vec::new();
    for (d, row) in diag.iter().zip(&w) {
        if *d >= 2 {
            invariant_factors.push(to_i64(*d));
            generators.push(sup.vector(&row.iter().map(|&x| to_i64(x)).collect::<Vec<_>>()));
        }
    }
    Ok(CharClassGroup { invariant_factors, generators })
}

/// Lattice spanned by `nu(g) - g` for `g` in `lattice`.
pub fn upsilon_image(lattice: &IntegerLattice, nu: &OuterAutomorphism) -> Result<IntegerLattice> {
    lattice.image(|b| rational::sub(&nu.apply(b), b))
}

/// Rational membership in the image of `nu - 1`: the orbit sum vanishes.
pub fn in_upsilon_span(nu: &OuterAutomorphism, x: &[Q]) -> bool {
    rational::is_zero(&nu.orbit_sum(x))
}

pub fn weight_lattice(rs: &RootSystem) -> IntegerLattice {
    IntegerLattice::from_basis(rs.dim(), rs.fundamental_weights.clone()).expect("fundamental weights are independent")
}

pub fn root_lattice(rs: &RootSystem) -> IntegerLattice {
    IntegerLattice::from_basis(rs.dim(), rs.simple_roots.clone()).expect("simple roots are independent")
}

/// One row of the characteristic-class table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CharClassRow {
    pub algebra: String,
    pub invariant_subalgebra: String,
    /// `P^Y / Q^Y`.
    pub twisted: CharClassGroup,
    /// `P / Q`.
    pub center: CharClassGroup,
    /// 1-based indices of the fundamental weights generating `twisted`.
    pub weight_generators: Vec<usize>,
}

/// Characteristic-class groups of the bundle twisted by an order-`order`
/// outer automorphism.
pub fn char_class_group(family: Family, rank: usize, order: u32) -> Result<CharClassRow> {
    let rs = build_root_system(family, rank)?;
    let nu = build_outer(&rs, order)?;
    if order == 1 {
        return Err(Error::UnsupportedOrder { family: family.to_string(), rank, order });
    }
    let p = weight_lattice(&rs);
    let q = root_lattice(&rs);
    let p_up = upsilon_image(&p, &nu)?;
    let q_up = upsilon_image(&q, &nu)?;
    let twisted = lattice_quotient(&p_up, &q_up)?;
    let center = lattice_quotient(&p, &q)?;

    // greedy: smallest-index weights whose images enlarge the generated subgroup
    let mut chosen: Vec<usize> = Vec::new();
    let mut span: Vec<QVec> = q_up.basis().to_vec();
    let mut index = twisted.order();
    for (j, w) in rs.fundamental_weights.iter().enumerate() {
        if index == 1 {
            break;
        }
        let image = rational::sub(&nu.apply(w), w);
        let mut trial = span.clone();
        trial.push(image);
        let lattice = IntegerLattice::span(rs.dim(), &trial)?;
        let next = lattice_quotient(&p_up, &lattice)?.order();
        if next < index {
            chosen.push(j + 1);
            span = trial;
            index = next;
        }
    }
    Ok(CharClassRow {
        algebra: format!("{family}{rank}"),
        invariant_subalgebra: invariant_subalgebra_name(family, rank, order),
        twisted,
        center,
        weight_generators: chosen,
    })
}

fn invariant_subalgebra_name(family: Family, rank: usize, order: u32) -> String {
    match (family, order) {
        (Family::A, _) if rank % 2 == 1 => format!("C{}", rank.div_ceil(2)),
        (Family::A, _) => format!("B{}", rank / 2),
        (Family::D, 3) => "G2".into(),
        (Family::D, _) => format!("B{}", rank - 1),
        (Family::E6, _) => "F4".into(),
    }
}

/// Outcome of solving `nu(w_j) - w_j = xi` modulo `Q^Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightShift {
    /// `xi` is already trivial modulo `Q^Y`.
    NoShift,
    /// 1-based index of the fundamental weight.
    Fundamental(usize),
    NoSolution,
}

pub fn weight_shift_solution(rs: &RootSystem, nu: &OuterAutomorphism, xi: &[Q]) -> Result<WeightShift> {
    let q_up = upsilon_image(&root_lattice(rs), nu)?;
    if q_up.contains(xi) || (q_up.rank() == 0 && rational::is_zero(xi)) {
        return Ok(WeightShift::NoShift);
    }
    if !weight_lattice(rs).contains(xi) {
        return Ok(WeightShift::NoSolution);
    }
    for (j, w) in rs.fundamental_weights.iter().enumerate() {
        let diff = rational::sub(&rational::sub(&nu.apply(w), w), xi);
        if q_up.contains(&diff) {
            return Ok(WeightShift::Fundamental(j + 1));
        }
    }
    Ok(WeightShift::NoSolution)
}

/// Invariant coweight and coroot lattices of the invariant subalgebra.
#[derive(Debug, Clone)]
pub struct InvariantLattices {
    /// Fundamental coweights dual to the restricted simple roots.
    pub coweights: Vec<QVec>,
    pub coweight_lattice: IntegerLattice,
    pub coroot_lattice: IntegerLattice,
    pub quotient: CharClassGroup,
}

pub fn invariant_lattices(rs: &RootSystem, nu: &OuterAutomorphism) -> Result<InvariantLattices> {
    let mut coweights = Vec::new();
    for (j, w) in rs.fundamental_weights.iter().enumerate() {
        let orbit_min = {
            let mut k = nu.root_permutation[j];
            let mut m = j;
            while k != j {
                m = m.min(k);
                k = nu.root_permutation[k];
            }
            m
        };
        if orbit_min != j {
            continue;
        }
        if nu.root_permutation[j] == j {
            coweights.push(w.clone());
        } else {
            coweights.push(nu.orbit_sum(w));
        }
    }
    let coweight_lattice = IntegerLattice::from_basis(rs.dim(), coweights.clone())?;
    // coroots of every restricted root, including doubled ones of type BC
    let coroots: Vec<QVec> = restricted_roots(rs, nu).iter().map(|b| coroot(rs, b)).collect();
    let coroot_lattice = IntegerLattice::span(rs.dim(), &coroots)?;
    let quotient = lattice_quotient(&coweight_lattice, &coroot_lattice)?;
    Ok(InvariantLattices { coweights, coweight_lattice, coroot_lattice, quotient })
}

/// Distinct restrictions of the roots of `rs` to the invariant subspace.
pub fn restricted_roots(rs: &RootSystem, nu: &OuterAutomorphism) -> Vec<QVec> {
    let mut out: Vec<QVec> = Vec::new();
    for root in &rs.roots {
        let avg = nu.average(root);
        if !avg.iter().all(Zero::is_zero) && !out.contains(&avg) {
            out.push(avg);
        }
    }
    out
}

pub fn coroot(rs: &RootSystem, beta: &[Q]) -> QVec {
    rational::scale(rational::q(2) / rs.pair(beta, beta), beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn quotient_of_diagonal_sublattice() {
        let sup = IntegerLattice::from_basis(2, vec![vec![q(1), q(0)], vec![q(0), q(1)]]).unwrap();
        let sub = IntegerLattice::from_basis(2, vec![vec![q(2), q(0)], vec![q(0), q(4)]]).unwrap();
        let g = lattice_quotient(&sup, &sub).unwrap();
        assert_eq!(g.invariant_factors, vec![2, 4]);
        assert_eq!(g.order(), 8);
        assert!(lattice_quotient(&sup, &sup).unwrap().is_trivial());
    }

    #[test]
    fn quotient_rejects_non_sublattice() {
        let a = IntegerLattice::from_basis(1, vec![vec![q(2)]]).unwrap();
        let b = IntegerLattice::from_basis(1, vec![vec![q(3)]]).unwrap();
        assert!(matches!(lattice_quotient(&a, &b), Err(Error::NotASublattice(_))));
        let z = IntegerLattice::zero(1);
        assert!(matches!(lattice_quotient(&a, &z), Err(Error::NotASublattice(_))));
    }

    #[test]
    fn span_reduces_dependent_generators() {
        let l = IntegerLattice::span(2, &[vec![q(2), q(0)], vec![q(3), q(0)], vec![q(0), rational::frac(1, 2)]]).unwrap();
        assert_eq!(l.rank(), 2);
        assert!(l.contains(&[q(1), q(0)]));
        assert!(!l.contains(&[q(0), rational::frac(1, 4)]));
        assert!(IntegerLattice::from_basis(2, vec![vec![q(1), q(1)], vec![q(2), q(2)]]).is_err());
    }

    #[test]
    fn upsilon_of_identity_is_zero() {
        let rs = build_root_system(Family::A, 3).unwrap();
        let id = build_outer(&rs, 1).unwrap();
        assert_eq!(upsilon_image(&weight_lattice(&rs), &id).unwrap().rank(), 0);
    }

    #[test]
    fn weight_shift_of_zero_is_no_shift() {
        let rs = build_root_system(Family::A, 3).unwrap();
        let nu = build_outer(&rs, 2).unwrap();
        assert_eq!(weight_shift_solution(&rs, &nu, &rational::zeros(4)).unwrap(), WeightShift::NoShift);
        let off = vec![rational::frac(1, 3), q(0), q(0), rational::frac(-1, 3)];
        assert_eq!(weight_shift_solution(&rs, &nu, &off).unwrap(), WeightShift::NoSolution);
    }
}
