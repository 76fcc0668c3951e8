//! Root systems of types A, D, E6, their diagram automorphisms, and the
//! folded root data of the invariant subalgebra.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, q, QMat, QVec, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    D,
    E6,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::A => write!(f, "A"),
            Family::D => write!(f, "D"),
            Family::E6 => write!(f, "E"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSystem {
    pub family: Family,
    pub rank: usize,
    /// Pairing on the ambient coordinates (identity for A and D, the Cartan
    /// matrix for E6 in root coordinates).
    pub gram: QMat,
    pub simple_roots: Vec<QVec>,
    pub fundamental_weights: Vec<QVec>,
    pub cartan_matrix: Vec<Vec<i64>>,
    /// All roots, positive roots first in order of height.
    pub roots: Vec<QVec>,
}

fn unsupported(family: Family, rank: usize) -> Error {
    Error::UnsupportedAlgebra { family: family.to_string(), rank }
}

/// Builds the exact root datum of `A_rank` (`rank >= 2`), `D_rank` (`rank >= 4`)
/// or `E6`.
pub fn build_root_system(family: Family, rank: usize) -> Result<RootSystem> {
    let (gram, simple_roots, fundamental_weights) = match family {
        Family::A if rank >= 2 => type_a(rank),
        Family::D if rank >= 4 => type_d(rank),
        Family::E6 if rank == 6 => type_e6(),
        _ => return Err(unsupported(family, rank)),
    };
    let cartan_matrix = simple_roots
        .iter()
        .map(|a| {
            simple_roots
                .iter()
                .map(|b| {
                    let v = q(2) * rational::pair(&gram, a, b) / rational::pair(&gram, b, b);
                    v.to_integer()
                })
                .collect()
        })
        .collect();
    let mut rs = RootSystem { family, rank, gram, simple_roots, fundamental_weights, cartan_matrix, roots: vec![] };
    rs.roots = rs.weyl_closure();
    Ok(rs)
}

fn type_a(rank: usize) -> (QMat, Vec<QVec>, Vec<QVec>) {
    let n = rank + 1;
    let simple = (0..rank).map(|j| rational::sub(&rational::unit(n, j), &rational::unit(n, j + 1))).collect();
    let weights = (1..=rank)
        .map(|j| {
            (0..n)
                .map(|i| if i < j { Q::new((n - j) as i64, n as i64) } else { Q::new(-(j as i64), n as i64) })
                .collect()
        })
        .collect();
    (rational::identity(n), simple, weights)
}

fn type_d(rank: usize) -> (QMat, Vec<QVec>, Vec<QVec>) {
    let n = rank;
    let mut simple: Vec<QVec> =
        (0..n - 1).map(|j| rational::sub(&rational::unit(n, j), &rational::unit(n, j + 1))).collect();
    simple.push(rational::add(&rational::unit(n, n - 2), &rational::unit(n, n - 1)));
    let half = Q::new(1, 2);
    let mut weights: Vec<QVec> =
        (1..=n - 2).map(|j| (0..n).map(|i| if i < j { Q::one() } else { Q::zero() }).collect()).collect();
    weights.push((0..n).map(|i| if i < n - 1 { half } else { -half }).collect());
    weights.push(vec![half; n]);
    (rational::identity(n), simple, weights)
}

/// E6 in root coordinates with the chain 1-2-3-4-5 and node 6 attached to 3.
fn type_e6() -> (QMat, Vec<QVec>, Vec<QVec>) {
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (2, 5)];
    let mut cartan = vec![vec![Q::zero(); 6]; 6];
    for (i, row) in cartan.iter_mut().enumerate() {
        row[i] = q(2);
    }
    for (a, b) in edges {
        cartan[a][b] = q(-1);
        cartan[b][a] = q(-1);
    }
    let simple = (0..6).map(|k| rational::unit(6, k)).collect();
    let inv = rational::inverse(&cartan).expect("E6 Cartan matrix is invertible");
    (cartan, simple, inv)
}

impl RootSystem {
    pub fn dim(&self) -> usize {
        self.gram.len()
    }

    pub fn pair(&self, a: &[Q], b: &[Q]) -> Q {
        rational::pair(&self.gram, a, b)
    }

    pub fn reflect(&self, root: &[Q], v: &[Q]) -> QVec {
        let c = q(2) * self.pair(root, v) / self.pair(root, root);
        rational::sub(v, &rational::scale(c, root))
    }

    /// Coefficients of `v` over the simple roots.
    pub fn simple_coordinates(&self, v: &[Q]) -> Option<QVec> {
        rational::solve_in_basis(&self.simple_roots, v)
    }

    pub fn height(&self, root: &[Q]) -> Q {
        self.simple_coordinates(root).map(|c| c.iter().sum()).unwrap_or_else(Q::zero)
    }

    /// Weyl vector `sum_j varpi_j`; it is positive on every positive root.
    pub fn rho(&self) -> QVec {
        self.fundamental_weights.iter().fold(rational::zeros(self.dim()), |acc, w| rational::add(&acc, w))
    }

    pub fn is_positive(&self, root: &[Q]) -> bool {
        self.pair(&self.rho(), root) > Q::zero()
    }

    /// `<varpi_j, alpha_k> = delta_jk` for all pairs.
    pub fn duality_holds(&self) -> bool {
        self.fundamental_weights.iter().enumerate().all(|(j, w)| {
            self.simple_roots.iter().enumerate().all(|(k, a)| {
                let expected = if j == k { Q::one() } else { Q::zero() };
                q(2) * self.pair(w, a) / self.pair(a, a) == expected
            })
        })
    }

    /// Determinant of the Cartan matrix, the order of `P / Q`.
    pub fn cartan_determinant(&self) -> i64 {
        let m: QMat = self.cartan_matrix.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect();
        rational::determinant(&m).to_integer()
    }

    fn weyl_closure(&self) -> Vec<QVec> {
        let mut seen: HashSet<QVec> = HashSet::new();
        let mut frontier: Vec<QVec> = self.simple_roots.clone();
        for r in &frontier {
            seen.insert(r.clone());
        }
        while let Some(r) = frontier.pop() {
            for s in &self.simple_roots {
                let image = self.reflect(s, &r);
                if seen.insert(image.clone()) {
                    frontier.push(image);
                }
            }
        }
        let mut roots: Vec<QVec> = seen.into_iter().collect();
        let rho = self.rho();
        roots.sort_by(|a, b| {
            let (ha, hb) = (self.pair(&rho, a), self.pair(&rho, b));
            let key = |h: Q| (h < Q::zero(), if h < Q::zero() { -h } else { h });
            key(ha).cmp(&key(hb)).then_with(|| b.cmp(a))
        });
        roots
    }
}

/// Diagram automorphism acting on the ambient coordinates of a root system.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterAutomorphism {
    pub order: u32,
    /// `root_permutation[j] = k` when `nu(alpha_j) = alpha_k`.
    pub root_permutation: Vec<usize>,
    /// Rows of the matrix acting on ambient column vectors.
    pub ambient: QMat,
}

/// Builds the diagram automorphism of the requested order.
pub fn build_outer(rs: &RootSystem, order: u32) -> Result<OuterAutomorphism> {
    let l = rs.rank;
    let bad = || Error::UnsupportedOrder { family: rs.family.to_string(), rank: l, order };
    let permutation: Vec<usize> = match (rs.family, order) {
        (_, 1) => (0..l).collect(),
        (Family::A, 2) => (0..l).map(|j| l - 1 - j).collect(),
        (Family::D, 2) => (0..l).map(|j| if j + 2 == l { l - 1 } else if j + 1 == l { l - 2 } else { j }).collect(),
        (Family::D, 3) if l == 4 => vec![2, 1, 3, 0],
        (Family::E6, 2) => vec![4, 3, 2, 1, 0, 5],
        _ => return Err(bad()),
    };
    let ambient = match (rs.family, order) {
        (_, 1) => rational::identity(rs.dim()),
        (Family::A, 2) => {
            let n = rs.dim();
            (0..n).map(|i| rational::scale(q(-1), &rational::unit(n, n - 1 - i))).collect()
        }
        (Family::D, 2) => {
            let mut m = rational::identity(l);
            m[l - 1][l - 1] = q(-1);
            m
        }
        _ => {
            // the simple roots span the ambient space: M S = S'
            let s = rational::transpose(&rs.simple_roots);
            let images: Vec<QVec> = permutation.iter().map(|&k| rs.simple_roots[k].clone()).collect();
            let s_img = rational::transpose(&images);
            rational::mat_mul(&s_img, &rational::inverse(&s).expect("simple roots form a basis"))
        }
    };
    Ok(OuterAutomorphism { order, root_permutation: permutation, ambient })
}

impl OuterAutomorphism {
    pub fn apply(&self, v: &[Q]) -> QVec {
        rational::mat_vec(&self.ambient, v)
    }

    pub fn apply_power(&self, v: &[Q], power: u32) -> QVec {
        (0..power).fold(v.to_vec(), |acc, _| self.apply(&acc))
    }

    /// `(1/r) sum_j nu^j v`, the restriction to the invariant Cartan subalgebra.
    pub fn average(&self, v: &[Q]) -> QVec {
        let sum = self.orbit_sum(v);
        rational::scale(Q::new(1, self.order as i64), &sum)
    }

    pub fn orbit_sum(&self, v: &[Q]) -> QVec {
        (0..self.order).fold(rational::zeros(v.len()), |acc, j| rational::add(&acc, &self.apply_power(v, j)))
    }

    pub fn orbit(&self, v: &[Q]) -> Vec<QVec> {
        let mut out = vec![v.to_vec()];
        let mut cur = self.apply(v);
        while cur != v {
            out.push(cur.clone());
            cur = self.apply(&cur);
        }
        out
    }

    pub fn is_identity_power(&self) -> bool {
        let n = self.ambient.len();
        (0..n).all(|k| {
            let e = rational::unit(n, k);
            self.apply_power(&e, self.order) == e
        })
    }
}

/// Root data of the invariant subalgebra `g_0` and of the `g_0`-module `g_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Folding {
    /// Long roots of `g_0`.
    pub long: Vec<QVec>,
    /// Short roots of `g_0`.
    pub short: Vec<QVec>,
    /// Simple roots of `g_0`, ordered by the smallest simple-root index in the
    /// corresponding orbit.
    pub simple: Vec<QVec>,
    /// Restricted weights of the root vectors in grade one.
    pub grade_one_weights: Vec<QVec>,
    /// Highest weight of grade one.
    pub highest: QVec,
    /// Coefficients of `highest` over `simple`.
    pub marks: Vec<i64>,
}

impl Folding {
    pub fn roots(&self) -> Vec<QVec> {
        self.long.iter().chain(&self.short).cloned().collect()
    }

    pub fn rank(&self) -> usize {
        self.simple.len()
    }
}

/// A fixed root `beta` of an order-two automorphism lies in `g_1` exactly when
/// `beta = alpha + nu(alpha)` for a root with `(alpha, nu alpha) = -1`.
pub fn fixed_root_is_odd(rs: &RootSystem, nu: &OuterAutomorphism, beta: &[Q]) -> bool {
    nu.order == 2
        && rs.roots.iter().any(|a| {
            let na = nu.apply(a);
            na != *a && rs.pair(a, &na) == q(-1) && rational::add(a, &na) == beta
        })
}

pub fn orbit_decompose(rs: &RootSystem, nu: &OuterAutomorphism) -> Folding {
    let mut invariant: BTreeSet<QVec> = BTreeSet::new();
    let mut grade_one: BTreeSet<QVec> = BTreeSet::new();
    for root in &rs.roots {
        let image = nu.apply(root);
        if image == *root {
            if fixed_root_is_odd(rs, nu, root) {
                grade_one.insert(root.clone());
            } else {
                invariant.insert(root.clone());
                if nu.order == 1 {
                    grade_one.insert(root.clone());
                }
            }
        } else {
            let avg = nu.average(root);
            invariant.insert(avg.clone());
            grade_one.insert(avg);
        }
    }
    let norm = |v: &QVec| rs.pair(v, v);
    let max_norm = invariant.iter().map(norm).max().unwrap_or_else(Q::zero);
    let (long, short): (Vec<QVec>, Vec<QVec>) = invariant.into_iter().partition(|v| norm(v) == max_norm);

    let mut orbit_reps: Vec<usize> = Vec::new();
    for j in 0..rs.rank {
        let mut k = nu.root_permutation[j];
        let mut min = j;
        while k != j {
            min = min.min(k);
            k = nu.root_permutation[k];
        }
        if min == j {
            orbit_reps.push(j);
        }
    }
    let simple: Vec<QVec> = orbit_reps.iter().map(|&j| nu.average(&rs.simple_roots[j])).collect();

    let rho = rs.rho();
    let grade_one_weights: Vec<QVec> = grade_one.into_iter().collect();
    let highest = grade_one_weights
        .iter()
        .max_by(|a, b| rs.pair(&rho, a).cmp(&rs.pair(&rho, b)).then_with(|| a.cmp(b)))
        .cloned()
        .unwrap_or_else(|| rational::zeros(rs.dim()));
    let marks = rational::solve_in_basis(&simple, &highest)
        .map(|c| c.iter().map(|x| x.to_integer()).collect())
        .unwrap_or_default();
    Folding { long, short, simple, grade_one_weights, highest, marks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_algebras_without_outer_automorphism() {
        assert!(matches!(build_root_system(Family::A, 1), Err(Error::UnsupportedAlgebra { .. })));
        assert!(build_root_system(Family::D, 3).is_err());
        assert!(build_root_system(Family::E6, 5).is_err());
    }

    #[test]
    fn root_counts() {
        assert_eq!(build_root_system(Family::A, 3).unwrap().roots.len(), 12);
        assert_eq!(build_root_system(Family::D, 5).unwrap().roots.len(), 40);
        assert_eq!(build_root_system(Family::E6, 6).unwrap().roots.len(), 72);
    }

    #[test]
    fn rejects_bad_orders() {
        let a = build_root_system(Family::A, 3).unwrap();
        assert!(matches!(build_outer(&a, 3), Err(Error::UnsupportedOrder { .. })));
        let d5 = build_root_system(Family::D, 5).unwrap();
        assert!(build_outer(&d5, 3).is_err());
    }

    #[test]
    fn positive_roots_come_first() {
        let rs = build_root_system(Family::D, 4).unwrap();
        let half = rs.roots.len() / 2;
        assert!(rs.roots[..half].iter().all(|r| rs.is_positive(r)));
        assert!(rs.roots[half..].iter().all(|r| !rs.is_positive(r)));
    }
}
