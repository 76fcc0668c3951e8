//! Exact rational vectors and matrices for root and lattice data.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

pub type Q = Ratio<i64>;
pub type QVec = Vec<Q>;
pub type QMat = Vec<Vec<Q>>;

pub fn q(n: i64) -> Q {
    Q::from_integer(n)
}

pub fn frac(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

pub fn zeros(n: usize) -> QVec {
    vec![Q::zero(); n]
}

pub fn unit(n: usize, k: usize) -> QVec {
    let mut v = zeros(n);
    v[k] = Q::one();
    v
}

pub fn identity(n: usize) -> QMat {
    (0..n).map(|k| unit(n, k)).collect()
}

pub fn add(a: &[Q], b: &[Q]) -> QVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> QVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(s: Q, a: &[Q]) -> QVec {
    a.iter().map(|x| s * x).collect()
}

pub fn is_zero(a: &[Q]) -> bool {
    a.iter().all(Zero::is_zero)
}

/// `a^T G b` for a symmetric Gram matrix `G`.
pub fn pair(gram: &[QVec], a: &[Q], b: &[Q]) -> Q {
    let mut s = Q::zero();
    for (i, row) in gram.iter().enumerate() {
        if a[i].is_zero() {
            continue;
        }
        for (j, g) in row.iter().enumerate() {
            if !g.is_zero() && !b[j].is_zero() {
                s += a[i] * g * b[j];
            }
        }
    }
    s
}

/// `M v` with `M` given by rows.
pub fn mat_vec(m: &[QVec], v: &[Q]) -> QVec {
    m.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn mat_mul(a: &[QVec], b: &[QVec]) -> QMat {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[QVec]) -> QMat {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

/// Row-reduced echelon form; returns the reduced rows and the pivot columns.
pub fn rref(rows: &[QVec]) -> (QMat, Vec<usize>) {
    let mut m: QMat = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][col].recip();
        for x in m[r].iter_mut() {
            *x *= inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][col].is_zero() {
                let f = m[i][col];
                let pivot_row = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[QVec]) -> usize {
    rref(rows).1.len()
}

/// Solves `sum_i c_i basis_i = target`; `None` if `target` is outside the span
/// or the basis is dependent.
pub fn solve_in_basis(basis: &[QVec], target: &[Q]) -> Option<QVec> {
    let n = basis.len();
    if n == 0 {
        return is_zero(target).then(Vec::new);
    }
    let dim = target.len();
    // augmented system: columns are basis vectors
    let rows: QMat = (0..dim)
        .map(|i| {
            let mut row: QVec = basis.iter().map(|b| b[i]).collect();
            row.push(target[i]);
            row
        })
        .collect();
    let (red, pivots) = rref(&rows);
    if pivots.contains(&n) || pivots.len() < n {
        return None;
    }
    let mut sol = zeros(n);
    for (row, &p) in red.iter().zip(&pivots) {
        sol[p] = row[n];
    }
    Some(sol)
}

pub fn inverse(m: &[QVec]) -> Option<QMat> {
    let n = m.len();
    let rows: QMat = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend(unit(n, i));
            r
        })
        .collect();
    let (red, pivots) = rref(&rows);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(red.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn determinant(m: &[QVec]) -> Q {
    let mut a = m.to_vec();
    let n = a.len();
    let mut det = Q::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&i| !a[i][col].is_zero()) else { return Q::zero() };
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        det *= a[col][col];
        let pivot_row = a[col].clone();
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            if !f.is_zero() {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
    }
    det
}

pub fn is_integral(v: &[Q]) -> bool {
    v.iter().all(Ratio::is_integer)
}

/// Least common multiple of the denominators.
pub fn common_denominator(v: &[Q]) -> i64 {
    v.iter().fold(1, |acc, x| acc.lcm(x.denom()))
}

pub fn to_f64(v: &[Q]) -> Vec<f64> {
    v.iter().map(|x| *x.numer() as f64 / *x.denom() as f64).collect()
}

pub fn q_to_f64(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Canonical representative of a rational phase in `[0, 1)`.
pub fn mod_one(x: Q) -> Q {
    x - x.floor()
}

pub fn abs(x: Q) -> Q {
    x.abs()
}

pub fn format_vec(v: &[Q]) -> String {
    let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse_agree() {
        let m = vec![vec![q(2), q(-1)], vec![q(-1), q(2)]];
        let inv = inverse(&m).unwrap();
        assert_eq!(mat_mul(&m, &inv), identity(2));
        assert_eq!(determinant(&m), q(3));
        let sol = solve_in_basis(&m, &[q(1), q(1)]).unwrap();
        assert_eq!(sol, vec![q(1), q(1)]);
    }

    #[test]
    fn solve_rejects_outside_span() {
        let basis = vec![vec![q(1), q(0), q(0)]];
        assert!(solve_in_basis(&basis, &[q(0), q(1), q(0)]).is_none());
        assert!(inverse(&[vec![q(1), q(2)], vec![q(2), q(4)]]).is_none());
    }

    #[test]
    fn phases_reduce_mod_one() {
        assert_eq!(mod_one(frac(-1, 3)), frac(2, 3));
        assert_eq!(mod_one(frac(7, 2)), frac(1, 2));
    }
}
