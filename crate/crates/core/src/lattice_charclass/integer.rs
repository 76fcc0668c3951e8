//! Integer row reduction: Hermite basis extraction and Smith normal form.

use num_integer::Integer;

pub(crate) type IMat = Vec<Vec<i128>>;

/// Row-echelon integer basis of the row lattice of `rows` (zero rows dropped).
pub(crate) fn hermite_rows(rows: &[Vec<i128>]) -> IMat {
    let mut m: IMat = rows.iter().filter(|r| r.iter().any(|&x| x != 0)).cloned().collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut pivot_row = 0;
    for col in 0..ncols {
        if pivot_row == m.len() {
            break;
        }
        while let Some(best) = (pivot_row..m.len()).filter(|&i| m[i][col] != 0).min_by_key(|&i| m[i][col].abs()) {
            m.swap(pivot_row, best);
            let mut done = true;
            for i in pivot_row + 1..m.len() {
                if m[i][col] != 0 {
                    let f = Integer::div_floor(&m[i][col], &m[pivot_row][col]);
                    let pr = m[pivot_row].clone();
                    for (x, y) in m[i].iter_mut().zip(&pr) {
                        *x -= f * y;
                    }
                    if m[i][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if m[pivot_row][col] != 0 {
            if m[pivot_row][col] < 0 {
                m[pivot_row].iter_mut().for_each(|x| *x = -*x);
            }
            // reduce the entries above the pivot
            let pr = m[pivot_row].clone();
            for row in m.iter_mut().take(pivot_row) {
                let f = Integer::div_floor(&row[col], &pr[col]);
                if f != 0 {
                    for (x, y) in row.iter_mut().zip(&pr) {
                        *x -= f * y;
                    }
                }
            }
            pivot_row += 1;
        }
    }
    m.truncate(pivot_row);
    m.retain(|r| r.iter().any(|&x| x != 0));
    m
}

/// Smith normal form of a square matrix `c`. Returns the diagonal and the
/// matrix `w = V^{-1}` for `U c V = diag`, so the rows of `w` express the new
/// basis of the column space in terms of the old one.
pub(crate) fn smith(c: &[Vec<i128>]) -> (Vec<i128>, IMat) {
    let n = c.len();
    let mut a: IMat = c.to_vec();
    let mut w: IMat = (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect();

    let col_add = |a: &mut IMat, w: &mut IMat, dst: usize, src: usize, f: i128| {
        for row in a.iter_mut() {
            row[dst] += f * row[src];
        }
        // inverse operation on w: row_src -= f * row_dst
        let rd = w[dst].clone();
        for (x, y) in w[src].iter_mut().zip(&rd) {
            *x -= f * y;
        }
    };

    for t in 0..n {
        loop {
            let Some((pi, pj)) = (t..n)
                .flat_map(|i| (t..n).map(move |j| (i, j)))
                .filter(|&(i, j)| a[i][j] != 0)
                .min_by_key(|&(i, j)| a[i][j].abs())
            else {
                return (diag_of(&a), w);
            };
            a.swap(t, pi);
            if pj != t {
                for row in a.iter_mut() {
                    row.swap(t, pj);
                }
                w.swap(t, pj);
            }
            let p = a[t][t];
            let mut clean = true;
            for i in t + 1..n {
                let f = Integer::div_floor(&a[i][t], &p);
                if f != 0 {
                    let pr = a[t].clone();
                    for (x, y) in a[i].iter_mut().zip(&pr) {
                        *x -= f * y;
                    }
                }
                clean &= a[i][t] == 0;
            }
            for j in t + 1..n {
                let f = Integer::div_floor(&a[t][j], &p);
                if f != 0 {
                    col_add(&mut a, &mut w, j, t, -f);
                }
                clean &= a[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // divisibility of the remaining block by the pivot
            if let Some(i) = (t + 1..n).find(|&i| (t + 1..n).any(|j| a[i][j] % p != 0)) {
                let ri = a[i].clone();
                for (x, y) in a[t].iter_mut().zip(&ri) {
                    *x += y;
                }
                continue;
            }
            break;
        }
        if a[t][t] < 0 {
            a[t].iter_mut().for_each(|x| *x = -*x);
        }
    }
    (diag_of(&a), w)
}

fn diag_of(a: &IMat) -> Vec<i128> {
    (0..a.len()).map(|i| a[i][i].abs()).collect()
}
