//! Characteristic-class table: tabulated group structures next to the ones
//! computed by [`crate::lattice_charclass`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_charclass::{char_class_group, invariant_lattices};
use crate::lie_twist::{build_outer, build_root_system, Family};

/// Group data of one algebra, as invariant factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupData {
    pub invariant_subalgebra: String,
    /// `P^Y / Q^Y`.
    pub twisted: Vec<i64>,
    /// `P / Q`.
    pub center: Vec<i64>,
    /// 1-based fundamental weights generating `twisted`.
    pub weight_generators: Vec<usize>,
    /// Invariant coweights modulo invariant coroots.
    pub coweight_quotient: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table2Row {
    /// 1-based row of the table this instance belongs to.
    pub row: usize,
    pub algebra: String,
    pub order: u32,
    pub expected: GroupData,
    pub computed: GroupData,
}

impl Table2Row {
    pub fn matches(&self) -> bool {
        self.expected == self.computed
    }

    /// Number of columns that differ, counting the coweight quotient.
    pub fn mismatches(&self) -> usize {
        let (e, c) = (&self.expected, &self.computed);
        [
            e.invariant_subalgebra != c.invariant_subalgebra,
            e.twisted != c.twisted,
            e.center != c.center,
            e.weight_generators != c.weight_generators,
            e.coweight_quotient != c.coweight_quotient,
        ]
        .into_iter()
        .filter(|&d| d)
        .count()
    }
}

fn cyclic(order: usize) -> Vec<i64> {
    if order > 1 {
        vec![order as i64]
    } else {
        vec![]
    }
}

/// Row index and tabulated data for a supported `(family, rank, order)`.
pub fn expected_row(family: Family, rank: usize, order: u32) -> Option<(usize, GroupData)> {
    let data = |row, sub: String, twisted, center, gens: Vec<usize>, coweight| {
        Some((row, GroupData { invariant_subalgebra: sub, twisted, center, weight_generators: gens, coweight_quotient: coweight }))
    };
    match (family, rank, order) {
        // A_{2n-1}
        (Family::A, r, 2) if r >= 3 && r % 2 == 1 => {
            let n = r.div_ceil(2);
            data(1, format!("C{n}"), cyclic(n), cyclic(2 * n), vec![1], vec![2])
        }
        // A_{2n}
        (Family::A, r, 2) if r >= 2 && r % 2 == 0 => {
            let n = r / 2;
            data(2, format!("B{n}"), cyclic(2 * n + 1), cyclic(2 * n + 1), vec![1], vec![])
        }
        // D_{n+1}
        (Family::D, r, 2) if r >= 4 => {
            let center = if r % 2 == 1 { vec![4] } else { vec![2, 2] };
            data(3, format!("B{}", r - 1), vec![2], center, vec![r - 1], vec![2])
        }
        (Family::D, 4, 3) => data(4, "G2".into(), vec![2, 2], vec![2, 2], vec![1, 3], vec![]),
        (Family::E6, 6, 2) => data(5, "F4".into(), vec![3], vec![3], vec![1], vec![]),
        _ => None,
    }
}

pub fn computed_row(family: Family, rank: usize, order: u32) -> Result<GroupData> {
    let row = char_class_group(family, rank, order)?;
    let rs = build_root_system(family, rank)?;
    let nu = build_outer(&rs, order)?;
    let inv = invariant_lattices(&rs, &nu)?;
    Ok(GroupData {
        invariant_subalgebra: row.invariant_subalgebra,
        twisted: row.twisted.invariant_factors,
        center: row.center.invariant_factors,
        weight_generators: row.weight_generators,
        coweight_quotient: inv.quotient.invariant_factors,
    })
}

pub fn table2_row(family: Family, rank: usize, order: u32) -> Result<Table2Row> {
    let (row, expected) = expected_row(family, rank, order)
        .ok_or_else(|| Error::UnsupportedOrder { family: family.to_string(), rank, order })?;
    Ok(Table2Row { row, algebra: format!("{family}{rank}"), order, expected, computed: computed_row(family, rank, order)? })
}

/// The parametric rows at `n = 2, 3, 4` and the two exceptional rows. The
/// `D_{n+1}` row starts at `D_4`, since `D_3` coincides with `A_3` and has
/// no separate root system here.
pub fn table2() -> Result<Vec<Table2Row>> {
    let mut instances: Vec<(Family, usize, u32)> = Vec::new();
    instances.extend([2, 3, 4].map(|n| (Family::A, 2 * n - 1, 2)));
    instances.extend([2, 3, 4].map(|n| (Family::A, 2 * n, 2)));
    instances.extend([3, 4, 5].map(|n| (Family::D, n + 1, 2)));
    instances.push((Family::D, 4, 3));
    instances.push((Family::E6, 6, 2));
    instances.into_iter().map(|(f, r, o)| table2_row(f, r, o)).collect()
}

fn group_label(factors: &[i64]) -> String {
    if factors.is_empty() {
        "1".into()
    } else {
        factors.iter().map(|d| format!("Z{d}")).collect::<Vec<_>>().join("+")
    }
}

fn weights_label(gens: &[usize]) -> String {
    gens.iter().map(|j| format!("w{j}")).collect::<Vec<_>>().join(",")
}

/// Aligned text table with one line per row instance.
pub fn render_table2(rows: &[Table2Row]) -> String {
    let header = ["row", "algebra", "order", "invariant", "Z^nu", "Z", "weights", "coweights", "expected", "status"];
    let lines: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let c = &r.computed;
            let e = &r.expected;
            vec![
                r.row.to_string(),
                r.algebra.clone(),
                r.order.to_string(),
                c.invariant_subalgebra.clone(),
                group_label(&c.twisted),
                group_label(&c.center),
                weights_label(&c.weight_generators),
                group_label(&c.coweight_quotient),
                format!(
                    "{} {} {} {} {}",
                    e.invariant_subalgebra,
                    group_label(&e.twisted),
                    group_label(&e.center),
                    weights_label(&e.weight_generators),
                    group_label(&e.coweight_quotient)
                ),
                if r.matches() { "match".into() } else { "MISMATCH".into() },
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|k| lines.iter().map(|l| l[k].len()).chain([header[k].len()]).max().unwrap_or(0))
        .collect();
    let fmt = |cells: Vec<&str>| {
        let mut s = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = fmt(header.to_vec());
    for l in &lines {
        out.push_str(&fmt(l.iter().map(String::as_str).collect()));
    }
    out
}
