use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{multiplicities, tensor_product, Representation};
use crate::error::Result;
use crate::group::{GroupTable, Irrep};

/// Multiplicity vectors of `τ_a ⊗ τ_b` for every ordered irrep pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorTable {
    pub labels: Vec<String>,
    /// `entries[a][b][t]` = multiplicity of `τ_t` in `τ_a ⊗ τ_b`.
    pub entries: Vec<Vec<Vec<usize>>>,
}

impl TensorTable {
    pub fn entry(&self, a: usize, b: usize) -> &[usize] {
        &self.entries[a][b]
    }

    pub fn format_entry(&self, a: usize, b: usize) -> String {
        format_multiplicities(&self.labels, self.entry(a, b))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.labels.len();
        (0..n).all(|a| (0..n).all(|b| self.entries[a][b] == self.entries[b][a]))
    }
}

impl fmt::Display for TensorTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, la) in self.labels.iter().enumerate() {
            for (b, lb) in self.labels.iter().enumerate() {
                writeln!(f, "{la} x {lb} = {}", self.format_entry(a, b))?;
            }
        }
        Ok(())
    }
}

fn format_multiplicities(labels: &[String], mult: &[usize]) -> String {
    let parts: Vec<String> = mult
        .iter()
        .zip(labels)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, l)| {
            if k == 1 {
                l.clone()
            } else {
                format!("{k} {l}")
            }
        })
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Decompose every `τ_a ⊗ τ_b` from characters.
pub fn tensor_decomposition_table(
    group: &Arc<GroupTable>,
    irreps: &[Irrep],
) -> Result<TensorTable> {
    let reps = irreps
        .iter()
        .map(|i| Representation::from_irrep(group.clone(), i))
        .collect::<Result<Vec<_>>>()?;
    let entries = reps
        .iter()
        .map(|a| {
            reps.iter()
                .map(|b| multiplicities(&tensor_product(a, b)?, irreps))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TensorTable {
        labels: irreps.iter().map(|i| i.label.clone()).collect(),
        entries,
    })
}

/// A tensor-product table as printed in a reference, entries given as irrep labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintedTensorTable {
    pub group: String,
    pub labels: Vec<String>,
    pub entries: Vec<Vec<Vec<String>>>,
}

impl PrintedTensorTable {
    fn from_rows(group: &str, labels: &[&str], rows: &[&[&[&str]]]) -> Self {
        PrintedTensorTable {
            group: group.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            entries: rows
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|cell| cell.iter().map(|s| s.to_string()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// Entry `(a, b)` as a multiplicity vector over [`Self::labels`].
    pub fn multiplicities(&self, a: usize, b: usize) -> Vec<usize> {
        let mut m = vec![0; self.labels.len()];
        for l in &self.entries[a][b] {
            if let Some(t) = self.labels.iter().position(|x| x == l) {
                m[t] += 1;
            }
        }
        m
    }
}

const D4_LABELS: [&str; 5] = [
    "tau_{1,1}",
    "tau_{1,-1}",
    "tau_{-1,1}",
    "tau_{-1,-1}",
    "tau_2",
];

/// The D4 tensor table exactly as printed, including its `τ_{-1,1}` row.
pub fn printed_d4_tensor_table() -> PrintedTensorTable {
    let [t11, t1m, tm1, tmm, t2] = D4_LABELS;
    PrintedTensorTable::from_rows(
        "d4",
        &D4_LABELS,
        &[
            &[&[t11], &[t1m], &[tm1], &[tmm], &[t2]],
            &[&[t1m], &[t11], &[tmm], &[tm1], &[t2]],
            &[&[tmm], &[tm1], &[t1m], &[t11], &[t2]],
            &[&[tmm], &[tm1], &[t1m], &[t11], &[t2]],
            &[&[t2], &[t2], &[t2], &[t2], &[t11, t1m, tm1, tmm]],
        ],
    )
}

/// The D6 tensor table exactly as printed.
pub fn printed_d6_tensor_table() -> PrintedTensorTable {
    let labels = [
        "tau_{1,1}",
        "tau_{1,-1}",
        "tau_{-1,1}",
        "tau_{-1,-1}",
        "tau_{2a}",
        "tau_{2b}",
    ];
    let [t11, t1m, tm1, tmm, ta, tb] = labels;
    PrintedTensorTable::from_rows(
        "d6",
        &labels,
        &[
            &[&[t11], &[t1m], &[tm1], &[tmm], &[ta], &[tb]],
            &[&[t1m], &[t11], &[tmm], &[tm1], &[ta], &[tb]],
            &[&[tmm], &[tm1], &[t1m], &[t11], &[tb], &[ta]],
            &[&[tmm], &[tm1], &[t1m], &[t11], &[tb], &[ta]],
            &[&[ta], &[ta], &[tb], &[tb], &[t11, t1m, tb], &[tm1, tmm, ta]],
            &[&[tb], &[tb], &[ta], &[ta], &[tm1, tmm, ta], &[t11, t1m, tb]],
        ],
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDisagreement {
    pub row: usize,
    pub col: usize,
    pub row_label: String,
    pub col_label: String,
    pub printed: String,
    pub computed: String,
}

/// Entries where the printed table differs from the character computation.
pub fn compare_tensor_tables(
    computed: &TensorTable,
    printed: &PrintedTensorTable,
) -> Vec<TableDisagreement> {
    let mut out = Vec::new();
    let n = computed.labels.len().min(printed.labels.len());
    for a in 0..n {
        for b in 0..n {
            let pm = printed.multiplicities(a, b);
            if pm != computed.entries[a][b] {
                out.push(TableDisagreement {
                    row: a,
                    col: b,
                    row_label: computed.labels[a].clone(),
                    col_label: computed.labels[b].clone(),
                    printed: format_multiplicities(&printed.labels, &pm),
                    computed: computed.format_entry(a, b),
                });
            }
        }
    }
    out
}

/// Rows or columns of a printed table contradicting `τ ⊗ 1 = 1 ⊗ τ = τ`;
/// `trivial` is the index of the trivial irrep. Returns `(row, col)` pairs.
pub fn printed_identity_violations(
    printed: &PrintedTensorTable,
    trivial: usize,
) -> Vec<(usize, usize)> {
    let n = printed.labels.len();
    let mut out = Vec::new();
    for a in 0..n {
        let expect: Vec<usize> = (0..n).map(|t| usize::from(t == a)).collect();
        if printed.multiplicities(a, trivial) != expect {
            out.push((a, trivial));
        }
        if a != trivial && printed.multiplicities(trivial, a) != expect {
            out.push((trivial, a));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_d4, build_d6};

    #[test]
    fn d4_table_from_characters() {
        let (g, irreps) = build_d4();
        let table = tensor_decomposition_table(&Arc::new(g), &irreps).unwrap();
        assert_eq!(table.entry(4, 4), &[1, 1, 1, 1, 0]);
        assert_eq!(table.entry(1, 1), &[1, 0, 0, 0, 0]);
        assert!(table.is_symmetric());
        let diffs = compare_tensor_tables(&table, &printed_d4_tensor_table());
        assert!(!diffs.is_empty());
        assert!(diffs.iter().all(|d| d.row == 2), "{diffs:?}");
        assert_eq!(diffs.len(), 4);
        let viol = printed_identity_violations(&printed_d4_tensor_table(), 0);
        assert_eq!(viol, vec![(2, 0)]);
    }

    #[test]
    fn d6_table_from_characters() {
        let (g, irreps) = build_d6();
        let table = tensor_decomposition_table(&Arc::new(g), &irreps).unwrap();
        // τ_2a ⊗ τ_2b = τ_{-1,1} + τ_{-1,-1} + τ_2a
        assert_eq!(table.entry(4, 5), &[0, 0, 1, 1, 1, 0]);
        assert!(table.is_symmetric());
        let diffs = compare_tensor_tables(&table, &printed_d6_tensor_table());
        assert!(diffs.iter().all(|d| d.row == 2), "{diffs:?}");
    }
}
