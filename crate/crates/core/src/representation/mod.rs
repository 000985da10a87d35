//! Orthogonal representations of a finite group and their decomposition.

mod basis;
mod tables;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::group::{GroupTable, Irrep};
use crate::linalg::{max_abs_diff, sym_vec_len};
use crate::{MAX_MATERIALIZED_DIM, REP_TOL};

pub use basis::{symmetry_adapted_basis, BasisDocument, Block, SymmetryAdaptedBasis};
pub use tables::{
    compare_tensor_tables, printed_d4_tensor_table, printed_d6_tensor_table,
    printed_identity_violations, tensor_decomposition_table, PrintedTensorTable, TableDisagreement,
    TensorTable,
};

#[derive(Clone, Debug, PartialEq)]
pub enum RepForm {
    /// One orthogonal `d×d` matrix per element.
    Explicit(Vec<DMatrix<f64>>),
    /// One permutation of `0..d` per element; `π(g) e_i = e_{σ_g(i)}`.
    Permutation(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    group: Arc<GroupTable>,
    dim: usize,
    form: RepForm,
    character: Vec<f64>,
}

impl Representation {
    /// Explicit-form representation; checks homomorphism and orthogonality to
    /// [`REP_TOL`] and rejects non-finite entries.
    pub fn explicit(group: Arc<GroupTable>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        check_dim(group.order(), matrices.len())?;
        let dim = matrices.first().map_or(0, |m| m.nrows());
        for (g, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.ncols(),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("representation matrix"));
            }
            let err = max_abs_diff(&(m.transpose() * m), &DMatrix::identity(dim, dim));
            if err > REP_TOL {
                return Err(Error::InvalidMatrix {
                    element: g,
                    property: "orthogonality",
                    error: err,
                });
            }
        }
        for a in 0..group.order() {
            for b in 0..group.order() {
                let err = max_abs_diff(
                    &(&matrices[a] * &matrices[b]),
                    &matrices[group.compose(a, b)],
                );
                if err > REP_TOL {
                    return Err(Error::GroupLawViolation(a, b));
                }
            }
        }
        Ok(Self::explicit_unchecked(group, matrices))
    }

    fn explicit_unchecked(group: Arc<GroupTable>, matrices: Vec<DMatrix<f64>>) -> Self {
        let dim = matrices.first().map_or(0, |m| m.nrows());
        let character = matrices.iter().map(|m| m.trace()).collect();
        Representation {
            group,
            dim,
            form: RepForm::Explicit(matrices),
            character,
        }
    }

    pub fn from_irrep(group: Arc<GroupTable>, irrep: &Irrep) -> Result<Self> {
        Self::explicit(group, irrep.matrices.clone())
    }

    /// Every element acts as the identity on `R^dim`.
    pub fn identity(group: Arc<GroupTable>, dim: usize) -> Self {
        let action = vec![(0..dim).collect(); group.order()];
        Representation {
            character: vec![dim as f64; group.order()],
            group,
            dim,
            form: RepForm::Permutation(action),
        }
    }

    /// Direct sum of irreducible blocks, in the given order.
    pub fn block_diagonal(group: Arc<GroupTable>, blocks: &[&Irrep]) -> Result<Self> {
        let dim: usize = blocks.iter().map(|b| b.dim).sum();
        let matrices = (0..group.order())
            .map(|g| {
                let mut m = DMatrix::zeros(dim, dim);
                let mut off = 0;
                for b in blocks {
                    m.view_mut((off, off), (b.dim, b.dim))
                        .copy_from(&b.matrices[g]);
                    off += b.dim;
                }
                m
            })
            .collect();
        Self::explicit(group, matrices)
    }

    pub fn group(&self) -> &Arc<GroupTable> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> &RepForm {
        &self.form
    }

    pub fn is_permutation(&self) -> bool {
        matches!(self.form, RepForm::Permutation(_))
    }

    pub fn character(&self) -> &[f64] {
        &self.character
    }

    /// Dense matrix of `π(g)`.
    pub fn matrix(&self, g: usize) -> DMatrix<f64> {
        match &self.form {
            RepForm::Explicit(ms) => ms[g].clone(),
            RepForm::Permutation(ps) => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (i, &j) in ps[g].iter().enumerate() {
                    m[(j, i)] = 1.0;
                }
                m
            }
        }
    }

    /// `out = π(g) x`.
    pub fn apply_into(&self, g: usize, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        match &self.form {
            RepForm::Explicit(ms) => {
                let m = &ms[g];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..self.dim).map(|j| m[(i, j)] * x[j]).sum();
                }
            }
            RepForm::Permutation(ps) => {
                for (i, &j) in ps[g].iter().enumerate() {
                    out[j] = x[i];
                }
            }
        }
    }

    pub fn apply(&self, g: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(g, x, &mut out);
        out
    }

    /// `π(g)^-1 x`, computed through the inverse element.
    pub fn apply_inverse(&self, g: usize, x: &[f64]) -> Vec<f64> {
        self.apply(self.group.inverse(g), x)
    }

    /// `π(g) A π(g)ᵀ` for a `d×d` matrix.
    pub fn conjugate(&self, g: usize, a: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.form {
            RepForm::Explicit(ms) => &ms[g] * a * ms[g].transpose(),
            RepForm::Permutation(ps) => {
                let p = &ps[g];
                let mut out = DMatrix::zeros(self.dim, self.dim);
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        out[(p[i], p[j])] = a[(i, j)];
                    }
                }
                out
            }
        }
    }

    /// The same representation with every matrix materialised.
    pub fn to_explicit(&self) -> Result<Self> {
        if self.dim > MAX_MATERIALIZED_DIM {
            return Err(Error::TooLarge {
                dim: self.dim,
                limit: MAX_MATERIALIZED_DIM,
            });
        }
        let ms = (0..self.group.order()).map(|g| self.matrix(g)).collect();
        Ok(Self::explicit_unchecked(self.group.clone(), ms))
    }

    /// `Σ_g coeff[g] π(g)` as a dense matrix.
    pub fn weighted_sum(&self, coeff: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        match &self.form {
            RepForm::Explicit(ms) => {
                for (m, &c) in ms.iter().zip(coeff) {
                    if c != 0.0 {
                        out += m * c;
                    }
                }
            }
            RepForm::Permutation(ps) => {
                for (p, &c) in ps.iter().zip(coeff) {
                    if c != 0.0 {
                        for (i, &j) in p.iter().enumerate() {
                            out[(j, i)] += c;
                        }
                    }
                }
            }
        }
        out
    }

    fn same_group(&self, other: &Representation) -> Result<()> {
        if Arc::ptr_eq(&self.group, &other.group) || *self.group == *other.group {
            Ok(())
        } else {
            Err(Error::GroupMismatch(
                self.group.name.clone(),
                other.group.name.clone(),
            ))
        }
    }
}

/// Permutation representation of `group` acting on `0..d`.
///
/// Each `action[g]` must be a bijection and `action[g1] ∘ action[g2]` must
/// equal `action[g1 ∘ g2]`.
pub fn permutation_representation(
    group: Arc<GroupTable>,
    action: Vec<Vec<usize>>,
) -> Result<Representation> {
    check_dim(group.order(), action.len())?;
    let dim = action.first().map_or(0, Vec::len);
    for (g, perm) in action.iter().enumerate() {
        if perm.len() != dim {
            return Err(Error::InvalidPermutation {
                element: g,
                reason: format!("length {} differs from {dim}", perm.len()),
            });
        }
        let mut seen = vec![false; dim];
        for &j in perm {
            if j >= dim || seen[j] {
                return Err(Error::InvalidPermutation {
                    element: g,
                    reason: format!("image {j} repeated or out of range"),
                });
            }
            seen[j] = true;
        }
    }
    for a in 0..group.order() {
        for b in 0..group.order() {
            let ab = &action[group.compose(a, b)];
            if (0..dim).any(|i| action[a][action[b][i]] != ab[i]) {
                return Err(Error::GroupLawViolation(a, b));
            }
        }
    }
    let character = action
        .iter()
        .map(|p| p.iter().enumerate().filter(|(i, &j)| *i == j).count() as f64)
        .collect();
    Ok(Representation {
        group,
        dim,
        form: RepForm::Permutation(action),
        character,
    })
}

/// Left-multiplication action of the group on itself.
pub fn regular_representation(group: Arc<GroupTable>) -> Representation {
    let n = group.order();
    let action = (0..n)
        .map(|g| (0..n).map(|h| group.compose(g, h)).collect())
        .collect();
    permutation_representation(group, action).expect("regular action of a valid group")
}

pub fn direct_sum(a: &Representation, b: &Representation) -> Result<Representation> {
    a.same_group(b)?;
    let dim = a.dim + b.dim;
    let group = a.group.clone();
    let character = a
        .character
        .iter()
        .zip(&b.character)
        .map(|(x, y)| x + y)
        .collect();
    let form = match (&a.form, &b.form) {
        (RepForm::Permutation(pa), RepForm::Permutation(pb)) => RepForm::Permutation(
            pa.iter()
                .zip(pb)
                .map(|(p, q)| {
                    p.iter()
                        .copied()
                        .chain(q.iter().map(|j| j + a.dim))
                        .collect()
                })
                .collect(),
        ),
        _ => {
            if dim > MAX_MATERIALIZED_DIM {
                return Err(Error::TooLarge {
                    dim,
                    limit: MAX_MATERIALIZED_DIM,
                });
            }
            RepForm::Explicit(
                (0..group.order())
                    .map(|g| {
                        let mut m = DMatrix::zeros(dim, dim);
                        m.view_mut((0, 0), (a.dim, a.dim)).copy_from(&a.matrix(g));
                        m.view_mut((a.dim, a.dim), (b.dim, b.dim))
                            .copy_from(&b.matrix(g));
                        m
                    })
                    .collect(),
            )
        }
    };
    Ok(Representation {
        group,
        dim,
        form,
        character,
    })
}

/// Tensor (Kronecker) product; index `(i, j)` maps to `i * dim(b) + j`.
pub fn tensor_product(a: &Representation, b: &Representation) -> Result<Representation> {
    a.same_group(b)?;
    let dim = a.dim * b.dim;
    let group = a.group.clone();
    let character = a
        .character
        .iter()
        .zip(&b.character)
        .map(|(x, y)| x * y)
        .collect();
    let form = match (&a.form, &b.form) {
        (RepForm::Permutation(pa), RepForm::Permutation(pb)) => RepForm::Permutation(
            pa.iter()
                .zip(pb)
                .map(|(p, q)| {
                    let mut out = vec![0; dim];
                    for i in 0..a.dim {
                        for j in 0..b.dim {
                            out[i * b.dim + j] = p[i] * b.dim + q[j];
                        }
                    }
                    out
                })
                .collect(),
        ),
        _ => {
            if dim > MAX_MATERIALIZED_DIM {
                return Err(Error::TooLarge {
                    dim,
                    limit: MAX_MATERIALIZED_DIM,
                });
            }
            RepForm::Explicit(
                (0..group.order())
                    .map(|g| a.matrix(g).kronecker(&b.matrix(g)))
                    .collect(),
            )
        }
    };
    Ok(Representation {
        group,
        dim,
        form,
        character,
    })
}

/// The action `A ↦ π(g) A π(g)ᵀ` on symmetric matrices, in the
/// coordinates of [`crate::linalg::sym_vec`].
pub fn symmetric_square(rep: &Representation) -> Result<Representation> {
    let d = rep.dim;
    let dim = sym_vec_len(d);
    if dim > MAX_MATERIALIZED_DIM {
        return Err(Error::TooLarge {
            dim,
            limit: MAX_MATERIALIZED_DIM,
        });
    }
    // orthonormal basis E_k of Sym(d) matching sym_vec ordering
    let mut pairs = Vec::with_capacity(dim);
    for i in 0..d {
        for j in i..d {
            pairs.push((i, j));
        }
    }
    let matrices = (0..rep.group.order())
        .map(|g| {
            let mut m = DMatrix::zeros(dim, dim);
            for (col, &(i, j)) in pairs.iter().enumerate() {
                let mut e = DMatrix::zeros(d, d);
                if i == j {
                    e[(i, i)] = 1.0;
                } else {
                    e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                    e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
                }
                let image = crate::linalg::sym_vec(&rep.conjugate(g, &e));
                m.set_column(col, &nalgebra::DVector::from_vec(image));
            }
            m
        })
        .collect();
    Ok(Representation::explicit_unchecked(
        rep.group.clone(),
        matrices,
    ))
}

fn check_irrep_group(rep: &Representation, irrep: &Irrep) -> Result<()> {
    check_dim(rep.group.order(), irrep.character.len())
}

/// `n_t = (1/|G|) Σ_g χ_τ(g) χ_π(g)` for every irrep, rounded to an integer.
pub fn multiplicities(rep: &Representation, irreps: &[Irrep]) -> Result<Vec<usize>> {
    let order = rep.group.order() as f64;
    irreps
        .iter()
        .map(|irrep| {
            check_irrep_group(rep, irrep)?;
            let value = irrep
                .character
                .iter()
                .zip(&rep.character)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / order;
            let rounded = value.round();
            if (value - rounded).abs() > 1e-8 || rounded < 0.0 {
                return Err(Error::NonIntegerMultiplicity {
                    label: irrep.label.clone(),
                    value,
                });
            }
            Ok(rounded as usize)
        })
        .collect()
}

/// `P_τ = dim(τ) (1/|G|) Σ_g χ_τ(g) π(g)`, the projector onto the isotypic
/// component of `τ`.
pub fn isotypic_projector(rep: &Representation, irrep: &Irrep) -> Result<DMatrix<f64>> {
    check_irrep_group(rep, irrep)?;
    let scale = irrep.dim as f64 / rep.group.order() as f64;
    let coeff: Vec<f64> = irrep.character.iter().map(|c| c * scale).collect();
    Ok(rep.weighted_sum(&coeff))
}

/// `P_1 = (1/|G|) Σ_g π(g)`.
pub fn trivial_projector(rep: &Representation) -> DMatrix<f64> {
    let n = rep.group.order();
    rep.weighted_sum(&vec![1.0 / n as f64; n])
}

/// `(1/|G|) Σ_g π(g) v` without materialising matrices.
pub fn average_over_group(rep: &Representation, v: &[f64]) -> Vec<f64> {
    let n = rep.group.order();
    let mut acc = vec![0.0; rep.dim];
    let mut buf = vec![0.0; rep.dim];
    for g in 0..n {
        rep.apply_into(g, v, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}
