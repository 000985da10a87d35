use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{multiplicities, Representation};
use crate::error::{check_dim, Error, Result};
use crate::group::Irrep;
use crate::linalg::{max_abs_diff, orthonormal_column_space, serde_rows};

/// One irreducible block of a symmetry-adapted layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    /// Index into the irrep list the basis was built from.
    pub irrep: usize,
    pub label: String,
    /// Copy index `o` within the isotypic component.
    pub copy: usize,
    /// First column of the block in `W`.
    pub offset: usize,
    pub size: usize,
}

/// Orthogonal `W` such that `Wᵀ π(g) W` is block diagonal with the canonical
/// irrep matrices on its blocks.
#[derive(Clone, Debug)]
pub struct SymmetryAdaptedBasis {
    rep: Arc<Representation>,
    irreps: Vec<Irrep>,
    multiplicities: Vec<usize>,
    basis: DMatrix<f64>,
    layout: Vec<Block>,
}

/// Serialisable form: layout plus `W` as row-major nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisDocument {
    pub group: String,
    pub irreps: Vec<String>,
    pub multiplicities: Vec<usize>,
    pub layout: Vec<Block>,
    #[serde(with = "serde_rows")]
    pub basis: DMatrix<f64>,
}

impl SymmetryAdaptedBasis {
    /// Assemble a basis from its parts; checks shapes and orthogonality but
    /// not block equality (see [`Self::max_block_error`]).
    pub fn from_parts(
        rep: Arc<Representation>,
        irreps: Vec<Irrep>,
        basis: DMatrix<f64>,
        layout: Vec<Block>,
    ) -> Result<Self> {
        let d = rep.dim();
        check_dim(d, basis.nrows())?;
        check_dim(d, basis.ncols())?;
        let covered: usize = layout.iter().map(|b| b.size).sum();
        check_dim(d, covered)?;
        let err = max_abs_diff(&(basis.transpose() * &basis), &DMatrix::identity(d, d));
        if err > crate::REP_TOL {
            return Err(Error::InvalidMatrix {
                element: 0,
                property: "basis orthogonality",
                error: err,
            });
        }
        let mut mult = vec![0; irreps.len()];
        for b in &layout {
            if b.irrep >= irreps.len() || irreps[b.irrep].dim != b.size {
                return Err(Error::invalid(format!(
                    "block {} does not match its irrep",
                    b.label
                )));
            }
            mult[b.irrep] += 1;
        }
        Ok(SymmetryAdaptedBasis {
            rep,
            irreps,
            multiplicities: mult,
            basis,
            layout,
        })
    }

    pub fn rep(&self) -> &Arc<Representation> {
        &self.rep
    }

    pub fn irreps(&self) -> &[Irrep] {
        &self.irreps
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// The orthogonal matrix `W`; columns follow [`Self::layout`].
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn layout(&self) -> &[Block] {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Blocks of irrep `t`, in copy order.
    pub fn blocks_of(&self, t: usize) -> impl Iterator<Item = &Block> {
        self.layout.iter().filter(move |b| b.irrep == t)
    }

    /// `Wᵀ x`.
    pub fn to_adapted(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|c| self.basis.column(c).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// `W y`.
    pub fn from_adapted(&self, y: &[f64]) -> Vec<f64> {
        let v = &self.basis * DVector::from_column_slice(y);
        v.as_slice().to_vec()
    }

    /// The block-diagonal matrix carrying `τ_t(g)` on every block.
    pub fn canonical_block_matrix(&self, g: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for b in &self.layout {
            m.view_mut((b.offset, b.offset), (b.size, b.size))
                .copy_from(&self.irreps[b.irrep].matrices[g]);
        }
        m
    }

    /// Largest entrywise deviation of `Wᵀ π(g) W` from the canonical blocks over all `g`.
    pub fn max_block_error(&self) -> f64 {
        (0..self.rep.group().order())
            .map(|g| {
                let adapted = self.basis.transpose() * self.rep.matrix(g) * &self.basis;
                max_abs_diff(&adapted, &self.canonical_block_matrix(g))
            })
            .fold(0.0, f64::max)
    }

    pub fn to_document(&self) -> BasisDocument {
        BasisDocument {
            group: self.rep.group().name.clone(),
            irreps: self.irreps.iter().map(|i| i.label.clone()).collect(),
            multiplicities: self.multiplicities.clone(),
            layout: self.layout.clone(),
            basis: self.basis.clone(),
        }
    }
}

/// Build `W` from matrix-element projectors
/// `P^t_{k0} = (d_t/|G|) Σ_g τ_t(g)[k][0] π(g)`.
///
/// Copy seeds are an orthonormal basis of the column space of `P^t_{00}`;
/// the columns of copy `o` are `P^t_{k0} b_o` for `k = 0..d_t`, so every block
/// transforms exactly by the canonical `τ_t`.
pub fn symmetry_adapted_basis(
    rep: &Arc<Representation>,
    irreps: &[Irrep],
) -> Result<SymmetryAdaptedBasis> {
    let n = multiplicities(rep, irreps)?;
    let order = rep.group().order();
    let d = rep.dim();
    let total: usize = n.iter().zip(irreps).map(|(k, i)| k * i.dim).sum();
    if total != d {
        return Err(Error::invalid(format!(
            "irreps cover {total} of {d} dimensions; the irrep set is incomplete"
        )));
    }

    let mut basis = DMatrix::zeros(d, d);
    let mut layout = Vec::new();
    let mut col = 0;
    for (t, irrep) in irreps.iter().enumerate() {
        if n[t] == 0 {
            continue;
        }
        let scale = irrep.dim as f64 / order as f64;
        let projectors: Vec<DMatrix<f64>> = (0..irrep.dim)
            .map(|k| {
                let coeff: Vec<f64> = irrep.matrices.iter().map(|m| m[(k, 0)] * scale).collect();
                rep.weighted_sum(&coeff)
            })
            .collect();
        let seeds = orthonormal_column_space(&projectors[0], 1e-8);
        if seeds.len() != n[t] {
            return Err(Error::RankMismatch {
                label: irrep.label.clone(),
                expected: n[t],
                found: seeds.len(),
            });
        }
        for (o, seed) in seeds.iter().enumerate() {
            layout.push(Block {
                irrep: t,
                label: irrep.label.clone(),
                copy: o,
                offset: col,
                size: irrep.dim,
            });
            for p in &projectors {
                let mut v = p * seed;
                let len = v.norm();
                v /= len;
                basis.set_column(col, &v);
                col += 1;
            }
        }
    }

    Ok(SymmetryAdaptedBasis {
        rep: rep.clone(),
        irreps: irreps.to_vec(),
        multiplicities: n,
        basis,
        layout,
    })
}
