//! Brute-force checks of the efficient encoders against the trivial
//! projector of the materialised tensor representation.
//!
//! Each oracle builds the full tensor feature `F`, applies
//! `P_1 = (1/|G|) Σ_g ρ(g)` densely, and compares against the encoder output
//! lifted through an explicit orthonormal invariant basis. The lift is checked
//! independently: its columns must be orthonormal, fixed by `P_1`, and as many
//! as the trivial multiplicity of the relevant representation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coding::{encode_inv_bp, encode_inv_vlad, encode_inv_vlat, GlobalFeature};
use crate::error::{check_dim, Error, Result};
use crate::group::GroupTable;
use crate::linalg::{max_abs_diff, norm, squared_distance, sym_unvec};
use crate::modeling::{BasisState, FeatureView, LocalFeatureSet, OrbitCodebook};
use crate::representation::{
    multiplicities, permutation_representation, symmetric_square, tensor_product,
    trivial_projector, Representation, SymmetryAdaptedBasis,
};
use crate::MAX_MATERIALIZED_DIM;

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub encoder: &'static str,
    /// `‖P_1 F − B · output‖`.
    pub residual: f64,
    /// `max |BᵀB − I|`; zero when the lift is not an explicit matrix.
    pub lift_orthonormality: f64,
    /// `max |P_1 B − B|`.
    pub lift_invariance: f64,
    pub invariant_dim: usize,
    pub output_dim: usize,
    pub tensor_dim: usize,
}

impl OracleReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.residual <= tol
            && self.lift_orthonormality <= tol
            && self.lift_invariance <= tol
            && self.invariant_dim == self.output_dim
    }
}

fn guard(dim: usize) -> Result<()> {
    if dim > MAX_MATERIALIZED_DIM {
        Err(Error::TooLarge {
            dim,
            limit: MAX_MATERIALIZED_DIM,
        })
    } else {
        Ok(())
    }
}

fn trivial_index(group: &GroupTable, irreps: &[crate::group::Irrep]) -> usize {
    irreps
        .iter()
        .position(|i| i.is_trivial())
        .unwrap_or_else(|| panic!("irrep list of {} lacks the trivial irrep", group.name))
}

/// `‖P_1 vec(A) − B · inv_bp(x)‖` with `A = (1/N) Σ x xᵀ` in raw coordinates
/// and `B` the orthonormal basis `{(1/√d_t) Σ_k w_{o1,k} w_{o2,k}ᵀ}` of
/// invariant symmetric matrices (symmetrised for `o1 ≠ o2`).
pub fn inv_bp_oracle(raw: FeatureView<'_>, basis: &SymmetryAdaptedBasis) -> Result<OracleReport> {
    raw.expect_state(BasisState::Raw)?;
    let rep = basis.rep();
    let d = rep.dim();
    check_dim(d, raw.dim())?;
    guard(d * d)?;

    let n = raw.len() as f64;
    let mut a = DMatrix::zeros(d, d);
    for x in raw.rows() {
        let v = DVector::from_column_slice(x);
        a += &v * v.transpose();
    }
    a /= n;
    let vec_a = DVector::from_iterator(
        d * d,
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)]),
    );

    let pi2 = tensor_product(rep, rep)?;
    let p1 = trivial_projector(&pi2);
    let projected = &p1 * &vec_a;

    let w = basis.basis();
    let mut columns = Vec::new();
    for t in 0..basis.irreps().len() {
        let blocks: Vec<_> = basis.blocks_of(t).collect();
        for o1 in 0..blocks.len() {
            for o2 in o1..blocks.len() {
                let size = blocks[o1].size;
                let mut e = DMatrix::zeros(d, d);
                for k in 0..size {
                    let u = w.column(blocks[o1].offset + k);
                    let v = w.column(blocks[o2].offset + k);
                    e += u * v.transpose();
                    if o1 != o2 {
                        e += v * u.transpose();
                    }
                }
                let s = if o1 == o2 {
                    1.0
                } else {
                    std::f64::consts::FRAC_1_SQRT_2
                };
                e *= s / (size as f64).sqrt();
                columns.push(DVector::from_iterator(
                    d * d,
                    (0..d)
                        .flat_map(|i| (0..d).map(move |j| (i, j)))
                        .map(|(i, j)| e[(i, j)]),
                ));
            }
        }
    }
    let b = DMatrix::from_columns(&columns);

    let adapted = LocalFeatureSet::new(
        rep.clone(),
        raw.rows().flat_map(|r| basis.to_adapted(r)).collect(),
        BasisState::Adapted,
    )?;
    let out = encode_inv_bp(adapted.view(), basis)?;
    let lifted = &b * DVector::from_column_slice(&out.vector);

    let trivial = trivial_index(rep.group(), basis.irreps());
    let sym = symmetric_square(rep)?;
    let invariant_dim = multiplicities(&sym, basis.irreps())?[trivial];
    Ok(OracleReport {
        encoder: "inv_bp",
        residual: (&projected - &lifted).norm(),
        lift_orthonormality: max_abs_diff(
            &(b.transpose() * &b),
            &DMatrix::identity(b.ncols(), b.ncols()),
        ),
        lift_invariance: max_abs_diff(&(&p1 * &b), &b),
        invariant_dim,
        output_dim: out.dim,
        tensor_dim: d * d,
    })
}

/// Permutation action on the `C·|G|` one-hot assignment slots,
/// slot `c·|G| + g` moving to `c·|G| + h∘g`.
pub fn orbit_slot_representation(
    group: Arc<GroupTable>,
    clusters: usize,
) -> Result<Representation> {
    let order = group.order();
    let action = (0..order)
        .map(|h| {
            (0..clusters * order)
                .map(|k| (k / order) * order + group.compose(h, k % order))
                .collect()
        })
        .collect();
    permutation_representation(group, action)
}

/// Independent nearest-centroid search over the materialised orbit.
fn orbit_assignment(x: &[f64], codebook: &OrbitCodebook) -> (usize, usize) {
    let order = codebook.rep().group().order();
    let mut best = (0, 0);
    let mut min = f64::INFINITY;
    for c in 0..codebook.clusters() {
        for g in 0..order {
            let d = squared_distance(x, &codebook.centroid(g, c));
            if d < min {
                min = d;
                best = (g, c);
            }
        }
    }
    best
}

/// `‖P_1 F − E · inv_vlad(x)‖` with `F = (1/N) Σ 1_{(g,c)} ⊗ (x − μ_{g,c})`
/// and `E` placing `π(g) v_c` in slot `(g, c)`; `E/√|G|` is orthonormal.
pub fn inv_vlad_oracle(raw: FeatureView<'_>, codebook: &OrbitCodebook) -> Result<OracleReport> {
    raw.expect_state(BasisState::Raw)?;
    let rep = codebook.rep();
    let (d, order, k) = (rep.dim(), rep.group().order(), codebook.clusters());
    let slots = orbit_slot_representation(rep.group().clone(), k)?;
    let tensor_dim = slots.dim() * d;
    guard(tensor_dim)?;

    let mut f = DVector::zeros(tensor_dim);
    for x in raw.rows() {
        let (g, c) = orbit_assignment(x, codebook);
        let mu = codebook.centroid(g, c);
        let off = (c * order + g) * d;
        for i in 0..d {
            f[off + i] += x[i] - mu[i];
        }
    }
    f /= raw.len() as f64;

    let rho = tensor_product(&slots, rep)?;
    let p1 = trivial_projector(&rho);
    let projected = &p1 * &f;

    let out = encode_inv_vlad(raw, codebook)?;
    let scale = (order as f64).sqrt();
    let mut e = DMatrix::zeros(tensor_dim, k * d);
    for c in 0..k {
        for i in 0..d {
            let mut unit = vec![0.0; d];
            unit[i] = 1.0;
            for g in 0..order {
                let col = rep.apply(g, &unit);
                for (r, v) in col.iter().enumerate() {
                    e[((c * order + g) * d + r, c * d + i)] = v / scale;
                }
            }
        }
    }
    let lifted = &e * DVector::from_column_slice(&out.vector) * scale;
    let trivial = multiplicity_of_trivial(&rho)?;
    Ok(OracleReport {
        encoder: "inv_vlad",
        residual: (&projected - &lifted).norm(),
        lift_orthonormality: max_abs_diff(&(e.transpose() * &e), &DMatrix::identity(k * d, k * d)),
        lift_invariance: max_abs_diff(&(&p1 * &e), &e),
        invariant_dim: trivial,
        output_dim: out.dim,
        tensor_dim,
    })
}

fn multiplicity_of_trivial(rep: &Representation) -> Result<usize> {
    let value = rep.character().iter().sum::<f64>() / rep.group().order() as f64;
    let rounded = value.round();
    if (value - rounded).abs() > 1e-8 {
        return Err(Error::NonIntegerMultiplicity {
            label: "trivial".into(),
            value,
        });
    }
    Ok(rounded as usize)
}

/// `‖P_1 F − lift(inv_vlat(x))‖` with slot `(g, c)` of `F` equal to
/// `(1/N) vec(Σ_{S_{g,c}} [(x − μ_{g,c})(x − μ_{g,c})ᵀ − T_{g,c}])` and the lift
/// placing `vec(π(g) B_c π(g)ᵀ)` in slot `(g, c)`.
pub fn inv_vlat_oracle(raw: FeatureView<'_>, codebook: &OrbitCodebook) -> Result<OracleReport> {
    raw.expect_state(BasisState::Raw)?;
    let rep = codebook.rep();
    let (d, order, k) = (rep.dim(), rep.group().order(), codebook.clusters());
    codebook.tensors.as_ref().ok_or(Error::MissingTensors)?;
    let slots = orbit_slot_representation(rep.group().clone(), k)?;
    let tensor_dim = slots.dim() * d * d;
    guard(tensor_dim)?;

    let mut f = DVector::zeros(tensor_dim);
    for x in raw.rows() {
        let (g, c) = orbit_assignment(x, codebook);
        let mu = codebook.centroid(g, c);
        let t = codebook.tensor(g, c).expect("tensors checked above");
        let off = (c * order + g) * d * d;
        for i in 0..d {
            for j in 0..d {
                f[off + i * d + j] += (x[i] - mu[i]) * (x[j] - mu[j]) - t[(i, j)];
            }
        }
    }
    f /= raw.len() as f64;

    let pp = tensor_product(rep, rep)?;
    let rho = tensor_product(&slots, &pp)?;
    let p1 = trivial_projector(&rho);
    let projected = &p1 * &f;

    let out = encode_inv_vlat(raw, codebook)?;
    let seg = d * (d + 1) / 2;
    let mut lifted = DVector::zeros(tensor_dim);
    for c in 0..k {
        let b = sym_unvec(&out.vector[c * seg..(c + 1) * seg], d);
        for g in 0..order {
            let m = rep.conjugate(g, &b);
            let off = (c * order + g) * d * d;
            for i in 0..d {
                for j in 0..d {
                    lifted[off + i * d + j] = m[(i, j)];
                }
            }
        }
    }
    // the lift of each symmetric coordinate is orthogonal with norm √|G|
    let sym = symmetric_square(rep)?;
    let lift_cols = vlat_lift_columns(rep, &sym, k)?;
    let trivial = multiplicity_of_trivial(&tensor_product(&slots, &sym)?)?;
    Ok(OracleReport {
        encoder: "inv_vlat",
        residual: (&projected - &lifted).norm(),
        lift_orthonormality: max_abs_diff(
            &(lift_cols.transpose() * &lift_cols),
            &DMatrix::identity(lift_cols.ncols(), lift_cols.ncols()),
        ),
        lift_invariance: max_abs_diff(&(&p1 * &lift_cols), &lift_cols),
        invariant_dim: trivial,
        output_dim: out.dim,
        tensor_dim,
    })
}

/// Lift of every `sym_vec` coordinate of every orbit, divided by `√|G|`.
fn vlat_lift_columns(
    rep: &Representation,
    sym: &Representation,
    clusters: usize,
) -> Result<DMatrix<f64>> {
    let d = rep.dim();
    let order = rep.group().order();
    let seg = sym.dim();
    let total = clusters * order * d * d;
    let mut cols = DMatrix::zeros(total, clusters * seg);
    let scale = 1.0 / (order as f64).sqrt();
    for c in 0..clusters {
        for s in 0..seg {
            let mut unit = vec![0.0; seg];
            unit[s] = 1.0;
            let b = sym_unvec(&unit, d);
            for g in 0..order {
                let m = rep.conjugate(g, &b);
                let off = (c * order + g) * d * d;
                for i in 0..d {
                    for j in 0..d {
                        cols[(off + i * d + j, c * seg + s)] = m[(i, j)] * scale;
                    }
                }
            }
        }
    }
    Ok(cols)
}

/// `‖a − b‖ / max(‖a‖, tiny)`.
pub fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(f64::MIN_POSITIVE)
}

/// Largest relative change of `encode` over every `π(g)`-transformed copy
/// of a raw sample.
pub fn invariance_gap(
    raw: &LocalFeatureSet,
    mut encode: impl FnMut(&LocalFeatureSet) -> Result<GlobalFeature>,
) -> Result<f64> {
    let base = encode(raw)?;
    let mut worst = 0.0f64;
    for g in 0..raw.rep().group().order() {
        let moved = encode(&raw.transformed(g)?)?;
        worst = worst.max(relative_change(&base.vector, &moved.vector));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_d4, build_z2};
    use crate::modeling::{compute_cluster_tensors, invariant_kmeans, KMeansConfig};
    use crate::representation::{regular_representation, symmetry_adapted_basis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random(rep: &Arc<Representation>, n: usize, seed: u64) -> LocalFeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * rep.dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        LocalFeatureSet::new(rep.clone(), data, BasisState::Raw).unwrap()
    }

    #[test]
    fn oracles_agree_on_regular_d4() {
        let (g, irreps) = build_d4();
        let rep = Arc::new(regular_representation(Arc::new(g)));
        let sab = symmetry_adapted_basis(&rep, &irreps).unwrap();
        let x = random(&rep, 12, 1);
        let bp = inv_bp_oracle(x.view(), &sab).unwrap();
        assert!(bp.passed(1e-10), "{bp:?}");
        let train = random(&rep, 60, 2);
        let cb = invariant_kmeans(&train, &KMeansConfig::new(2, 20, 3)).unwrap();
        let cb = compute_cluster_tensors(&train, &cb).unwrap();
        let vlad = inv_vlad_oracle(x.view(), &cb).unwrap();
        assert!(vlad.passed(1e-10), "{vlad:?}");
        let vlat = inv_vlat_oracle(x.view(), &cb).unwrap();
        assert!(vlat.passed(1e-10), "{vlat:?}");
    }

    #[test]
    fn oracles_agree_on_z2_pixel_pairs() {
        let (g, irreps) = build_z2();
        let g = Arc::new(g);
        let action = vec![(0..6).collect(), vec![1, 0, 3, 2, 5, 4]];
        let rep = Arc::new(permutation_representation(g, action).unwrap());
        let sab = symmetry_adapted_basis(&rep, &irreps).unwrap();
        let x = random(&rep, 9, 4);
        assert!(inv_bp_oracle(x.view(), &sab).unwrap().passed(1e-10));
        let cb = invariant_kmeans(&random(&rep, 30, 5), &KMeansConfig::new(3, 20, 6)).unwrap();
        let cb = compute_cluster_tensors(&random(&rep, 30, 5), &cb).unwrap();
        assert!(inv_vlad_oracle(x.view(), &cb).unwrap().passed(1e-10));
        assert!(inv_vlat_oracle(x.view(), &cb).unwrap().passed(1e-10));
    }
}
