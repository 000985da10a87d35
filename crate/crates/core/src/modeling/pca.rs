use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::{BasisState, LocalFeatureSet};
use crate::error::{check_dim, Error, Result};
use crate::group::{GroupTable, Irrep};
use crate::linalg::{max_abs_diff, serde_rows, sym_eigen};
use crate::representation::{Block, Representation, SymmetryAdaptedBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    Invariant,
    Standard,
}

/// One selected eigen-direction: irrep `t`, eigen index `p`, copy weights `u_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetainedBlock {
    pub irrep: usize,
    pub label: String,
    pub eigen_index: usize,
    pub weights: Vec<f64>,
    pub variance: f64,
    pub size: usize,
    /// First output column of the block.
    pub offset: usize,
}

/// A linear projection `x ↦ Wᵀ (x − mean)` to `d_out` dimensions.
///
/// Invariant maps have no mean, act on raw coordinates through `w_matrix`
/// and on adapted coordinates through `adapted_matrix`, and carry the
/// block-diagonal representation of the retained irreps on their output.
#[derive(Clone, Debug)]
pub struct ProjectionMap {
    pub kind: ProjectionKind,
    pub requested: usize,
    pub w_matrix: DMatrix<f64>,
    pub adapted_matrix: Option<DMatrix<f64>>,
    pub mean: Option<Vec<f64>>,
    pub retained_blocks: Vec<RetainedBlock>,
    pub explained_variance: f64,
    pub total_variance: f64,
    source_rep: Arc<Representation>,
    irreps: Vec<Irrep>,
    output_rep: Arc<Representation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDocument {
    pub kind: ProjectionKind,
    pub group: String,
    pub requested: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub explained_variance: f64,
    pub total_variance: f64,
    pub retained_blocks: Vec<RetainedBlock>,
    #[serde(with = "serde_rows")]
    pub w_matrix: DMatrix<f64>,
    pub mean: Option<Vec<f64>>,
}

impl ProjectionMap {
    pub fn d_in(&self) -> usize {
        self.w_matrix.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.w_matrix.ncols()
    }

    pub fn source_rep(&self) -> &Arc<Representation> {
        &self.source_rep
    }

    /// Representation carried by projected features.
    pub fn output_rep(&self) -> &Arc<Representation> {
        &self.output_rep
    }

    /// Identity basis on the output space, blocks in selection order.
    pub fn output_basis(&self) -> Result<SymmetryAdaptedBasis> {
        if self.kind != ProjectionKind::Invariant {
            return Err(Error::invalid(
                "a standard projection has no adapted output basis",
            ));
        }
        let mut copies = vec![0; self.irreps.len()];
        let layout = self
            .retained_blocks
            .iter()
            .map(|b| {
                let copy = copies[b.irrep];
                copies[b.irrep] += 1;
                Block {
                    irrep: b.irrep,
                    label: b.label.clone(),
                    copy,
                    offset: b.offset,
                    size: b.size,
                }
            })
            .collect();
        let d = self.d_out();
        SymmetryAdaptedBasis::from_parts(
            self.output_rep.clone(),
            self.irreps.clone(),
            DMatrix::identity(d, d),
            layout,
        )
    }

    pub fn transform_vec(&self, x: &[f64], state: BasisState) -> Vec<f64> {
        let w = match (state, &self.adapted_matrix) {
            (BasisState::Adapted, Some(u)) => u,
            _ => &self.w_matrix,
        };
        let shifted: Vec<f64> = match &self.mean {
            Some(m) => x.iter().zip(m).map(|(a, b)| a - b).collect(),
            None => x.to_vec(),
        };
        (0..w.ncols())
            .map(|c| w.column(c).iter().zip(&shifted).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Project every row; the result is raw in the output representation.
    pub fn transform(&self, features: &LocalFeatureSet) -> Result<LocalFeatureSet> {
        check_dim(self.d_in(), features.dim())?;
        if features.state() == BasisState::Adapted && self.adapted_matrix.is_none() {
            return Err(Error::WrongBasis {
                expected: "raw",
                found: "adapted",
            });
        }
        let mut data = Vec::with_capacity(features.len() * self.d_out());
        for r in features.rows() {
            data.extend(self.transform_vec(r, features.state()));
        }
        let out = LocalFeatureSet::new(self.output_rep.clone(), data, BasisState::Raw)?;
        match features.grouping() {
            Some(g) => out.with_grouping(g.to_vec()),
            None => Ok(out),
        }
    }

    /// Worst entrywise deviation of `Wᵀ π(g) W` from the canonical blocks.
    pub fn max_intertwining_error(&self) -> f64 {
        let group = self.source_rep.group().clone();
        (0..group.order())
            .map(|g| {
                let lhs = self.w_matrix.transpose() * self.source_rep.matrix(g) * &self.w_matrix;
                max_abs_diff(&lhs, &self.output_rep.matrix(g))
            })
            .fold(0.0, f64::max)
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        let d = self.d_out();
        max_abs_diff(
            &(self.w_matrix.transpose() * &self.w_matrix),
            &DMatrix::identity(d, d),
        )
    }

    pub fn to_document(&self) -> ProjectionDocument {
        ProjectionDocument {
            kind: self.kind,
            group: self.source_rep.group().name.clone(),
            requested: self.requested,
            d_in: self.d_in(),
            d_out: self.d_out(),
            explained_variance: self.explained_variance,
            total_variance: self.total_variance,
            retained_blocks: self.retained_blocks.clone(),
            w_matrix: self.w_matrix.clone(),
            mean: self.mean.clone(),
        }
    }

    /// Rebuild from a document; `basis` is required for invariant maps.
    pub fn from_document(
        doc: ProjectionDocument,
        source_rep: Arc<Representation>,
        basis: Option<&SymmetryAdaptedBasis>,
    ) -> Result<Self> {
        check_dim(doc.d_in, source_rep.dim())?;
        check_dim(doc.d_in, doc.w_matrix.nrows())?;
        check_dim(doc.d_out, doc.w_matrix.ncols())?;
        let (irreps, output_rep, adapted) = match doc.kind {
            ProjectionKind::Invariant => {
                let basis =
                    basis.ok_or_else(|| Error::invalid("invariant projection needs its basis"))?;
                check_dim(doc.d_in, basis.dim())?;
                let irreps = basis.irreps().to_vec();
                let out = invariant_output_rep(&source_rep, &irreps, &doc.retained_blocks)?;
                (irreps, out, Some(basis.basis().transpose() * &doc.w_matrix))
            }
            ProjectionKind::Standard => (Vec::new(), standard_output_rep(doc.d_out), None),
        };
        Ok(ProjectionMap {
            kind: doc.kind,
            requested: doc.requested,
            w_matrix: doc.w_matrix,
            adapted_matrix: adapted,
            mean: doc.mean,
            retained_blocks: doc.retained_blocks,
            explained_variance: doc.explained_variance,
            total_variance: doc.total_variance,
            source_rep,
            irreps,
            output_rep,
        })
    }
}

fn invariant_output_rep(
    source: &Arc<Representation>,
    irreps: &[Irrep],
    blocks: &[RetainedBlock],
) -> Result<Arc<Representation>> {
    let parts: Vec<&Irrep> = blocks.iter().map(|b| &irreps[b.irrep]).collect();
    Ok(Arc::new(Representation::block_diagonal(
        source.group().clone(),
        &parts,
    )?))
}

fn standard_output_rep(d_out: usize) -> Arc<Representation> {
    Arc::new(Representation::identity(
        Arc::new(GroupTable::trivial()),
        d_out,
    ))
}

fn check_request(n: usize, d: usize, d_proj: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "PCA needs at least 2 descriptors, got {n}"
        )));
    }
    if d_proj == 0 || d_proj > d {
        return Err(Error::invalid(format!("d_proj = {d_proj} outside 1..={d}")));
    }
    Ok(())
}

fn check_psd(values: &[f64]) -> Result<()> {
    let top = values.first().copied().unwrap_or(0.0).max(1.0);
    match values.last() {
        Some(&low) if low < -1e-10 * top => Err(Error::NotPsd(low)),
        _ => Ok(()),
    }
}

/// Invariant PCA on symmetry-adapted features.
///
/// For each irrep type the `n_t × n_t` cross-copy covariance is
/// diagonalised; eigen-directions are taken greedily by `λ / d_t` (ties to
/// lower `t`, then lower `p`) while the width is below `d_proj`.
pub fn invariant_pca(
    features: &LocalFeatureSet,
    basis: &SymmetryAdaptedBasis,
    d_proj: usize,
) -> Result<ProjectionMap> {
    features.expect_state(BasisState::Adapted)?;
    let d = basis.dim();
    check_dim(d, features.dim())?;
    let n = features.len();
    check_request(n, d, d_proj)?;
    let nf = n as f64;

    let mean: Vec<f64> = {
        let mut m = vec![0.0; d];
        for r in features.rows() {
            m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= nf);
        m
    };
    let total_variance = features
        .rows()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum::<f64>()
        / nf;

    let irreps = basis.irreps();
    let mut candidates: Vec<(usize, usize, f64, Vec<f64>)> = Vec::new();
    let mut per_type: Vec<Vec<Block>> = vec![Vec::new(); irreps.len()];
    for (t, irrep) in irreps.iter().enumerate() {
        let blocks: Vec<Block> = basis.blocks_of(t).cloned().collect();
        if blocks.is_empty() {
            continue;
        }
        let k = blocks.len();
        let mut sigma = DMatrix::<f64>::zeros(k, k);
        let mut centred = vec![0.0; k * irrep.dim];
        for r in features.rows() {
            for (o, b) in blocks.iter().enumerate() {
                for j in 0..b.size {
                    centred[o * b.size + j] = r[b.offset + j] - mean[b.offset + j];
                }
            }
            for o1 in 0..k {
                let a = &centred[o1 * irrep.dim..(o1 + 1) * irrep.dim];
                for o2 in o1..k {
                    let b = &centred[o2 * irrep.dim..(o2 + 1) * irrep.dim];
                    sigma[(o1, o2)] += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        for o1 in 0..k {
            for o2 in o1..k {
                let v = sigma[(o1, o2)] / nf;
                sigma[(o1, o2)] = v;
                sigma[(o2, o1)] = v;
            }
        }
        let (values, vectors) = sym_eigen(&sigma);
        check_psd(&values)?;
        for (p, &lambda) in values.iter().enumerate() {
            candidates.push((t, p, lambda, vectors.column(p).iter().copied().collect()));
        }
        per_type[t] = blocks;
    }

    candidates.sort_by(|a, b| {
        let ka = a.2 / irreps[a.0].dim as f64;
        let kb = b.2 / irreps[b.0].dim as f64;
        kb.partial_cmp(&ka)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });

    let mut retained = Vec::new();
    let mut width = 0;
    for (t, p, lambda, weights) in candidates {
        if width >= d_proj {
            break;
        }
        let size = irreps[t].dim;
        retained.push(RetainedBlock {
            irrep: t,
            label: irreps[t].label.clone(),
            eigen_index: p,
            weights,
            variance: lambda,
            size,
            offset: width,
        });
        width += size;
    }

    let mut u = DMatrix::zeros(d, width);
    for b in &retained {
        for (o, blk) in per_type[b.irrep].iter().enumerate() {
            for k in 0..b.size {
                u[(blk.offset + k, b.offset + k)] = b.weights[o];
            }
        }
    }
    let w_matrix = basis.basis() * &u;
    let output_rep = invariant_output_rep(basis.rep(), irreps, &retained)?;
    Ok(ProjectionMap {
        kind: ProjectionKind::Invariant,
        requested: d_proj,
        w_matrix,
        adapted_matrix: Some(u),
        mean: None,
        explained_variance: retained.iter().map(|b| b.variance).sum(),
        total_variance,
        retained_blocks: retained,
        source_rep: basis.rep().clone(),
        irreps: irreps.to_vec(),
        output_rep,
    })
}

/// Classical PCA on centred data: the top `d_proj` covariance eigenvectors.
pub fn standard_pca(features: &LocalFeatureSet, d_proj: usize) -> Result<ProjectionMap> {
    let d = features.dim();
    let n = features.len();
    check_request(n, d, d_proj)?;
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in features.rows() {
        mean.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    mean.iter_mut().for_each(|a| *a /= nf);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut c = DVector::zeros(d);
    for r in features.rows() {
        for i in 0..d {
            c[i] = r[i] - mean[i];
        }
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= nf;
    let (values, vectors) = sym_eigen(&cov);
    check_psd(&values)?;
    let w_matrix = vectors.columns(0, d_proj).into_owned();
    let retained_blocks = (0..d_proj)
        .map(|p| RetainedBlock {
            irrep: 0,
            label: "pc".into(),
            eigen_index: p,
            weights: vec![1.0],
            variance: values[p],
            size: 1,
            offset: p,
        })
        .collect();
    Ok(ProjectionMap {
        kind: ProjectionKind::Standard,
        requested: d_proj,
        w_matrix,
        adapted_matrix: None,
        mean: Some(mean),
        retained_blocks,
        explained_variance: values[..d_proj].iter().sum(),
        total_variance: values.iter().sum(),
        source_rep: features.rep().clone(),
        irreps: Vec::new(),
        output_rep: standard_output_rep(d_proj),
    })
}

/// Total variance of the centred data along the columns of `w`.
pub fn projected_variance(features: &LocalFeatureSet, w: &DMatrix<f64>) -> f64 {
    let d = features.dim();
    assert_eq!(d, w.nrows());
    let nf = features.len() as f64;
    let proj: Vec<Vec<f64>> = features
        .rows()
        .map(|r| {
            (0..w.ncols())
                .map(|c| w.column(c).iter().zip(r).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    (0..w.ncols())
        .map(|c| {
            let m = proj.iter().map(|p| p[c]).sum::<f64>() / nf;
            proj.iter().map(|p| (p[c] - m) * (p[c] - m)).sum::<f64>() / nf
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::build_d4;
    use crate::representation::{regular_representation, symmetry_adapted_basis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn regular_d4() -> (Arc<Representation>, SymmetryAdaptedBasis) {
        let (g, irreps) = build_d4();
        let rep = Arc::new(regular_representation(Arc::new(g)));
        let sab = symmetry_adapted_basis(&rep, &irreps).unwrap();
        (rep, sab)
    }

    fn symmetrised(rep: &Arc<Representation>, n: usize, seed: u64) -> LocalFeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales = [3.0, 0.5, 1.0, 2.0, 0.2, 1.5, 0.7, 0.9];
        let mut data = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = scales
                .iter()
                .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for g in 0..rep.group().order() {
                data.extend(rep.apply(g, &x));
            }
        }
        LocalFeatureSet::new(rep.clone(), data, BasisState::Raw).unwrap()
    }

    #[test]
    fn single_copy_support_is_recovered() {
        let (rep, sab) = regular_d4();
        let tau2 = sab.layout().iter().find(|b| b.size == 2).unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        for _ in 0..50 {
            let mut y = vec![0.0; 8];
            y[tau2.offset] = rng.random_range(-1.0..1.0);
            y[tau2.offset + 1] = rng.random_range(-1.0..1.0);
            rows.push(y);
        }
        let set = LocalFeatureSet::from_rows(rep, &rows, BasisState::Adapted).unwrap();
        let map = invariant_pca(&set, &sab, 2).unwrap();
        assert_eq!(map.d_out(), 2);
        let b = &map.retained_blocks[0];
        assert_eq!(b.label, "tau_2");
        assert!((b.weights[tau2.copy].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariant_map_intertwines_and_overshoots_by_less_than_block() {
        let (rep, sab) = regular_d4();
        let raw = symmetrised(&rep, 30, 1);
        let set = raw.to_adapted(&sab).unwrap();
        for d_proj in 1..=8 {
            let map = invariant_pca(&set, &sab, d_proj).unwrap();
            assert!(map.d_out() >= d_proj && map.d_out() - d_proj < 2);
            assert!(map.max_orthonormality_error() < 1e-10);
            assert!(map.max_intertwining_error() < 1e-8);
            let via_raw = map.transform(&raw).unwrap();
            let via_adapted = map.transform(&set).unwrap();
            for (a, b) in via_raw.data().iter().zip(via_adapted.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn standard_pca_bounds_invariant_pca() {
        let (rep, sab) = regular_d4();
        let raw = symmetrised(&rep, 40, 2);
        let set = raw.to_adapted(&sab).unwrap();
        let inv = invariant_pca(&set, &sab, 4).unwrap();
        let std = standard_pca(&raw, inv.d_out()).unwrap();
        let vi = projected_variance(&raw, &inv.w_matrix);
        let vs = projected_variance(&raw, &std.w_matrix);
        assert!(
            vi <= vs + 1e-9,
            "{vi} {vs} {} {:?}",
            inv.d_out(),
            inv.retained_blocks
        );
        assert!((vi - inv.explained_variance).abs() < 1e-9);
    }

    #[test]
    fn full_width_standard_pca_reconstructs() {
        let (rep, _) = regular_d4();
        let raw = symmetrised(&rep, 5, 4);
        let map = standard_pca(&raw, 8).unwrap();
        let mean = map.mean.clone().unwrap();
        for r in raw.rows() {
            let y = map.transform_vec(r, BasisState::Raw);
            let back = &map.w_matrix * DVector::from_vec(y);
            for i in 0..8 {
                assert!((back[i] + mean[i] - r[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let (rep, sab) = regular_d4();
        let set = symmetrised(&rep, 2, 5).to_adapted(&sab).unwrap();
        assert!(invariant_pca(&set, &sab, 9).is_err());
        assert!(invariant_pca(&set, &sab, 0).is_err());
        let one = LocalFeatureSet::new(rep, vec![0.0; 8], BasisState::Adapted).unwrap();
        assert!(invariant_pca(&one, &sab, 2).is_err());
    }
}
