//! Pooling of local descriptors into one global feature per sample.
//!
//! Baselines (`bp`, `ibp`, `vlad`, `vlat`) use plain averages or sums.
//! Invariant encoders compute coordinates of the trivial-representation
//! projection directly, without materialising the tensor space:
//!
//! * `inv_bp` / `inv_ibp` read copy-pair inner products off the
//!   symmetry-adapted coordinates, scaled so that the result is the
//!   coefficient vector in an orthonormal invariant basis;
//! * `inv_vlad` / `inv_vlat` pull residuals back along the centroid orbit.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, psd_sqrt, sym_vec, sym_vec_len};
use crate::modeling::{BasisState, Codebook, FeatureView, LocalFeatureSet, OrbitCodebook};
use crate::representation::{average_over_group, Representation, SymmetryAdaptedBasis};
use crate::MAX_MATERIALIZED_DIM;

/// Regulariser added before every matrix square root.
pub const SQRT_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bp,
    Ibp,
    Vlad,
    Vlat,
    InvBp,
    InvIbp,
    InvVlad,
    InvVlat,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Bp,
        Method::Ibp,
        Method::Vlad,
        Method::Vlat,
        Method::InvBp,
        Method::InvIbp,
        Method::InvVlad,
        Method::InvVlat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bp => "bp",
            Method::Ibp => "ibp",
            Method::Vlad => "vlad",
            Method::Vlat => "vlat",
            Method::InvBp => "inv_bp",
            Method::InvIbp => "inv_ibp",
            Method::InvVlad => "inv_vlad",
            Method::InvVlat => "inv_vlat",
        }
    }

    pub fn is_invariant(self) -> bool {
        matches!(
            self,
            Method::InvBp | Method::InvIbp | Method::InvVlad | Method::InvVlat
        )
    }

    /// Needs a codebook (plain for baselines, orbit for invariant methods).
    pub fn needs_codebook(self) -> bool {
        matches!(
            self,
            Method::Vlad | Method::Vlat | Method::InvVlad | Method::InvVlat
        )
    }

    pub fn needs_tensors(self) -> bool {
        matches!(self, Method::Vlat | Method::InvVlat)
    }

    /// The non-invariant method with the same pooling statistic.
    pub fn baseline(self) -> Method {
        match self {
            Method::InvBp => Method::Bp,
            Method::InvIbp => Method::Ibp,
            Method::InvVlad => Method::Vlad,
            Method::InvVlat => Method::Vlat,
            m => m,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown coding method `{s}`")))
    }
}

/// A contiguous range of a global feature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSegment {
    pub label: String,
    pub offset: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalFeature {
    pub vector: Vec<f64>,
    pub method: Method,
    pub dim: usize,
    pub layout: Vec<LayoutSegment>,
}

impl GlobalFeature {
    fn from_segments(method: Method, segments: Vec<(String, Vec<f64>)>) -> Self {
        let mut vector = Vec::new();
        let mut layout = Vec::with_capacity(segments.len());
        for (label, part) in segments {
            layout.push(LayoutSegment {
                label,
                offset: vector.len(),
                size: part.len(),
            });
            vector.extend(part);
        }
        GlobalFeature {
            dim: vector.len(),
            vector,
            method,
            layout,
        }
    }

    pub fn segment(&self, i: usize) -> &[f64] {
        let s = &self.layout[i];
        &self.vector[s.offset..s.offset + s.size]
    }

    /// Layout sizes sum to `dim` and `dim` equals the vector length.
    pub fn is_consistent(&self) -> bool {
        self.dim == self.vector.len()
            && self.layout.iter().map(|s| s.size).sum::<usize>() == self.dim
    }
}

/// Optional element-wise post-processing; both steps are off by default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostNorm {
    #[serde(default)]
    pub signed_sqrt: bool,
    #[serde(default)]
    pub l2: bool,
}

impl PostNorm {
    pub fn apply(&self, v: &mut [f64]) {
        if self.signed_sqrt {
            v.iter_mut().for_each(|x| *x = x.signum() * x.abs().sqrt());
        }
        if self.l2 {
            let n = norm(v);
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
}

fn non_empty(view: &FeatureView<'_>) -> Result<f64> {
    if view.is_empty() {
        Err(Error::invalid("cannot pool an empty sample"))
    } else {
        Ok(view.len() as f64)
    }
}

fn pooled_second_moment(view: &FeatureView<'_>) -> Result<DMatrix<f64>> {
    let n = non_empty(view)?;
    let d = view.dim();
    let mut a = DMatrix::zeros(d, d);
    for x in view.rows() {
        for i in 0..d {
            let xi = x[i];
            for j in i..d {
                a[(i, j)] += xi * x[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = a[(i, j)] / n;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// `sym_vec((1/N) Σ x xᵀ)`.
pub fn encode_bp(view: FeatureView<'_>) -> Result<GlobalFeature> {
    let a = pooled_second_moment(&view)?;
    Ok(GlobalFeature::from_segments(
        Method::Bp,
        vec![("bp".into(), sym_vec(&a))],
    ))
}

/// `sym_vec(sqrt((1/N) Σ x xᵀ + εI))`.
pub fn encode_ibp(view: FeatureView<'_>) -> Result<GlobalFeature> {
    let a = pooled_second_moment(&view)?;
    Ok(GlobalFeature::from_segments(
        Method::Ibp,
        vec![("ibp".into(), sym_vec(&psd_sqrt(&a, SQRT_EPS)))],
    ))
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut arg = 0;
    let mut min = f64::INFINITY;
    for (k, mu) in centroids.iter().enumerate() {
        let d = crate::linalg::squared_distance(x, mu);
        if d < min {
            min = d;
            arg = k;
        }
    }
    arg
}

/// Per cluster `Σ_{x ∈ S_c} (x − μ_c)`.
pub fn encode_vlad(view: FeatureView<'_>, codebook: &Codebook) -> Result<GlobalFeature> {
    check_dim(codebook.dim(), view.dim())?;
    non_empty(&view)?;
    let d = view.dim();
    let mut blocks = vec![vec![0.0; d]; codebook.clusters()];
    for x in view.rows() {
        let c = nearest(x, &codebook.centroids);
        for (b, (xi, mi)) in blocks[c]
            .iter_mut()
            .zip(x.iter().zip(&codebook.centroids[c]))
        {
            *b += xi - mi;
        }
    }
    Ok(GlobalFeature::from_segments(
        Method::Vlad,
        blocks
            .into_iter()
            .enumerate()
            .map(|(c, b)| (format!("c{c}"), b))
            .collect(),
    ))
}

fn add_centred_outer(acc: &mut DMatrix<f64>, r: &[f64]) {
    let d = r.len();
    for i in 0..d {
        for j in i..d {
            acc[(i, j)] += r[i] * r[j];
        }
    }
}

fn symmetrise_upper(acc: &mut DMatrix<f64>) {
    acc.fill_lower_triangle_with_upper_triangle();
}

/// Per cluster `sym_vec(Σ_{x ∈ S_c} [(x − μ_c)(x − μ_c)ᵀ − T_c])`.
pub fn encode_vlat(view: FeatureView<'_>, codebook: &Codebook) -> Result<GlobalFeature> {
    check_dim(codebook.dim(), view.dim())?;
    non_empty(&view)?;
    let tensors = codebook.tensors.as_ref().ok_or(Error::MissingTensors)?;
    let d = view.dim();
    let k = codebook.clusters();
    let mut acc = vec![DMatrix::zeros(d, d); k];
    let mut counts = vec![0usize; k];
    for x in view.rows() {
        let c = nearest(x, &codebook.centroids);
        let r: Vec<f64> = x
            .iter()
            .zip(&codebook.centroids[c])
            .map(|(a, b)| a - b)
            .collect();
        add_centred_outer(&mut acc[c], &r);
        counts[c] += 1;
    }
    let segments = acc
        .into_iter()
        .enumerate()
        .map(|(c, mut m)| {
            symmetrise_upper(&mut m);
            m -= &tensors[c] * counts[c] as f64;
            (format!("c{c}"), sym_vec(&m))
        })
        .collect();
    Ok(GlobalFeature::from_segments(Method::Vlat, segments))
}

/// Per irrep type `t` the `n_t × n_t` matrix `G[o1][o2] = (1/N) Σ ⟨x^{(t,o1)}, x^{(t,o2)}⟩`.
fn copy_gram(
    view: &FeatureView<'_>,
    basis: &SymmetryAdaptedBasis,
) -> Result<Vec<(usize, DMatrix<f64>)>> {
    view.expect_state(BasisState::Adapted)?;
    check_dim(basis.dim(), view.dim())?;
    let n = non_empty(view)?;
    let mut out = Vec::new();
    for t in 0..basis.irreps().len() {
        let blocks: Vec<_> = basis.blocks_of(t).collect();
        if blocks.is_empty() {
            continue;
        }
        let k = blocks.len();
        let size = blocks[0].size;
        let mut g = DMatrix::zeros(k, k);
        for x in view.rows() {
            for o1 in 0..k {
                let a = &x[blocks[o1].offset..blocks[o1].offset + size];
                for o2 in o1..k {
                    let b = &x[blocks[o2].offset..blocks[o2].offset + size];
                    g[(o1, o2)] += a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
                }
            }
        }
        g /= n;
        symmetrise_upper(&mut g);
        out.push((t, g));
    }
    Ok(out)
}

fn scaled_sym_vec(m: &DMatrix<f64>, irrep_dim: usize) -> Vec<f64> {
    let s = 1.0 / (irrep_dim as f64).sqrt();
    sym_vec(m).into_iter().map(|v| v * s).collect()
}

/// Per irrep type, copy pairs `o1 ≤ o2`: `(1/N) Σ ⟨x^{(t,o1)}, x^{(t,o2)}⟩ · s`
/// with `s = 1/√d_t` on the diagonal and `√2/√d_t` off it.
pub fn encode_inv_bp(view: FeatureView<'_>, basis: &SymmetryAdaptedBasis) -> Result<GlobalFeature> {
    let irreps = basis.irreps();
    let segments = copy_gram(&view, basis)?
        .into_iter()
        .map(|(t, g)| (irreps[t].label.clone(), scaled_sym_vec(&g, irreps[t].dim)))
        .collect();
    Ok(GlobalFeature::from_segments(Method::InvBp, segments))
}

/// As [`encode_inv_bp`] with each per-type copy matrix replaced by
/// `sqrt(G_t + εI)` before vectorisation.
pub fn encode_inv_ibp(
    view: FeatureView<'_>,
    basis: &SymmetryAdaptedBasis,
) -> Result<GlobalFeature> {
    let irreps = basis.irreps();
    let segments = copy_gram(&view, basis)?
        .into_iter()
        .map(|(t, g)| {
            let root = psd_sqrt(&g, SQRT_EPS);
            (
                irreps[t].label.clone(),
                scaled_sym_vec(&root, irreps[t].dim),
            )
        })
        .collect();
    Ok(GlobalFeature::from_segments(Method::InvIbp, segments))
}

fn check_orbit(view: &FeatureView<'_>, codebook: &OrbitCodebook) -> Result<()> {
    view.expect_state(BasisState::Raw)?;
    check_dim(codebook.dim(), view.dim())?;
    let (a, b) = (view.rep().group(), codebook.rep().group());
    if **a != **b {
        return Err(Error::GroupMismatch(a.name.clone(), b.name.clone()));
    }
    non_empty(view).map(|_| ())
}

/// Nearest `(g, c)` and the pulled-back residual `π(g)⁻¹ x − μ_{e,c}`.
fn pulled_back_residuals<'a>(
    view: &'a FeatureView<'_>,
    codebook: &'a OrbitCodebook,
    orbit: &'a [Vec<f64>],
) -> impl Iterator<Item = (usize, Vec<f64>)> + 'a {
    let order = codebook.rep().group().order();
    view.rows().map(move |x| {
        let k = nearest(x, orbit);
        let (g, c) = (k % order, k / order);
        let y = codebook.rep().apply_inverse(g, x);
        let r = y
            .iter()
            .zip(&codebook.base_centroids[c])
            .map(|(a, b)| a - b)
            .collect();
        (c, r)
    })
}

/// Per orbit `v_c = (1/(N|G|)) Σ_g π(g)⁻¹ Σ_{x ∈ S_{g,c}} (x − μ_{g,c})`.
pub fn encode_inv_vlad(view: FeatureView<'_>, codebook: &OrbitCodebook) -> Result<GlobalFeature> {
    check_orbit(&view, codebook)?;
    let d = view.dim();
    let scale = 1.0 / (view.len() * codebook.rep().group().order()) as f64;
    let orbit = codebook.orbit_centroids();
    let mut blocks = vec![vec![0.0; d]; codebook.clusters()];
    for (c, r) in pulled_back_residuals(&view, codebook, &orbit) {
        blocks[c].iter_mut().zip(&r).for_each(|(b, v)| *b += v);
    }
    let segments = blocks
        .into_iter()
        .enumerate()
        .map(|(c, b)| (format!("c{c}"), b.into_iter().map(|v| v * scale).collect()))
        .collect();
    Ok(GlobalFeature::from_segments(Method::InvVlad, segments))
}

/// Per orbit `sym_vec(B_c)` with
/// `B_c = (1/(N|G|)) Σ_g π(g)⁻¹ M_{g,c} π(g)⁻ᵀ`,
/// `M_{g,c} = Σ_{x ∈ S_{g,c}} [(x − μ_{g,c})(x − μ_{g,c})ᵀ − T_{g,c}]`.
pub fn encode_inv_vlat(view: FeatureView<'_>, codebook: &OrbitCodebook) -> Result<GlobalFeature> {
    check_orbit(&view, codebook)?;
    let tensors = codebook.tensors.as_ref().ok_or(Error::MissingTensors)?;
    let d = view.dim();
    let k = codebook.clusters();
    let scale = 1.0 / (view.len() * codebook.rep().group().order()) as f64;
    let orbit = codebook.orbit_centroids();
    let mut acc = vec![DMatrix::zeros(d, d); k];
    let mut counts = vec![0usize; k];
    for (c, r) in pulled_back_residuals(&view, codebook, &orbit) {
        add_centred_outer(&mut acc[c], &r);
        counts[c] += 1;
    }
    let segments = acc
        .into_iter()
        .enumerate()
        .map(|(c, mut m)| {
            symmetrise_upper(&mut m);
            m -= &tensors[c] * counts[c] as f64;
            m *= scale;
            (format!("c{c}"), sym_vec(&m))
        })
        .collect();
    Ok(GlobalFeature::from_segments(Method::InvVlat, segments))
}

/// `(1/|G|) Σ_g π(g) v`, refused above the materialisation limit.
pub fn brute_force_trivial_projection(rep: &Representation, v: &[f64]) -> Result<Vec<f64>> {
    check_dim(rep.dim(), v.len())?;
    if rep.dim() > MAX_MATERIALIZED_DIM {
        return Err(Error::TooLarge {
            dim: rep.dim(),
            limit: MAX_MATERIALIZED_DIM,
        });
    }
    Ok(average_over_group(rep, v))
}

/// Fitted models an encoder may draw on.
#[derive(Clone, Copy, Debug, Default)]
pub struct CodingModels<'a> {
    pub basis: Option<&'a SymmetryAdaptedBasis>,
    pub codebook: Option<&'a Codebook>,
    pub orbit: Option<&'a OrbitCodebook>,
}

fn missing(what: &str, method: Method) -> Error {
    Error::invalid(format!("{method} requires a fitted {what}"))
}

/// Encode one sample. `inv_bp`/`inv_ibp` expect adapted rows; the others raw rows.
pub fn encode_sample(
    method: Method,
    view: FeatureView<'_>,
    models: &CodingModels<'_>,
) -> Result<GlobalFeature> {
    match method {
        Method::Bp => encode_bp(view),
        Method::Ibp => encode_ibp(view),
        Method::Vlad => encode_vlad(
            view,
            models.codebook.ok_or_else(|| missing("codebook", method))?,
        ),
        Method::Vlat => encode_vlat(
            view,
            models.codebook.ok_or_else(|| missing("codebook", method))?,
        ),
        Method::InvBp => encode_inv_bp(view, models.basis.ok_or_else(|| missing("basis", method))?),
        Method::InvIbp => {
            encode_inv_ibp(view, models.basis.ok_or_else(|| missing("basis", method))?)
        }
        Method::InvVlad => encode_inv_vlad(
            view,
            models
                .orbit
                .ok_or_else(|| missing("orbit codebook", method))?,
        ),
        Method::InvVlat => encode_inv_vlat(
            view,
            models
                .orbit
                .ok_or_else(|| missing("orbit codebook", method))?,
        ),
    }
}

/// Encode every sample of a grouped set, in sample order; samples are
/// processed in parallel and each is pooled sequentially. Raw input to
/// `inv_bp`/`inv_ibp` is first mapped to adapted coordinates.
pub fn encode_set(
    method: Method,
    features: &LocalFeatureSet,
    models: &CodingModels<'_>,
    post: PostNorm,
) -> Result<Vec<GlobalFeature>> {
    let adapted;
    let features = match (method, features.state(), models.basis) {
        (Method::InvBp | Method::InvIbp, BasisState::Raw, Some(basis)) => {
            adapted = features.to_adapted(basis)?;
            &adapted
        }
        _ => features,
    };
    (0..features.num_samples())
        .into_par_iter()
        .map(|s| {
            let mut f = encode_sample(method, features.sample(s), models)?;
            post.apply(&mut f.vector);
            Ok(f)
        })
        .collect()
}

/// Expected output dimension for a method.
pub fn output_dim(
    method: Method,
    d: usize,
    clusters: usize,
    basis: Option<&SymmetryAdaptedBasis>,
) -> usize {
    match method {
        Method::Bp | Method::Ibp => sym_vec_len(d),
        Method::Vlad | Method::InvVlad => clusters * d,
        Method::Vlat | Method::InvVlat => clusters * sym_vec_len(d),
        Method::InvBp | Method::InvIbp => basis
            .map(|b| b.multiplicities().iter().map(|&n| sym_vec_len(n)).sum())
            .unwrap_or(0),
    }
}
