use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{BasisState, LocalFeatureSet};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{serde_rows_vec, squared_distance};
use crate::representation::Representation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub clusters: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(clusters: usize, max_iter: usize, seed: u64) -> Self {
        KMeansConfig {
            clusters,
            max_iter,
            seed,
        }
    }
}

/// Nearest-centroid assignment of every descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// `(g, c)` per descriptor; `g = 0` for a plain codebook.
    pub pairs: Vec<(usize, usize)>,
    /// Squared distance of each descriptor to its centroid.
    pub distances: Vec<f64>,
    /// Member counts indexed `c * |G| + g`.
    pub counts: Vec<usize>,
    pub order: usize,
    pub objective: f64,
}

impl AssignmentResult {
    pub fn count(&self, g: usize, c: usize) -> usize {
        self.counts[c * self.order + g]
    }

    /// Members of orbit `c` over all `g`.
    pub fn orbit_count(&self, c: usize) -> usize {
        self.counts[c * self.order..(c + 1) * self.order]
            .iter()
            .sum()
    }
}

/// Centroid orbits `μ_{g,c} = π(g) μ_{e,c}` with optional tensors `T_{e,c}`.
#[derive(Clone, Debug)]
pub struct OrbitCodebook {
    pub base_centroids: Vec<Vec<f64>>,
    pub tensors: Option<Vec<DMatrix<f64>>>,
    pub seed: u64,
    pub iterations: usize,
    /// Objective at each assignment step.
    pub objective_history: Vec<f64>,
    pub objective: f64,
    pub reseeded: usize,
    /// Orbits whose tensor was set to zero for lack of members.
    pub empty_tensor_clusters: Vec<usize>,
    rep: Arc<Representation>,
}

/// Plain `K`-centroid codebook with optional tensors `T_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    pub tensors: Option<Vec<DMatrix<f64>>>,
    pub seed: u64,
    pub iterations: usize,
    pub objective_history: Vec<f64>,
    pub objective: f64,
    pub reseeded: usize,
    pub empty_tensor_clusters: Vec<usize>,
}

/// JSON form shared by both codebook kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookDocument {
    pub kind: String,
    pub group: String,
    pub clusters: usize,
    pub dim: usize,
    pub seed: u64,
    pub iterations: usize,
    pub objective: f64,
    pub objective_history: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
    #[serde(default, with = "opt_tensors")]
    pub tensors: Option<Vec<DMatrix<f64>>>,
}

mod opt_tensors {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::serde_rows_vec")] Vec<DMatrix<f64>>);

    pub fn serialize<S: Serializer>(
        t: &Option<Vec<DMatrix<f64>>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        t.as_ref().map(|v| Wrap(v.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Vec<DMatrix<f64>>>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

impl OrbitCodebook {
    pub fn rep(&self) -> &Arc<Representation> {
        &self.rep
    }

    pub fn clusters(&self) -> usize {
        self.base_centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.rep.dim()
    }

    pub fn centroid(&self, g: usize, c: usize) -> Vec<f64> {
        self.rep.apply(g, &self.base_centroids[c])
    }

    /// All `μ_{g,c}`, indexed `c * |G| + g`.
    pub fn orbit_centroids(&self) -> Vec<Vec<f64>> {
        orbit_of(&self.rep, &self.base_centroids)
    }

    /// `T_{g,c} = π(g) T_{e,c} π(g)ᵀ`.
    pub fn tensor(&self, g: usize, c: usize) -> Option<DMatrix<f64>> {
        self.tensors.as_ref().map(|t| self.rep.conjugate(g, &t[c]))
    }

    pub fn assign(&self, features: &LocalFeatureSet) -> Result<AssignmentResult> {
        check_dim(self.dim(), features.dim())?;
        Ok(assign_rows(
            features.data(),
            self.dim(),
            &self.orbit_centroids(),
            self.rep.group().order(),
        ))
    }

    pub fn to_document(&self) -> CodebookDocument {
        CodebookDocument {
            kind: "orbit".into(),
            group: self.rep.group().name.clone(),
            clusters: self.clusters(),
            dim: self.dim(),
            seed: self.seed,
            iterations: self.iterations,
            objective: self.objective,
            objective_history: self.objective_history.clone(),
            centroids: self.base_centroids.clone(),
            tensors: self.tensors.clone(),
        }
    }

    pub fn from_document(doc: CodebookDocument, rep: Arc<Representation>) -> Result<Self> {
        if doc.kind != "orbit" {
            return Err(Error::Format(format!(
                "expected an orbit codebook, found {}",
                doc.kind
            )));
        }
        check_dim(rep.dim(), doc.dim)?;
        check_centroids(&doc.centroids, doc.dim)?;
        Ok(OrbitCodebook {
            base_centroids: doc.centroids,
            tensors: doc.tensors,
            seed: doc.seed,
            iterations: doc.iterations,
            objective_history: doc.objective_history,
            objective: doc.objective,
            reseeded: 0,
            empty_tensor_clusters: Vec::new(),
            rep,
        })
    }
}

impl Codebook {
    pub fn clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    pub fn assign(&self, features: &LocalFeatureSet) -> Result<AssignmentResult> {
        check_dim(self.dim(), features.dim())?;
        Ok(assign_rows(features.data(), self.dim(), &self.centroids, 1))
    }

    pub fn to_document(&self) -> CodebookDocument {
        CodebookDocument {
            kind: "plain".into(),
            group: "none".into(),
            clusters: self.clusters(),
            dim: self.dim(),
            seed: self.seed,
            iterations: self.iterations,
            objective: self.objective,
            objective_history: self.objective_history.clone(),
            centroids: self.centroids.clone(),
            tensors: self.tensors.clone(),
        }
    }

    pub fn from_document(doc: CodebookDocument) -> Result<Self> {
        if doc.kind != "plain" {
            return Err(Error::Format(format!(
                "expected a plain codebook, found {}",
                doc.kind
            )));
        }
        check_centroids(&doc.centroids, doc.dim)?;
        Ok(Codebook {
            centroids: doc.centroids,
            tensors: doc.tensors,
            seed: doc.seed,
            iterations: doc.iterations,
            objective_history: doc.objective_history,
            objective: doc.objective,
            reseeded: 0,
            empty_tensor_clusters: Vec::new(),
        })
    }
}

fn check_centroids(centroids: &[Vec<f64>], dim: usize) -> Result<()> {
    if centroids.is_empty() {
        return Err(Error::Format("codebook has no centroids".into()));
    }
    for c in centroids {
        check_dim(dim, c.len())?;
    }
    Ok(())
}

fn orbit_of(rep: &Representation, base: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let order = rep.group().order();
    base.iter()
        .flat_map(|mu| (0..order).map(move |g| rep.apply(g, mu)))
        .collect()
}

/// Nearest centroid per row, scanning `c` then `g`; the first strict
/// minimum wins. `centroids` is indexed `c * order + g`.
fn assign_rows(data: &[f64], dim: usize, centroids: &[Vec<f64>], order: usize) -> AssignmentResult {
    let best: Vec<(usize, f64)> = data
        .par_chunks_exact(dim)
        .map(|x| {
            let mut arg = 0;
            let mut min = f64::INFINITY;
            for (k, mu) in centroids.iter().enumerate() {
                let d = squared_distance(x, mu);
                if d < min {
                    min = d;
                    arg = k;
                }
            }
            (arg, min)
        })
        .collect();
    let mut counts = vec![0; centroids.len()];
    let mut objective = 0.0;
    let mut pairs = Vec::with_capacity(best.len());
    let mut distances = Vec::with_capacity(best.len());
    for &(k, d) in &best {
        counts[k] += 1;
        objective += d;
        pairs.push((k % order, k / order));
        distances.push(d);
    }
    AssignmentResult {
        pairs,
        distances,
        counts,
        order,
        objective,
    }
}

fn validate_run(features: &LocalFeatureSet, cfg: &KMeansConfig) -> Result<()> {
    if cfg.clusters == 0 {
        return Err(Error::invalid("k-means needs at least one cluster"));
    }
    if features.len() < cfg.clusters {
        return Err(Error::invalid(format!(
            "k-means needs N >= C ({} < {})",
            features.len(),
            cfg.clusters
        )));
    }
    Ok(())
}

fn initial_centroids(features: &LocalFeatureSet, cfg: &KMeansConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rand::seq::index::sample(&mut rng, features.len(), cfg.clusters)
        .into_iter()
        .map(|i| features.row(i).to_vec())
        .collect()
}

/// Reseed every empty cluster, in index order, at the descriptor farthest
/// from its centroid (lowest index on ties); that descriptor's distance is
/// then taken as zero.
fn reseed_empty(
    centroids: &mut [Vec<f64>],
    counts: &[usize],
    distances: &mut [f64],
    features: &LocalFeatureSet,
) -> usize {
    let mut reseeded = 0;
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            continue;
        }
        let mut far = 0;
        for (i, &d) in distances.iter().enumerate() {
            if d > distances[far] {
                far = i;
            }
        }
        centroids[c] = features.row(far).to_vec();
        distances[far] = 0.0;
        reseeded += 1;
    }
    reseeded
}

/// Orbit k-means: nearest `μ_{g,c}` assignment, then
/// `μ_{e,c} = mean of π(g)⁻¹ x_n` over the whole orbit.
pub fn invariant_kmeans(features: &LocalFeatureSet, cfg: &KMeansConfig) -> Result<OrbitCodebook> {
    features.expect_state(BasisState::Raw)?;
    validate_run(features, cfg)?;
    let rep = features.rep().clone();
    let order = rep.group().order();
    let d = features.dim();
    let mut base = initial_centroids(features, cfg);
    let mut history = Vec::new();
    let mut previous: Option<Vec<(usize, usize)>> = None;
    let mut reseeded = 0;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        let mut a = assign_rows(features.data(), d, &orbit_of(&rep, &base), order);
        history.push(a.objective);
        iterations += 1;
        if previous.as_ref() == Some(&a.pairs) {
            break;
        }
        let mut sums = vec![vec![0.0; d]; cfg.clusters];
        let mut counts = vec![0usize; cfg.clusters];
        for (x, &(g, c)) in features.rows().zip(&a.pairs) {
            let y = rep.apply_inverse(g, x);
            sums[c].iter_mut().zip(&y).for_each(|(s, v)| *s += v);
            counts[c] += 1;
        }
        for c in 0..cfg.clusters {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                base[c] = sums[c].iter().map(|s| s / n).collect();
            }
        }
        reseeded += reseed_empty(&mut base, &counts, &mut a.distances, features);
        previous = Some(a.pairs);
    }

    let objective = assign_rows(features.data(), d, &orbit_of(&rep, &base), order).objective;
    Ok(OrbitCodebook {
        base_centroids: base,
        tensors: None,
        seed: cfg.seed,
        iterations,
        objective_history: history,
        objective,
        reseeded,
        empty_tensor_clusters: Vec::new(),
        rep,
    })
}

/// Lloyd's algorithm with the same initialisation, tie-break and reseeding.
pub fn standard_kmeans(features: &LocalFeatureSet, cfg: &KMeansConfig) -> Result<Codebook> {
    validate_run(features, cfg)?;
    let d = features.dim();
    let mut centroids = initial_centroids(features, cfg);
    let mut history = Vec::new();
    let mut previous: Option<Vec<(usize, usize)>> = None;
    let mut reseeded = 0;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        let mut a = assign_rows(features.data(), d, &centroids, 1);
        history.push(a.objective);
        iterations += 1;
        if previous.as_ref() == Some(&a.pairs) {
            break;
        }
        let mut sums = vec![vec![0.0; d]; cfg.clusters];
        for (x, &(_, c)) in features.rows().zip(&a.pairs) {
            sums[c].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for c in 0..cfg.clusters {
            if a.counts[c] > 0 {
                let n = a.counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s / n).collect();
            }
        }
        reseeded += reseed_empty(&mut centroids, &a.counts, &mut a.distances, features);
        previous = Some(a.pairs);
    }

    let objective = assign_rows(features.data(), d, &centroids, 1).objective;
    Ok(Codebook {
        centroids,
        tensors: None,
        seed: cfg.seed,
        iterations,
        objective_history: history,
        objective,
        reseeded,
        empty_tensor_clusters: Vec::new(),
    })
}

fn mean_outer(
    clusters: usize,
    d: usize,
    members: impl Iterator<Item = (usize, Vec<f64>)>,
) -> (Vec<DMatrix<f64>>, Vec<usize>) {
    let mut tensors = vec![DMatrix::zeros(d, d); clusters];
    let mut counts = vec![0usize; clusters];
    for (c, r) in members {
        let v = nalgebra::DVector::from_vec(r);
        tensors[c].syger(1.0, &v, &v, 1.0);
        counts[c] += 1;
    }
    let mut empty = Vec::new();
    for (c, t) in tensors.iter_mut().enumerate() {
        t.fill_upper_triangle_with_lower_triangle();
        if counts[c] == 0 {
            empty.push(c);
        } else {
            *t /= counts[c] as f64;
        }
    }
    (tensors, empty)
}

/// `T_{e,c}` = mean of `(π(g)⁻¹x − μ_{e,c})(π(g)⁻¹x − μ_{e,c})ᵀ` over orbit `c`.
pub fn compute_cluster_tensors(
    features: &LocalFeatureSet,
    codebook: &OrbitCodebook,
) -> Result<OrbitCodebook> {
    features.expect_state(BasisState::Raw)?;
    let a = codebook.assign(features)?;
    let rep = codebook.rep();
    let members = features.rows().zip(&a.pairs).map(|(x, &(g, c))| {
        let y = rep.apply_inverse(g, x);
        let r: Vec<f64> = y
            .iter()
            .zip(&codebook.base_centroids[c])
            .map(|(a, b)| a - b)
            .collect();
        (c, r)
    });
    let (tensors, empty) = mean_outer(codebook.clusters(), codebook.dim(), members);
    let mut out = codebook.clone();
    out.tensors = Some(tensors);
    out.empty_tensor_clusters = empty;
    Ok(out)
}

/// `T_c` = mean of `(x − μ_c)(x − μ_c)ᵀ` over cluster `c`.
pub fn compute_codebook_tensors(
    features: &LocalFeatureSet,
    codebook: &Codebook,
) -> Result<Codebook> {
    let a = codebook.assign(features)?;
    let members = features.rows().zip(&a.pairs).map(|(x, &(_, c))| {
        let r: Vec<f64> = x
            .iter()
            .zip(&codebook.centroids[c])
            .map(|(a, b)| a - b)
            .collect();
        (c, r)
    });
    let (tensors, empty) = mean_outer(codebook.clusters(), codebook.dim(), members);
    let mut out = codebook.clone();
    out.tensors = Some(tensors);
    out.empty_tensor_clusters = empty;
    Ok(out)
}
