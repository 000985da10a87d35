//! End-to-end experiment: synthesise, decompose, project, cluster, encode,
//! train and evaluate on the test set and its group-augmented copy.
//!
//! Baseline methods run on standard PCA and plain k-means; invariant methods
//! on invariant PCA and orbit k-means. The augmented test set applies every
//! group element, the identity included, to the raw test descriptors before
//! projection.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{accuracy, predict, train_linear, Loss, TrainConfig};
use crate::coding::{encode_set, CodingModels, GlobalFeature, Method, PostNorm};
use crate::error::{Error, Result};
use crate::harness::format::{write_global, write_local, RepresentationSpec};
use crate::harness::synthetic::{generate_synthetic, SyntheticDataset, SyntheticDatasetSpec};
use crate::modeling::{
    compute_cluster_tensors, compute_codebook_tensors, invariant_kmeans, invariant_pca,
    standard_kmeans, standard_pca, Codebook, KMeansConfig, LocalFeatureSet, OrbitCodebook,
    ProjectionMap,
};
use crate::representation::{symmetry_adapted_basis, SymmetryAdaptedBasis};
use crate::verify::relative_change;

fn default_pca_dim() -> usize {
    16
}
fn default_clusters() -> usize {
    8
}
fn default_orbit_clusters() -> usize {
    1
}
fn default_kmeans_iter() -> usize {
    50
}
fn default_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.as_str().to_string()).collect()
}
fn default_lambda() -> f64 {
    1e-3
}
fn default_loss() -> Loss {
    Loss::Hinge
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: SyntheticDatasetSpec,
    #[serde(default = "default_pca_dim")]
    pub pca_dim: usize,
    /// Plain codebook size `K`.
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    /// Number of orbits `C` of the invariant codebook.
    #[serde(default = "default_orbit_clusters")]
    pub orbit_clusters: usize,
    #[serde(default = "default_kmeans_iter")]
    pub kmeans_max_iter: usize,
    /// Method tags, parsed during the encode stage.
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_loss")]
    pub loss: Loss,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub post_norm: PostNorm,
    /// Seed for k-means and the classifier; the dataset has its own.
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(dataset: SyntheticDatasetSpec) -> Self {
        PipelineConfig {
            dataset,
            pca_dim: default_pca_dim(),
            clusters: default_clusters(),
            orbit_clusters: default_orbit_clusters(),
            kmeans_max_iter: default_kmeans_iter(),
            methods: default_methods(),
            loss: default_loss(),
            lambda: default_lambda(),
            post_norm: PostNorm::default(),
            seed: 0,
        }
    }

    /// A pose-biased D4 configuration whose baselines degrade under augmentation.
    pub fn pose_biased_demo() -> Self {
        let mut ds = SyntheticDatasetSpec::new(crate::group::GroupName::D4);
        ds.classes = 4;
        ds.samples_per_class = 30;
        ds.test_samples_per_class = 20;
        ds.descriptors_per_sample = 12;
        ds.class_signal = 1.0;
        ds.pose_bias = 2.0;
        ds.noise = 0.4;
        ds.seed = 7;
        let mut cfg = PipelineConfig::new(ds);
        // fewer plain centroids than classes, so residuals carry class offsets
        cfg.clusters = 2;
        cfg.post_norm = PostNorm {
            signed_sqrt: false,
            l2: true,
        };
        cfg
    }

    fn train_config(&self) -> TrainConfig {
        let mut t = match self.loss {
            Loss::Hinge => TrainConfig::hinge(self.lambda),
            Loss::Logistic => TrainConfig::logistic(self.lambda),
        };
        t.seed = self.seed;
        t
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.clusters == 0 || self.orbit_clusters == 0 || self.kmeans_max_iter == 0 {
            return Err(Error::Config(
                "cluster counts and k-means iterations must be positive".into(),
            ));
        }
        self.dataset.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub invariant: bool,
    pub dim: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub augmented_accuracy: f64,
    /// `test_accuracy − augmented_accuracy`.
    pub accuracy_drop: f64,
    /// Largest relative feature change over test samples and group elements.
    pub invariance_gap: f64,
    pub objective: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub d_in: usize,
    pub d_out: usize,
    pub explained_variance: f64,
    pub total_variance: f64,
}

impl From<&ProjectionMap> for ProjectionSummary {
    fn from(p: &ProjectionMap) -> Self {
        ProjectionSummary {
            d_in: p.d_in(),
            d_out: p.d_out(),
            explained_variance: p.explained_variance,
            total_variance: p.total_variance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: PipelineConfig,
    pub group: String,
    pub group_order: usize,
    pub descriptor_dim: usize,
    pub multiplicities: Vec<usize>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub augmented_samples: usize,
    pub standard_projection: Option<ProjectionSummary>,
    pub invariant_projection: Option<ProjectionSummary>,
    pub methods: Vec<MethodReport>,
    /// Seconds per stage; excluded from determinism.
    pub timings: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// The report without wall-clock data.
    pub fn without_timings(&self) -> Self {
        ExperimentReport {
            timings: BTreeMap::new(),
            ..self.clone()
        }
    }
}

/// Projected train / test / augmented-test descriptors for one branch.
struct Branch {
    projection: ProjectionMap,
    train: LocalFeatureSet,
    test: LocalFeatureSet,
    augmented: Vec<LocalFeatureSet>,
}

impl Branch {
    fn fit(projection: ProjectionMap, ds: &SyntheticDataset) -> Result<Self> {
        let train = projection.transform(&ds.train.features)?;
        let test = projection.transform(&ds.test.features)?;
        let augmented = (0..ds.group.order())
            .map(|g| projection.transform(&ds.test.features.transformed(g)?))
            .collect::<Result<_>>()?;
        Ok(Branch {
            projection,
            train,
            test,
            augmented,
        })
    }
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        *self.0.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }
}

fn write_json<T: Serialize>(dir: Option<&Path>, name: &str, value: &T) -> Result<()> {
    if let Some(dir) = dir {
        fs::write(dir.join(name), serde_json::to_vec_pretty(value)?)?;
    }
    Ok(())
}

fn vectors(f: &[GlobalFeature]) -> Vec<Vec<f64>> {
    f.iter().map(|g| g.vector.clone()).collect()
}

/// Run the full experiment; with `out`, every artifact is written there.
pub fn run_pipeline(config: &PipelineConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    config.validate()?;
    let methods: Vec<Method> = config
        .methods
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("encode"))?;
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()).in_stage("encode"));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let mut timer = Timer(BTreeMap::new());

    let ds = timer.run("synth", || generate_synthetic(&config.dataset))?;
    timer.run("synth", || {
        if let Some(dir) = out {
            let spec = RepresentationSpec::Template {
                group: config.dataset.group,
                template: config.dataset.template,
            };
            write_local(
                &dir.join("train.itfc"),
                &ds.train.features,
                &spec,
                Some(&ds.train.labels),
            )?;
            write_local(
                &dir.join("test.itfc"),
                &ds.test.features,
                &spec,
                Some(&ds.test.labels),
            )?;
        }
        Ok(())
    })?;

    let basis = timer.run("decompose", || {
        let b = symmetry_adapted_basis(&ds.rep, &ds.irreps)?;
        write_json(out, "basis.json", &b.to_document())?;
        Ok(b)
    })?;

    let want_baseline = methods.iter().any(|m| !m.is_invariant());
    let want_invariant = methods.iter().any(|m| m.is_invariant());
    let d_proj = config.pca_dim;

    let (baseline, invariant) = timer.run("pca", || {
        let baseline = if want_baseline {
            let p = standard_pca(&ds.train.features, d_proj)?;
            write_json(out, "projection_standard.json", &p.to_document())?;
            Some(Branch::fit(p, &ds)?)
        } else {
            None
        };
        let invariant = if want_invariant {
            let adapted = ds.train.features.to_adapted(&basis)?;
            let p = invariant_pca(&adapted, &basis, d_proj)?;
            write_json(out, "projection_invariant.json", &p.to_document())?;
            Some(Branch::fit(p, &ds)?)
        } else {
            None
        };
        Ok((baseline, invariant))
    })?;

    let (codebook, orbit) = timer.run("kmeans", || {
        let plain_needed = methods
            .iter()
            .any(|m| !m.is_invariant() && m.needs_codebook());
        let orbit_needed = methods
            .iter()
            .any(|m| m.is_invariant() && m.needs_codebook());
        let codebook: Option<Codebook> = match (&baseline, plain_needed) {
            (Some(b), true) => {
                let cfg = KMeansConfig::new(config.clusters, config.kmeans_max_iter, config.seed);
                let cb = compute_codebook_tensors(&b.train, &standard_kmeans(&b.train, &cfg)?)?;
                write_json(out, "codebook_plain.json", &cb.to_document())?;
                Some(cb)
            }
            _ => None,
        };
        let orbit: Option<OrbitCodebook> = match (&invariant, orbit_needed) {
            (Some(b), true) => {
                let cfg =
                    KMeansConfig::new(config.orbit_clusters, config.kmeans_max_iter, config.seed);
                let cb = compute_cluster_tensors(&b.train, &invariant_kmeans(&b.train, &cfg)?)?;
                write_json(out, "codebook_orbit.json", &cb.to_document())?;
                Some(cb)
            }
            _ => None,
        };
        Ok((codebook, orbit))
    })?;

    let output_basis: Option<SymmetryAdaptedBasis> = match &invariant {
        Some(b) => Some(
            b.projection
                .output_basis()
                .map_err(|e| e.in_stage("encode"))?,
        ),
        None => None,
    };
    let models = CodingModels {
        basis: output_basis.as_ref(),
        codebook: codebook.as_ref(),
        orbit: orbit.as_ref(),
    };

    let train_cfg = config.train_config();
    let mut reports = Vec::with_capacity(methods.len());
    for &method in &methods {
        let branch = if method.is_invariant() {
            invariant.as_ref()
        } else {
            baseline.as_ref()
        }
        .expect("branch fitted for every requested method");

        let (train_f, test_f, aug_f) = timer.run("encode", || {
            let tr = encode_set(method, &branch.train, &models, config.post_norm)?;
            let te = encode_set(method, &branch.test, &models, config.post_norm)?;
            let aug = branch
                .augmented
                .iter()
                .map(|a| encode_set(method, a, &models, config.post_norm))
                .collect::<Result<Vec<_>>>()?;
            if let Some(dir) = out {
                let tag = method.as_str();
                write_global(
                    &dir.join(format!("{tag}_train.itfc")),
                    &tr,
                    Some(&ds.train.labels),
                )?;
                write_global(
                    &dir.join(format!("{tag}_test.itfc")),
                    &te,
                    Some(&ds.test.labels),
                )?;
            }
            Ok((tr, te, aug))
        })?;

        let model = timer.run("train", || {
            let m = train_linear(&vectors(&train_f), &ds.train.labels, &train_cfg)?;
            write_json(out, &format!("model_{}.json", method.as_str()), &m)?;
            Ok(m)
        })?;

        let report = timer.run("evaluate", || {
            let (train_pred, _) = predict(&model, &vectors(&train_f))?;
            let (test_pred, _) = predict(&model, &vectors(&test_f))?;
            let mut aug_pred = Vec::new();
            let mut aug_truth = Vec::new();
            let mut gap = 0.0f64;
            for a in &aug_f {
                aug_pred.extend(predict(&model, &vectors(a))?.0);
                aug_truth.extend_from_slice(&ds.test.labels);
                for (base, moved) in test_f.iter().zip(a) {
                    gap = gap.max(relative_change(&base.vector, &moved.vector));
                }
            }
            let test_accuracy = accuracy(&test_pred, &ds.test.labels);
            let augmented_accuracy = accuracy(&aug_pred, &aug_truth);
            Ok(MethodReport {
                method,
                invariant: method.is_invariant(),
                dim: test_f.first().map_or(0, |f| f.dim),
                train_accuracy: accuracy(&train_pred, &ds.train.labels),
                test_accuracy,
                augmented_accuracy,
                accuracy_drop: test_accuracy - augmented_accuracy,
                invariance_gap: gap,
                objective: model.objective.clone(),
            })
        })?;
        reports.push(report);
    }

    let multiplicities = basis.multiplicities().to_vec();
    let report = ExperimentReport {
        config: config.clone(),
        group: ds.group.name.clone(),
        group_order: ds.group.order(),
        descriptor_dim: ds.rep.dim(),
        multiplicities,
        train_samples: ds.train.labels.len(),
        test_samples: ds.test.labels.len(),
        augmented_samples: ds.test.labels.len() * ds.group.order(),
        standard_projection: baseline.as_ref().map(|b| (&b.projection).into()),
        invariant_projection: invariant.as_ref().map(|b| (&b.projection).into()),
        methods: reports,
        timings: timer.0,
    };
    write_json(out, "report.json", &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupName;

    fn small() -> PipelineConfig {
        let mut ds = SyntheticDatasetSpec::new(GroupName::Z2);
        ds.template = crate::harness::synthetic::DescriptorTemplate::new(4, 2);
        ds.classes = 2;
        ds.samples_per_class = 6;
        ds.test_samples_per_class = 4;
        ds.descriptors_per_sample = 5;
        let mut cfg = PipelineConfig::new(ds);
        cfg.pca_dim = 4;
        cfg.clusters = 2;
        cfg
    }

    #[test]
    fn unknown_method_fails_in_encode_stage() {
        let mut cfg = small();
        cfg.methods = vec!["bp".into(), "fisher".into()];
        let err = run_pipeline(&cfg, None).unwrap_err();
        assert_eq!(err.stage(), Some("encode"));
    }

    #[test]
    fn small_run_is_deterministic_and_invariant() {
        let cfg = small();
        let a = run_pipeline(&cfg, None).unwrap();
        let b = run_pipeline(&cfg, None).unwrap();
        assert_eq!(a.without_timings(), b.without_timings());
        assert_eq!(a.augmented_samples, 2 * a.test_samples);
        for m in &a.methods {
            assert!((0.0..=1.0).contains(&m.test_accuracy));
            if m.invariant {
                assert_eq!(m.test_accuracy, m.augmented_accuracy, "{:?}", m.method);
                assert!(
                    m.invariance_gap <= 1e-10,
                    "{:?} gap {}",
                    m.method,
                    m.invariance_gap
                );
            }
        }
    }
}
