use std::fs;

use itfc::coding::Method;
use itfc::group::GroupName;
use itfc::harness::format::{read_global, read_local, write_local, RepresentationSpec};
use itfc::harness::{generate_synthetic, run_pipeline, PipelineConfig, SyntheticDatasetSpec};
use itfc::modeling::{OrbitCodebook, ProjectionMap};
use itfc::representation::symmetry_adapted_basis;

fn small_d4() -> PipelineConfig {
    let mut ds = SyntheticDatasetSpec::new(GroupName::D4);
    ds.template = itfc::harness::DescriptorTemplate::new(4, 4);
    ds.classes = 3;
    ds.samples_per_class = 8;
    ds.test_samples_per_class = 4;
    ds.descriptors_per_sample = 6;
    ds.pose_bias = 1.0;
    let mut cfg = PipelineConfig::new(ds);
    cfg.pca_dim = 6;
    cfg.clusters = 2;
    cfg
}

#[test]
fn local_features_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticDatasetSpec::new(GroupName::D6)).unwrap();
    let spec = RepresentationSpec::Template {
        group: GroupName::D6,
        template: ds.spec.template,
    };
    let path = dir.path().join("train.itfc");
    write_local(&path, &ds.train.features, &spec, Some(&ds.train.labels)).unwrap();
    let back = read_local(&path).unwrap();
    assert_eq!(back.labels.as_deref(), Some(ds.train.labels.as_slice()));
    assert_eq!(back.features.grouping(), ds.train.features.grouping());
    assert_eq!(back.features.rep().character(), ds.rep.character());
    let same = back
        .features
        .data()
        .iter()
        .zip(ds.train.features.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    assert!(same);
}

#[test]
fn pipeline_writes_every_artifact_and_they_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_d4();
    let report = run_pipeline(&cfg, Some(dir.path())).unwrap();
    for name in [
        "train.itfc",
        "test.itfc",
        "basis.json",
        "projection_standard.json",
        "projection_invariant.json",
        "codebook_plain.json",
        "codebook_orbit.json",
        "report.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    for m in Method::ALL {
        let f = read_global(&dir.path().join(format!("{}_test.itfc", m.as_str()))).unwrap();
        assert_eq!(f.features.len(), report.test_samples);
        assert_eq!(f.features[0].dim, report.method(m).unwrap().dim);
        assert!(dir
            .path()
            .join(format!("model_{}.json", m.as_str()))
            .exists());
    }

    let train = read_local(&dir.path().join("train.itfc")).unwrap();
    let (_, irreps) = GroupName::D4.build();
    let basis = symmetry_adapted_basis(train.features.rep(), &irreps).unwrap();
    let doc =
        serde_json::from_slice(&fs::read(dir.path().join("projection_invariant.json")).unwrap())
            .unwrap();
    let proj =
        ProjectionMap::from_document(doc, train.features.rep().clone(), Some(&basis)).unwrap();
    assert!(proj.max_intertwining_error() <= 1e-10);
    let out_spec = RepresentationSpec::of_projection(GroupName::D4, &proj);
    let out_rep = out_spec.build().unwrap();
    assert_eq!(out_rep.character(), proj.output_rep().character());
    let doc =
        serde_json::from_slice(&fs::read(dir.path().join("codebook_orbit.json")).unwrap()).unwrap();
    let cb = OrbitCodebook::from_document(doc, out_rep).unwrap();
    assert_eq!(cb.clusters(), cfg.orbit_clusters);
    assert!(cb.tensors.is_some());
}

#[test]
fn thread_count_does_not_change_reports() {
    let cfg = small_d4();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_pipeline(&cfg, None).unwrap())
            .without_timings()
    };
    let one = serde_json::to_string(&run(1)).unwrap();
    let four = serde_json::to_string(&run(4)).unwrap();
    assert_eq!(one, four);
}

#[test]
fn invariant_methods_keep_accuracy_under_augmentation() {
    let report = run_pipeline(&small_d4(), None).unwrap();
    assert_eq!(report.augmented_samples, 8 * report.test_samples);
    for m in report.methods.iter().filter(|m| m.invariant) {
        assert_eq!(m.test_accuracy, m.augmented_accuracy, "{}", m.method);
    }
}

#[test]
fn bad_configs_surface_as_errors() {
    let mut cfg = small_d4();
    cfg.methods = vec!["nope".into()];
    assert_eq!(
        run_pipeline(&cfg, None).unwrap_err().stage(),
        Some("encode")
    );
    let mut cfg = small_d4();
    cfg.dataset.classes = 0;
    assert!(matches!(
        run_pipeline(&cfg, None),
        Err(itfc::Error::Config(_))
    ));
    let mut cfg = small_d4();
    cfg.pca_dim = 1000;
    assert_eq!(run_pipeline(&cfg, None).unwrap_err().stage(), Some("pca"));
}
