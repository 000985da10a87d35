use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use itfc::coding::{
    encode_inv_bp, encode_inv_vlad, encode_inv_vlat, encode_set, CodingModels, Method, PostNorm,
};
use itfc::group::GroupName;
use itfc::harness::{generate_synthetic, SyntheticDataset, SyntheticDatasetSpec};
use itfc::modeling::{
    compute_cluster_tensors, invariant_kmeans, invariant_pca, KMeansConfig, LocalFeatureSet,
};
use itfc::representation::symmetry_adapted_basis;

fn dataset(group: GroupName) -> SyntheticDataset {
    let mut spec = SyntheticDatasetSpec::new(group);
    spec.classes = 4;
    spec.samples_per_class = 10;
    spec.descriptors_per_sample = 20;
    spec.pose_bias = 1.0;
    generate_synthetic(&spec).expect("valid spec")
}

fn decomposition(c: &mut Criterion) {
    let mut g = c.benchmark_group("adapted_basis");
    for group in [GroupName::D4, GroupName::D6] {
        let ds = dataset(group);
        g.bench_function(format!("{group}_{}", ds.rep.dim()), |b| {
            b.iter(|| symmetry_adapted_basis(black_box(&ds.rep), &ds.irreps).unwrap())
        });
    }
    g.finish();
}

/// Projected, adapted training descriptors of the D4 128-dim template.
fn projected() -> LocalFeatureSet {
    let ds = dataset(GroupName::D4);
    let basis = symmetry_adapted_basis(&ds.rep, &ds.irreps).unwrap();
    let adapted = ds.train.features.to_adapted(&basis).unwrap();
    invariant_pca(&adapted, &basis, 32)
        .unwrap()
        .transform(&ds.train.features)
        .unwrap()
}

fn clustering(c: &mut Criterion) {
    let train = projected();
    let mut g = c.benchmark_group("orbit_kmeans");
    for clusters in [1, 4] {
        let cfg = KMeansConfig::new(clusters, 20, 3);
        g.bench_function(format!("c{clusters}"), |b| {
            b.iter(|| invariant_kmeans(black_box(&train), &cfg).unwrap())
        });
    }
    g.finish();
}

fn encoding(c: &mut Criterion) {
    let train = projected();
    let cfg = KMeansConfig::new(2, 20, 3);
    let orbit = compute_cluster_tensors(&train, &invariant_kmeans(&train, &cfg).unwrap()).unwrap();
    let sab_basis = symmetry_adapted_basis(orbit.rep(), &GroupName::D4.build().1).unwrap();
    let adapted = train.to_adapted(&sab_basis).unwrap();
    let sample = train.sample(0);

    let mut g = c.benchmark_group("encode_one_sample");
    g.bench_function("inv_bp", |b| {
        b.iter(|| encode_inv_bp(black_box(adapted.sample(0)), &sab_basis).unwrap())
    });
    g.bench_function("inv_vlad", |b| {
        b.iter(|| encode_inv_vlad(black_box(sample), &orbit).unwrap())
    });
    g.bench_function("inv_vlat", |b| {
        b.iter(|| encode_inv_vlat(black_box(sample), &orbit).unwrap())
    });
    g.finish();

    let models = CodingModels {
        basis: Some(&sab_basis),
        codebook: None,
        orbit: Some(&orbit),
    };
    c.bench_function("encode_set_inv_vlat", |b| {
        b.iter_batched(
            || train.clone(),
            |set| encode_set(Method::InvVlat, &set, &models, PostNorm::default()).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, decomposition, clustering, encoding);
criterion_main!(benches);
