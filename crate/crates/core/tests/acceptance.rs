//! Acceptance criteria 1–10, one pass/fail line each.

use std::sync::Arc;
use std::time::{Duration, Instant};

use itfc::classifier::{
    invariance_residual, objective, one_vs_rest_targets, train_linear, TrainConfig,
};
use itfc::coding::{encode_set, output_dim, CodingModels, Method, PostNorm};
use itfc::group::{validate_group, validate_irreps, GroupName, GroupTable};
use itfc::harness::selftest::group_closed_data;
use itfc::harness::synthetic::template_representation;
use itfc::harness::{run_pipeline, DescriptorTemplate, PipelineConfig};
use itfc::modeling::{
    compute_cluster_tensors, compute_codebook_tensors, invariant_kmeans, standard_kmeans,
    BasisState, KMeansConfig, LocalFeatureSet,
};
use itfc::representation::{
    average_over_group, compare_tensor_tables, multiplicities, printed_d4_tensor_table,
    printed_d6_tensor_table, printed_identity_violations, regular_representation,
    symmetry_adapted_basis, tensor_decomposition_table, Representation,
};
use itfc::verify::{inv_bp_oracle, inv_vlad_oracle, inv_vlat_oracle, invariance_gap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn verdict(n: u32, title: &str, ok: bool, detail: String) {
    let mark = if ok { "PASS" } else { "FAIL" };
    println!("{mark} criterion {n:02} {title}: {detail}");
    assert!(ok, "criterion {n} failed: {detail}");
}

fn within(elapsed: Duration, budget: Duration) -> bool {
    elapsed < budget
}

fn random(rep: &Arc<Representation>, n: usize, rng: &mut ChaCha8Rng) -> LocalFeatureSet {
    let data = (0..n * rep.dim())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    LocalFeatureSet::new(rep.clone(), data, BasisState::Raw).unwrap()
}

fn template(name: GroupName, cells: usize, bins: usize) -> Arc<Representation> {
    let (g, _) = name.build();
    Arc::new(
        template_representation(Arc::new(g), name, &DescriptorTemplate::new(cells, bins)).unwrap(),
    )
}

#[test]
fn criterion_01_group_and_irrep_tables() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, order) in [(GroupName::D4, 8), (GroupName::D6, 12)] {
        let (g, irreps) = name.build();
        let group = validate_group(&g);
        let tables = validate_irreps(&g, &irreps);
        let dim_sum: usize = irreps.iter().map(|i| i.dim * i.dim).sum();
        let worst = tables
            .checks
            .iter()
            .map(|c| c.max_error)
            .fold(0.0, f64::max);
        ok &= group.passed()
            && tables.passed()
            && worst <= 1e-12
            && dim_sum == order
            && g.order() == order;
        details.push(format!("{name} Σd²={dim_sum} worst {worst:.1e}"));
    }
    let elapsed = start.elapsed();
    ok &= within(elapsed, Duration::from_secs(1));
    details.push(format!("{elapsed:.2?}"));
    verdict(1, "tables satisfy the axioms", ok, details.join(", "));
}

#[test]
fn criterion_02_multiplicities() {
    let (g, irreps) = GroupName::D4.build();
    let g = Arc::new(g);
    let regular = multiplicities(&regular_representation(g.clone()), &irreps).unwrap();
    let sift_rep =
        template_representation(g, GroupName::D4, &DescriptorTemplate::new(16, 8)).unwrap();
    let sift = multiplicities(&sift_rep, &irreps).unwrap();
    let covered: usize = sift.iter().zip(&irreps).map(|(n, i)| n * i.dim).sum();
    let ok = regular == [1, 1, 1, 1, 2] && sift == [18, 14, 14, 18, 32] && covered == 128;
    verdict(
        2,
        "multiplicities",
        ok,
        format!("regular {regular:?}, 128-dim {sift:?}, covered {covered}"),
    );
}

#[test]
fn criterion_03_tensor_tables() {
    let mut ok = true;
    let mut details = Vec::new();
    for (name, printed) in [
        (GroupName::D4, printed_d4_tensor_table()),
        (GroupName::D6, printed_d6_tensor_table()),
    ] {
        let (g, irreps) = name.build();
        let computed = tensor_decomposition_table(&Arc::new(g), &irreps).unwrap();
        let diffs = compare_tensor_tables(&computed, &printed);
        // every disagreement lies in the printed row labelled tau_{-1,1}
        ok &= diffs.iter().all(|d| d.row_label == "tau_{-1,1}");
        let consistent = irreps.len() * irreps.len() - diffs.len();
        details.push(format!(
            "{name}: {consistent} entries reproduced, {} flagged",
            diffs.len()
        ));
    }
    let (g, irreps) = GroupName::D4.build();
    let computed = tensor_decomposition_table(&Arc::new(g), &irreps).unwrap();
    let quad = computed.entry(4, 4).to_vec();
    ok &= quad == [1, 1, 1, 1, 0];
    let violations = printed_identity_violations(&printed_d4_tensor_table(), 0);
    ok &= violations == [(2, 0)];
    details.push(format!(
        "tau_2⊗tau_2 = {quad:?}, identity contradiction at {violations:?}"
    ));
    verdict(3, "tensor tables", ok, details.join("; "));
}

#[test]
fn criterion_04_symmetry_adapted_basis() {
    let start = Instant::now();
    let (g, irreps) = GroupName::D4.build();
    let g = Arc::new(g);
    let mut worst = 0.0f64;
    for rep in [
        Arc::new(regular_representation(g.clone())),
        Arc::new(
            template_representation(g, GroupName::D4, &DescriptorTemplate::new(16, 8)).unwrap(),
        ),
    ] {
        let sab = symmetry_adapted_basis(&rep, &irreps).unwrap();
        for t in 0..rep.group().order() {
            let lhs = sab.basis().transpose() * rep.matrix(t) * sab.basis();
            let err = (&lhs - sab.canonical_block_matrix(t)).abs().max();
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-8 && within(elapsed, Duration::from_secs(10));
    verdict(
        4,
        "symmetry-adapted basis",
        ok,
        format!("max entry error {worst:.2e} in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_05_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut dims_ok = true;
    let reps = [
        (template(GroupName::Z2, 4, 2), 3),
        (template(GroupName::Z2, 4, 4), 3),
        (
            Arc::new(regular_representation(Arc::new(GroupName::D4.build().0))),
            3,
        ),
        (template(GroupName::D4, 4, 4), 2),
    ];
    for (rep, max_c) in reps {
        let irreps = match rep.group().order() {
            2 => GroupName::Z2.build().1,
            _ => GroupName::D4.build().1,
        };
        let sab = symmetry_adapted_basis(&rep, &irreps).unwrap();
        let sample = random(&rep, 7, &mut rng);
        let bp = inv_bp_oracle(sample.view(), &sab).unwrap();
        worst = worst
            .max(bp.residual)
            .max(bp.lift_orthonormality)
            .max(bp.lift_invariance);
        dims_ok &= bp.invariant_dim == bp.output_dim;
        cases += 1;
        let train = random(&rep, 50, &mut rng);
        for c in 1..=max_c {
            let cb = invariant_kmeans(&train, &KMeansConfig::new(c, 30, c as u64)).unwrap();
            let cb = compute_cluster_tensors(&train, &cb).unwrap();
            for r in [
                inv_vlad_oracle(sample.view(), &cb).unwrap(),
                inv_vlat_oracle(sample.view(), &cb).unwrap(),
            ] {
                worst = worst
                    .max(r.residual)
                    .max(r.lift_orthonormality)
                    .max(r.lift_invariance);
                dims_ok &= r.invariant_dim == r.output_dim;
                cases += 1;
            }
        }
    }
    verdict(
        5,
        "oracle equivalence",
        worst <= 1e-10 && dims_ok,
        format!("{cases} instances, max residual {worst:.2e}, subspace dims match {dims_ok}"),
    );
}

#[test]
fn criterion_06_invariance_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut inv_worst = 0.0f64;
    let mut base_least = f64::INFINITY;
    for name in [GroupName::D4, GroupName::D6] {
        let (g, irreps) = name.build();
        let rep = Arc::new(regular_representation(Arc::new(g)));
        let sab = symmetry_adapted_basis(&rep, &irreps).unwrap();
        let train = random(&rep, 80, &mut rng);
        let orbit = compute_cluster_tensors(
            &train,
            &invariant_kmeans(&train, &KMeansConfig::new(2, 30, 1)).unwrap(),
        )
        .unwrap();
        let plain = compute_codebook_tensors(
            &train,
            &standard_kmeans(&train, &KMeansConfig::new(4, 30, 1)).unwrap(),
        )
        .unwrap();
        let models = CodingModels {
            basis: Some(&sab),
            codebook: Some(&plain),
            orbit: Some(&orbit),
        };
        for _ in 0..100 {
            let sample = random(&rep, 6, &mut rng);
            for method in Method::ALL {
                let gap = invariance_gap(&sample, |s| {
                    Ok(encode_set(method, s, &models, PostNorm::default())?.remove(0))
                })
                .unwrap();
                if method.is_invariant() {
                    inv_worst = inv_worst.max(gap);
                } else {
                    base_least = base_least.min(gap);
                }
            }
        }
    }
    verdict(
        6,
        "invariance suite",
        inv_worst <= 1e-10 && base_least >= 1e-2,
        format!("invariant max relative change {inv_worst:.2e}, baseline min {base_least:.2e}"),
    );
}

#[test]
fn criterion_07_dimension_claims() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    let mut tried = Vec::new();
    for rep in [
        template(GroupName::Z2, 4, 2),
        Arc::new(regular_representation(Arc::new(GroupName::D4.build().0))),
        template(GroupName::D4, 4, 4),
        Arc::new(regular_representation(Arc::new(GroupName::D6.build().0))),
    ] {
        let d = rep.dim();
        let train = random(&rep, 60, &mut rng);
        for c in 1..=3 {
            let cb = invariant_kmeans(&train, &KMeansConfig::new(c, 20, 0)).unwrap();
            let cb = compute_cluster_tensors(&train, &cb).unwrap();
            let models = CodingModels {
                orbit: Some(&cb),
                ..Default::default()
            };
            let vlad = encode_set(Method::InvVlad, &train, &models, PostNorm::default()).unwrap();
            let vlat = encode_set(Method::InvVlat, &train, &models, PostNorm::default()).unwrap();
            ok &= vlad[0].dim == c * d && vlat[0].dim == c * d * (d + 1) / 2;
            ok &= output_dim(Method::InvVlad, d, c, None) == c * d;
            tried.push(format!("({c},{d})"));
        }
    }
    verdict(
        7,
        "dimension claims",
        ok,
        format!("(C,d) in {}", tried.join(" ")),
    );
}

#[test]
fn criterion_08_invariant_classifier_certificate() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_res = 0.0f64;
    let mut worst_gain = f64::NEG_INFINITY;
    for rep in [template(GroupName::D4, 4, 4), template(GroupName::Z2, 4, 4)] {
        let (x, y) = group_closed_data(&rep, 3, 6, &mut rng);
        for cfg in [TrainConfig::hinge(1e-2), TrainConfig::logistic(1e-2)] {
            let model = train_linear(&x, &y, &cfg).unwrap();
            worst_res = invariance_residual(&model, &rep)
                .unwrap()
                .into_iter()
                .fold(worst_res, f64::max);
            for (c, w) in model.weights.iter().enumerate() {
                let t = one_vs_rest_targets(&y, c);
                let pw = average_over_group(&rep, w);
                let gain = objective(&pw, model.bias[c], &x, &t, cfg.lambda, cfg.loss)
                    - objective(w, model.bias[c], &x, &t, cfg.lambda, cfg.loss);
                worst_gain = worst_gain.max(gain);
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_res <= 1e-3 && worst_gain <= 1e-8 && within(elapsed, Duration::from_secs(30));
    verdict(
        8,
        "classifier certificate",
        ok,
        format!("max residual {worst_res:.2e}, objective(P1 w) − objective(w) ≤ {worst_gain:.2e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_09_invariant_kmeans() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut monotone = true;
    let mut closure = 0.0f64;
    let mut identical = true;
    for name in [GroupName::Z2, GroupName::D4, GroupName::D6] {
        let rep = Arc::new(regular_representation(Arc::new(name.build().0)));
        let data = random(&rep, 120, &mut rng);
        for seed in 0..3 {
            let cb = invariant_kmeans(&data, &KMeansConfig::new(3, 100, seed)).unwrap();
            monotone &= cb.objective_history.windows(2).all(|w| w[1] <= w[0]);
            let orbit = cb.orbit_centroids();
            for h in 0..rep.group().order() {
                for mu in &orbit {
                    let moved = rep.apply(h, mu);
                    let nearest = orbit
                        .iter()
                        .map(|o| {
                            o.iter()
                                .zip(&moved)
                                .map(|(a, b)| (a - b).abs())
                                .fold(0.0, f64::max)
                        })
                        .fold(f64::INFINITY, f64::min);
                    closure = closure.max(nearest);
                }
            }
        }
        let trivial = Arc::new(Representation::identity(
            Arc::new(GroupTable::trivial()),
            rep.dim(),
        ));
        let plain = data.clone().with_rep(trivial).unwrap();
        for seed in 0..3 {
            let cfg = KMeansConfig::new(5, 100, seed);
            let a = invariant_kmeans(&plain, &cfg).unwrap();
            let b = standard_kmeans(&plain, &cfg).unwrap();
            identical &= a.base_centroids == b.centroids
                && a.objective_history == b.objective_history
                && a.objective.to_bits() == b.objective.to_bits();
        }
    }
    verdict(
        9,
        "invariant k-means",
        monotone && closure <= 1e-10 && identical,
        format!("monotone {monotone}, orbit closure error {closure:.2e}, trivial group bit-identical {identical}"),
    );
}

#[test]
fn criterion_10_end_to_end() {
    let start = Instant::now();
    let cfg = PipelineConfig::pose_biased_demo();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let report = pool.install(|| run_pipeline(&cfg, None)).unwrap();
    let elapsed = start.elapsed();
    let mut ok = within(elapsed, Duration::from_secs(300));
    let mut parts = Vec::new();
    for m in &report.methods {
        let pass = if m.invariant {
            m.augmented_accuracy == m.test_accuracy
        } else {
            m.test_accuracy - m.augmented_accuracy >= 0.10
        };
        ok &= pass;
        parts.push(format!(
            "{} {:.1}→{:.1}",
            m.method,
            100.0 * m.test_accuracy,
            100.0 * m.augmented_accuracy
        ));
    }
    ok &= report.methods.len() == Method::ALL.len();
    parts.push(format!("{elapsed:.2?} on one thread"));
    verdict(10, "end-to-end experiment", ok, parts.join(", "));
}
