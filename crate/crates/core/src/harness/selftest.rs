//! Built-in property suite: tables, decompositions, projectors, oracles,
//! encoder invariance, the classifier certificate and orbit k-means.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::classifier::{
    invariance_residual, objective, one_vs_rest_targets, train_linear, TrainConfig,
};
use crate::coding::{encode_set, CodingModels, Method, PostNorm};
use crate::error::Result;
use crate::group::{validate_group, validate_irreps, GroupName, GroupTable, Irrep};
use crate::harness::synthetic::{template_representation, DescriptorTemplate};
use crate::linalg::max_abs_diff;
use crate::modeling::{
    compute_cluster_tensors, compute_codebook_tensors, invariant_kmeans, standard_kmeans,
    BasisState, KMeansConfig, LocalFeatureSet,
};
use crate::representation::{
    average_over_group, compare_tensor_tables, isotypic_projector, multiplicities,
    printed_d4_tensor_table, printed_d6_tensor_table, printed_identity_violations,
    regular_representation, symmetry_adapted_basis, tensor_decomposition_table, Representation,
};
use crate::verify::{inv_bp_oracle, inv_vlad_oracle, inv_vlat_oracle, invariance_gap};

#[derive(Clone, Debug, Serialize)]
pub struct SelftestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<SelftestCheck>,
    pub passed: bool,
    pub fault_injected: bool,
    pub runtime_seconds: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SelftestOptions {
    /// Corrupt one D4 Cayley entry before validating the tables.
    pub inject_fault: bool,
}

fn groups() -> Vec<(GroupName, Arc<GroupTable>, Vec<Irrep>)> {
    [GroupName::Z2, GroupName::D4, GroupName::D6]
        .into_iter()
        .map(|n| {
            let (g, i) = n.build();
            (n, Arc::new(g), i)
        })
        .collect()
}

fn random_set(
    rep: &Arc<Representation>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LocalFeatureSet> {
    let data = (0..n * rep.dim())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    LocalFeatureSet::new(rep.clone(), data, BasisState::Raw)
}

type Outcome = Result<(bool, String)>;

fn tables(opts: SelftestOptions) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, g, irreps) in groups() {
        let mut table = (*g).clone();
        if opts.inject_fault && name == GroupName::D4 {
            table.cayley[1][1] = (table.cayley[1][1] + 1) % table.order();
        }
        let group_report = validate_group(&table);
        let irrep_report = validate_irreps(&table, &irreps);
        let pass = group_report.passed() && irrep_report.passed();
        ok &= pass;
        if pass {
            lines.push(format!("{name}: ok"));
        } else {
            let failed: Vec<String> = group_report
                .failures()
                .chain(irrep_report.failures())
                .map(|c| c.name.clone())
                .collect();
            lines.push(format!("{name}: failed {}", failed.join(", ")));
        }
    }
    Ok((ok, lines.join("; ")))
}

fn decompositions() -> Outcome {
    let (g, irreps) = GroupName::D4.build();
    let g = Arc::new(g);
    let regular = multiplicities(&regular_representation(g.clone()), &irreps)?;
    let sift_rep = template_representation(g, GroupName::D4, &DescriptorTemplate::new(16, 8))?;
    let sift = multiplicities(&sift_rep, &irreps)?;
    let ok = regular == [1, 1, 1, 1, 2] && sift == [18, 14, 14, 18, 32];
    Ok((ok, format!("regular {regular:?}, 16x8 template {sift:?}")))
}

fn tensor_tables() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, printed) in [
        (GroupName::D4, printed_d4_tensor_table()),
        (GroupName::D6, printed_d6_tensor_table()),
    ] {
        let (g, irreps) = name.build();
        let computed = tensor_decomposition_table(&Arc::new(g), &irreps)?;
        let diffs = compare_tensor_tables(&computed, &printed);
        let flagged_rows: Vec<usize> = {
            let mut r: Vec<usize> = diffs.iter().map(|d| d.row).collect();
            r.dedup();
            r
        };
        ok &= computed.is_symmetric() && flagged_rows.iter().all(|&r| r == 2);
        parts.push(format!(
            "{name}: {} printed entries disagree, rows {flagged_rows:?}",
            diffs.len()
        ));
        if name == GroupName::D4 {
            let violations = printed_identity_violations(&printed, 0);
            ok &= violations == [(2, 0)];
            parts.push(format!("d4 identity contradictions {violations:?}"));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn bases() -> Outcome {
    let (g, irreps) = GroupName::D4.build();
    let g = Arc::new(g);
    let regular = Arc::new(regular_representation(g.clone()));
    let sift = Arc::new(template_representation(
        g,
        GroupName::D4,
        &DescriptorTemplate::new(16, 8),
    )?);
    let e1 = symmetry_adapted_basis(&regular, &irreps)?.max_block_error();
    let e2 = symmetry_adapted_basis(&sift, &irreps)?.max_block_error();
    Ok((
        e1 <= 1e-8 && e2 <= 1e-8,
        format!("block error regular {e1:.2e}, 128-dim {e2:.2e}"),
    ))
}

fn projectors() -> Outcome {
    let mut worst = 0.0f64;
    for (_, g, irreps) in groups() {
        let rep = regular_representation(g);
        let d = rep.dim();
        let mut sum = DMatrix::zeros(d, d);
        for irrep in &irreps {
            let p = isotypic_projector(&rep, irrep)?;
            worst = worst.max(max_abs_diff(&(&p * &p), &p));
            worst = worst.max(max_abs_diff(&p.transpose(), &p));
            sum += p;
        }
        worst = worst.max(max_abs_diff(&sum, &DMatrix::identity(d, d)));
    }
    Ok((
        worst <= 1e-10,
        format!("idempotence / symmetry / completeness error {worst:.2e}"),
    ))
}

fn oracles(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0f64;
    let mut dims_ok = true;
    for name in [GroupName::Z2, GroupName::D4] {
        let (g, irreps) = name.build();
        let g = Arc::new(g);
        let rep = Arc::new(match name {
            GroupName::Z2 => template_representation(g, name, &DescriptorTemplate::new(4, 2))?,
            _ => regular_representation(g),
        });
        let sab = symmetry_adapted_basis(&rep, &irreps)?;
        let sample = random_set(&rep, 10, rng)?;
        let train = random_set(&rep, 40, rng)?;
        let cb = invariant_kmeans(&train, &KMeansConfig::new(2, 20, 1))?;
        let cb = compute_cluster_tensors(&train, &cb)?;
        for r in [
            inv_bp_oracle(sample.view(), &sab)?,
            inv_vlad_oracle(sample.view(), &cb)?,
            inv_vlat_oracle(sample.view(), &cb)?,
        ] {
            worst = worst
                .max(r.residual)
                .max(r.lift_orthonormality)
                .max(r.lift_invariance);
            dims_ok &= r.invariant_dim == r.output_dim;
        }
    }
    Ok((
        worst <= 1e-10 && dims_ok,
        format!("max residual {worst:.2e}, dimensions match: {dims_ok}"),
    ))
}

fn invariance(rng: &mut ChaCha8Rng) -> Outcome {
    let mut inv_worst = 0.0f64;
    let mut base_least = f64::INFINITY;
    for name in [GroupName::D4, GroupName::D6] {
        let (g, irreps) = name.build();
        let rep = Arc::new(regular_representation(Arc::new(g)));
        let sab = symmetry_adapted_basis(&rep, &irreps)?;
        let train = random_set(&rep, 60, rng)?;
        let orbit = compute_cluster_tensors(
            &train,
            &invariant_kmeans(&train, &KMeansConfig::new(2, 20, 2))?,
        )?;
        let plain = compute_codebook_tensors(
            &train,
            &standard_kmeans(&train, &KMeansConfig::new(4, 20, 2))?,
        )?;
        let models = CodingModels {
            basis: Some(&sab),
            codebook: Some(&plain),
            orbit: Some(&orbit),
        };
        for _ in 0..10 {
            let sample = random_set(&rep, 8, rng)?;
            for method in Method::ALL {
                let gap = invariance_gap(&sample, |s| {
                    Ok(encode_set(method, s, &models, PostNorm::default())?.remove(0))
                })?;
                if method.is_invariant() {
                    inv_worst = inv_worst.max(gap);
                } else {
                    base_least = base_least.min(gap);
                }
            }
        }
    }
    Ok((
        inv_worst <= 1e-10 && base_least >= 1e-2,
        format!("invariant max change {inv_worst:.2e}, baseline min change {base_least:.2e}"),
    ))
}

fn certificate(rng: &mut ChaCha8Rng) -> Outcome {
    let (g, _) = GroupName::D4.build();
    let rep = template_representation(Arc::new(g), GroupName::D4, &DescriptorTemplate::new(4, 4))?;
    let (x, y) = group_closed_data(&rep, 3, 4, rng);
    let mut worst_res = 0.0f64;
    let mut worst_gain = f64::NEG_INFINITY;
    for cfg in [TrainConfig::hinge(1e-2), TrainConfig::logistic(1e-2)] {
        let model = train_linear(&x, &y, &cfg)?;
        worst_res = invariance_residual(&model, &rep)?
            .into_iter()
            .fold(worst_res, f64::max);
        for (c, w) in model.weights.iter().enumerate() {
            let t = one_vs_rest_targets(&y, c);
            let pw = average_over_group(&rep, w);
            let before = objective(w, model.bias[c], &x, &t, cfg.lambda, cfg.loss);
            let after = objective(&pw, model.bias[c], &x, &t, cfg.lambda, cfg.loss);
            worst_gain = worst_gain.max(after - before);
        }
    }
    Ok((
        worst_res <= 1e-3 && worst_gain <= 1e-8,
        format!("max residual {worst_res:.2e}, max objective increase {worst_gain:.2e}"),
    ))
}

fn kmeans(rng: &mut ChaCha8Rng) -> Outcome {
    let (g, _) = GroupName::D4.build();
    let rep = Arc::new(regular_representation(Arc::new(g)));
    let data = random_set(&rep, 80, rng)?;
    let cb = invariant_kmeans(&data, &KMeansConfig::new(3, 50, 5))?;
    let monotone = cb
        .objective_history
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
    let orbit = cb.orbit_centroids();
    let mut closure = 0.0f64;
    for h in 0..rep.group().order() {
        for c in &orbit {
            let moved = rep.apply(h, c);
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
    let plain_rep = Arc::new(Representation::identity(
        Arc::new(GroupTable::trivial()),
        rep.dim(),
    ));
    let plain = data.clone().with_rep(plain_rep)?;
    let cfg = KMeansConfig::new(4, 50, 9);
    let a = invariant_kmeans(&plain, &cfg)?;
    let b = standard_kmeans(&plain, &cfg)?;
    let identical = a.base_centroids == b.centroids && a.objective_history == b.objective_history;
    Ok((
        monotone && closure <= 1e-10 && identical,
        format!("monotone {monotone}, closure error {closure:.2e}, trivial group matches plain {identical}"),
    ))
}

/// Noisy samples around invariant class means, closed under the group:
/// every sample appears with all of its `π(g)` images.
pub fn group_closed_data(
    rep: &Representation,
    classes: usize,
    per_class: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = rep.dim();
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let m = average_over_group(rep, &z);
            let n = crate::linalg::norm(&m);
            m.into_iter().map(|v| 2.0 * v / n).collect()
        })
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..per_class {
        for (c, m) in means.iter().enumerate() {
            let base: Vec<f64> = m
                .iter()
                .map(|v| v + 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            for h in 0..rep.group().order() {
                x.push(rep.apply(h, &base));
                y.push(c);
            }
        }
    }
    (x, y)
}

/// Run every check; a check that errors counts as a failure.
pub fn selftest(opts: SelftestOptions) -> SelftestReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x17fc);
    let mut checks = Vec::new();
    let mut run = |name: &str, f: &mut dyn FnMut(&mut ChaCha8Rng) -> Outcome| {
        let t = Instant::now();
        let (passed, detail) = f(&mut rng).unwrap_or_else(|e| (false, format!("error: {e}")));
        checks.push(SelftestCheck {
            name: name.to_string(),
            passed,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    };
    run("group and irrep tables", &mut |_| tables(opts));
    run("multiplicities", &mut |_| decompositions());
    run("tensor product tables", &mut |_| tensor_tables());
    run("symmetry-adapted bases", &mut |_| bases());
    run("isotypic projectors", &mut |_| projectors());
    run("encoder oracles", &mut oracles);
    run("encoder invariance", &mut invariance);
    run("classifier certificate", &mut certificate);
    run("invariant k-means", &mut kmeans);
    let passed = checks.iter().all(|c| c.passed);
    SelftestReport {
        checks,
        passed,
        fault_injected: opts.inject_fault,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
}

impl std::fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark} {:<26} {:>8.3}s  {}", c.name, c.seconds, c.detail)?;
        }
        let verdict = if self.passed {
            "all checks passed"
        } else {
            "FAILURES"
        };
        write!(f, "{verdict} in {:.2}s", self.runtime_seconds)
    }
}
