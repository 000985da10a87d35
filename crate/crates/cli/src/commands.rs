use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use itfc::classifier::{accuracy, predict, train_linear, LinearModel, Loss, TrainConfig};
use itfc::coding::{encode_set, CodingModels, Method, PostNorm};
use itfc::group::{validate_group, validate_irreps, GroupName, Irrep};
use itfc::harness::format::{
    read_global, read_local, write_global, write_local, LocalFile, RepresentationSpec,
};
use itfc::harness::{
    generate_synthetic, run_pipeline, selftest, DescriptorTemplate, PipelineConfig,
    SelftestOptions, SyntheticDatasetSpec,
};
use itfc::modeling::{
    compute_cluster_tensors, compute_codebook_tensors, invariant_kmeans, invariant_pca,
    standard_kmeans, standard_pca, Codebook, CodebookDocument, KMeansConfig, OrbitCodebook,
};
use itfc::representation::{
    compare_tensor_tables, multiplicities, printed_d4_tensor_table, printed_d6_tensor_table,
    regular_representation, symmetry_adapted_basis, tensor_decomposition_table,
    SymmetryAdaptedBasis, TableDisagreement,
};
use itfc::Error;

use crate::{
    Cli, Command, DecomposeArgs, EncodeArgs, EvaluateArgs, KmeansArgs, PcaArgs, PipelineArgs,
    SelftestArgs, SynthArgs, TrainArgs,
};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { source, .. } => exit_code(source),
        Error::Io(_) | Error::Format(_) | Error::Json(_) => 2,
        Error::Config(_) => 3,
        _ => 1,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Decompose(a) => decompose(cli, a),
        Command::Synth(a) => synth(cli, a),
        Command::Pca(a) => pca(cli, a),
        Command::Kmeans(a) => kmeans(cli, a),
        Command::Encode(a) => encode(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Pipeline(a) => pipeline(cli, a),
        Command::Selftest(a) => run_selftest(cli, a),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    fs::write(path, bytes)?;
    Ok(())
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(Failure::from)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "features".into(), |s| s.to_string_lossy().into_owned())
}

fn irreps_of(group: GroupName) -> Vec<Irrep> {
    group.build().1
}

fn basis_for(file: &LocalFile) -> Result<SymmetryAdaptedBasis, Failure> {
    Ok(symmetry_adapted_basis(
        file.features.rep(),
        &irreps_of(file.spec.group()),
    )?)
}

#[derive(Serialize)]
struct Decomposition {
    group: String,
    dim: usize,
    labels: Vec<String>,
    multiplicities: Vec<usize>,
    block_error: f64,
    tensor_table: Vec<Vec<Vec<usize>>>,
    reference_table_disagreements: Vec<TableDisagreement>,
}

fn decompose(cli: &Cli, a: &DecomposeArgs) -> Outcome {
    let name: GroupName = parse(&a.group)?;
    let (table, irreps) = name.build();
    let group_report = validate_group(&table);
    let irrep_report = validate_irreps(&table, &irreps);
    let group = Arc::new(table);
    let rep = if a.regular {
        regular_representation(group.clone())
    } else {
        let template = match &a.template {
            Some(t) => parse::<DescriptorTemplate>(t)?,
            None => DescriptorTemplate::default_for(name),
        };
        itfc::harness::synthetic::template_representation(group.clone(), name, &template)?
    };
    let rep = Arc::new(rep);
    let n = multiplicities(&rep, &irreps)?;
    let sab = symmetry_adapted_basis(&rep, &irreps)?;
    let tensors = tensor_decomposition_table(&group, &irreps)?;
    let disagreements = match name {
        GroupName::D4 => compare_tensor_tables(&tensors, &printed_d4_tensor_table()),
        GroupName::D6 => compare_tensor_tables(&tensors, &printed_d6_tensor_table()),
        _ => Vec::new(),
    };

    println!(
        "group {} (order {}), representation dim {}",
        name,
        group.order(),
        rep.dim()
    );
    for (irrep, k) in irreps.iter().zip(&n) {
        println!("  {:<12} dim {}  multiplicity {k}", irrep.label, irrep.dim);
    }
    println!("adapted basis block error {:.3e}", sab.max_block_error());
    println!("tensor product table:\n{tensors}");
    for d in &disagreements {
        println!(
            "  printed entry {}⊗{} disagrees: printed {:?}, computed {:?}",
            d.row_label, d.col_label, d.printed, d.computed
        );
    }
    write_json(&cli.out.join("basis.json"), &sab.to_document())?;
    let doc = Decomposition {
        group: name.to_string(),
        dim: rep.dim(),
        labels: irreps.iter().map(|i| i.label.clone()).collect(),
        multiplicities: n,
        block_error: sab.max_block_error(),
        tensor_table: tensors.entries.clone(),
        reference_table_disagreements: disagreements,
    };
    write_json(&cli.out.join("decomposition.json"), &doc)?;
    if !group_report.passed() || !irrep_report.passed() {
        return Err(Failure::validation(format!(
            "{group_report}\n{irrep_report}"
        )));
    }
    if doc.block_error > 1e-8 {
        return Err(Failure::validation(format!(
            "block error {:.3e} above 1e-8",
            doc.block_error
        )));
    }
    Ok(())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Outcome {
    let mut spec = match &cli.config {
        Some(p) => read_config::<SyntheticDatasetSpec>(p)?,
        None => {
            let g = a
                .group
                .as_deref()
                .map(parse::<GroupName>)
                .transpose()?
                .unwrap_or(GroupName::D4);
            SyntheticDatasetSpec::new(g)
        }
    };
    if let Some(g) = &a.group {
        spec.group = parse(g)?;
        if a.template.is_none() && cli.config.is_none() {
            spec.template = DescriptorTemplate::default_for(spec.group);
        }
    }
    if let Some(t) = &a.template {
        spec.template = parse(t)?;
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { spec.$f = v; })* };
    }
    set!(
        classes,
        samples_per_class,
        test_samples_per_class,
        descriptors_per_sample,
        class_signal,
        pose_bias,
        noise
    );
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let ds = generate_synthetic(&spec)?;
    let rep_spec = RepresentationSpec::Template {
        group: spec.group,
        template: spec.template,
    };
    write_local(
        &cli.out.join("train.itfc"),
        &ds.train.features,
        &rep_spec,
        Some(&ds.train.labels),
    )?;
    write_local(
        &cli.out.join("test.itfc"),
        &ds.test.features,
        &rep_spec,
        Some(&ds.test.labels),
    )?;
    write_json(&cli.out.join("dataset.json"), &spec)?;
    println!(
        "wrote {} train / {} test samples of {} descriptors (dim {}) to {}",
        ds.train.labels.len(),
        ds.test.labels.len(),
        spec.descriptors_per_sample,
        ds.rep.dim(),
        cli.out.display()
    );
    Ok(())
}

fn pca(cli: &Cli, a: &PcaArgs) -> Outcome {
    let input = read_local(&a.input)?;
    let map = if a.standard {
        standard_pca(&input.features, a.dim)?
    } else {
        let basis = basis_for(&input)?;
        invariant_pca(&input.features.to_adapted(&basis)?, &basis, a.dim)?
    };
    write_json(&cli.out.join("projection.json"), &map.to_document())?;
    let out_spec = RepresentationSpec::of_projection(input.spec.group(), &map);
    let mut files: Vec<PathBuf> = vec![a.input.clone()];
    files.extend(a.apply.iter().cloned());
    for path in &files {
        let f = if path == &a.input {
            input.clone()
        } else {
            read_local(path)?
        };
        let projected = map.transform(&f.features)?;
        let target = cli.out.join(format!("{}.proj.itfc", stem(path)));
        write_local(&target, &projected, &out_spec, f.labels.as_deref())?;
        println!("projected {} -> {}", path.display(), target.display());
    }
    println!(
        "{:?} PCA {} -> {} dims, explained variance {:.4} of {:.4}",
        map.kind,
        map.d_in(),
        map.d_out(),
        map.explained_variance,
        map.total_variance
    );
    Ok(())
}

fn kmeans(cli: &Cli, a: &KmeansArgs) -> Outcome {
    let input = read_local(&a.input)?;
    let cfg = KMeansConfig::new(a.clusters, a.max_iter, cli.seed.unwrap_or(0));
    let (doc, objective, iterations) = if a.plain {
        let cb =
            compute_codebook_tensors(&input.features, &standard_kmeans(&input.features, &cfg)?)?;
        (cb.to_document(), cb.objective, cb.iterations)
    } else {
        let cb =
            compute_cluster_tensors(&input.features, &invariant_kmeans(&input.features, &cfg)?)?;
        (cb.to_document(), cb.objective, cb.iterations)
    };
    write_json(&cli.out.join("codebook.json"), &doc)?;
    println!(
        "{} codebook, {} clusters, {iterations} iterations, objective {objective:.6}",
        doc.kind, doc.clusters
    );
    Ok(())
}

fn encode(cli: &Cli, a: &EncodeArgs) -> Outcome {
    let method: Method = parse(&a.method)?;
    let input = read_local(&a.input)?;
    let basis = match method {
        Method::InvBp | Method::InvIbp => Some(basis_for(&input)?),
        _ => None,
    };
    let mut plain: Option<Codebook> = None;
    let mut orbit: Option<OrbitCodebook> = None;
    if method.needs_codebook() {
        let path = a
            .codebook
            .as_ref()
            .ok_or_else(|| Failure::config(format!("{method} needs --codebook")))?;
        let doc: CodebookDocument =
            serde_json::from_slice(&fs::read(path)?).map_err(Error::from)?;
        if method.is_invariant() {
            orbit = Some(OrbitCodebook::from_document(
                doc,
                input.features.rep().clone(),
            )?);
        } else {
            plain = Some(Codebook::from_document(doc)?);
        }
    }
    let models = CodingModels {
        basis: basis.as_ref(),
        codebook: plain.as_ref(),
        orbit: orbit.as_ref(),
    };
    let post = PostNorm {
        signed_sqrt: a.signed_sqrt,
        l2: a.l2,
    };
    let features = encode_set(method, &input.features, &models, post)?;
    let target = cli
        .out
        .join(format!("{}.{}.itfc", stem(&a.input), method.as_str()));
    write_global(&target, &features, input.labels.as_deref())?;
    println!(
        "encoded {} samples with {method} ({} dims) -> {}",
        features.len(),
        features.first().map_or(0, |f| f.dim),
        target.display()
    );
    Ok(())
}

fn labelled(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<usize>), Failure> {
    let g = read_global(path)?;
    let labels = g
        .labels
        .ok_or_else(|| Failure::config(format!("{} carries no labels", path.display())))?;
    Ok((g.features.into_iter().map(|f| f.vector).collect(), labels))
}

fn train(cli: &Cli, a: &TrainArgs) -> Outcome {
    let (x, y) = labelled(&a.input)?;
    let mut cfg = match a.loss.as_str() {
        "hinge" => TrainConfig::hinge(a.lambda),
        "logistic" => TrainConfig::logistic(a.lambda),
        other => return Err(Failure::config(format!("unknown loss `{other}`"))),
    };
    if !(a.lambda.is_finite() && a.lambda > 0.0) {
        return Err(Failure::config("lambda must be positive"));
    }
    cfg.seed = cli.seed.unwrap_or(0);
    let model = train_linear(&x, &y, &cfg)?;
    let (pred, _) = predict(&model, &x)?;
    write_json(&cli.out.join("model.json"), &model)?;
    let loss = if cfg.loss == Loss::Hinge {
        "hinge"
    } else {
        "logistic"
    };
    println!(
        "trained {} {loss} classifiers on {} samples, train accuracy {:.4}",
        model.classes(),
        x.len(),
        accuracy(&pred, &y)
    );
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    samples: usize,
    accuracy: f64,
    predictions: Vec<usize>,
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Outcome {
    let model: LinearModel = serde_json::from_slice(&fs::read(&a.model)?).map_err(Error::from)?;
    let (x, y) = labelled(&a.input)?;
    let (pred, _) = predict(&model, &x)?;
    let acc = accuracy(&pred, &y);
    write_json(
        &cli.out.join("evaluation.json"),
        &Evaluation {
            samples: y.len(),
            accuracy: acc,
            predictions: pred,
        },
    )?;
    println!("accuracy {acc:.4} on {} samples", y.len());
    Ok(())
}

fn pipeline(cli: &Cli, _: &PipelineArgs) -> Outcome {
    let mut cfg = match &cli.config {
        Some(p) => read_config::<PipelineConfig>(p)?,
        None => PipelineConfig::pose_biased_demo(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.dataset.seed = s;
    }
    let report = run_pipeline(&cfg, Some(&cli.out))?;
    println!(
        "{:<9} {:>6} {:>8} {:>8} {:>8} {:>10}",
        "method", "dim", "train", "test", "aug", "inv. gap"
    );
    for m in &report.methods {
        println!(
            "{:<9} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>10.2e}",
            m.method.as_str(),
            m.dim,
            m.train_accuracy,
            m.test_accuracy,
            m.augmented_accuracy,
            m.invariance_gap
        );
    }
    let total: f64 = report.timings.values().sum();
    println!(
        "report written to {} ({total:.2}s)",
        cli.out.join("report.json").display()
    );
    Ok(())
}

fn run_selftest(cli: &Cli, a: &SelftestArgs) -> Outcome {
    let report = selftest(SelftestOptions {
        inject_fault: a.inject_fault,
    });
    println!("{report}");
    write_json(&cli.out.join("selftest.json"), &report)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::validation("self test failed"))
    }
}
