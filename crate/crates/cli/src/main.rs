//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or file-format error,
//! 3 configuration or usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "itfc",
    version,
    about = "Group-invariant tensor feature coding"
)]
pub struct Cli {
    /// Seed overriding the one in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration (dataset spec for `synth`, pipeline config for `pipeline`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a representation: multiplicities, tensor table, adapted basis.
    Decompose(DecomposeArgs),
    /// Generate a synthetic train/test split.
    Synth(SynthArgs),
    /// Fit invariant or standard PCA and project feature files.
    Pca(PcaArgs),
    /// Fit an orbit or plain codebook.
    Kmeans(KmeansArgs),
    /// Pool local descriptors into global features.
    Encode(EncodeArgs),
    /// Train a one-vs-rest linear classifier.
    Train(TrainArgs),
    /// Score a trained classifier on global features.
    Evaluate(EvaluateArgs),
    /// Run the end-to-end experiment; without `--config` the built-in
    /// pose-biased configuration is used.
    Pipeline(PipelineArgs),
    /// Run the built-in property suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long, default_value = "d4")]
    pub group: String,
    /// Descriptor template CELLSxBINS; defaults per group.
    #[arg(long, conflicts_with = "regular")]
    pub template: Option<String>,
    /// Use the regular representation instead of a template.
    #[arg(long)]
    pub regular: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub samples_per_class: Option<usize>,
    #[arg(long)]
    pub test_samples_per_class: Option<usize>,
    #[arg(long)]
    pub descriptors_per_sample: Option<usize>,
    #[arg(long)]
    pub class_signal: Option<f64>,
    #[arg(long)]
    pub pose_bias: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    /// Local features used for fitting.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub dim: usize,
    /// Fit ordinary centred PCA instead of invariant PCA.
    #[arg(long)]
    pub standard: bool,
    /// Further local feature files to project with the fitted map.
    #[arg(long, num_args = 1..)]
    pub apply: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `C` orbits, or `K` centroids with `--plain`.
    #[arg(long)]
    pub clusters: usize,
    #[arg(long)]
    pub plain: bool,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub method: String,
    /// Codebook JSON for the VLAD/VLAT methods.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    #[arg(long)]
    pub signed_sqrt: bool,
    #[arg(long)]
    pub l2: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "hinge")]
    pub loss: String,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Corrupt one D4 Cayley entry to check that validation fails.
    #[arg(long)]
    pub inject_fault: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(3);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
