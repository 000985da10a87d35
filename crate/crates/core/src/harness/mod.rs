//! Synthetic data, the feature file format, the end-to-end pipeline and the
//! self test.

pub mod format;
pub mod pipeline;
pub mod selftest;
pub mod synthetic;

pub use format::{read_global, read_local, write_global, write_local, RepresentationSpec};
pub use pipeline::{run_pipeline, ExperimentReport, MethodReport, PipelineConfig};
pub use selftest::{selftest, SelftestOptions, SelftestReport};
pub use synthetic::{
    generate_synthetic, DescriptorTemplate, SyntheticDataset, SyntheticDatasetSpec,
};
