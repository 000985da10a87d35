//! Data-dependent models that respect the group action: invariant PCA,
//! orbit k-means, and their ordinary counterparts.

mod features;
mod kmeans;
mod pca;

pub use features::{BasisState, FeatureView, LocalFeatureSet};
pub use kmeans::{
    compute_cluster_tensors, compute_codebook_tensors, invariant_kmeans, standard_kmeans,
    AssignmentResult, Codebook, CodebookDocument, KMeansConfig, OrbitCodebook,
};
pub use pca::{
    invariant_pca, projected_variance, standard_pca, ProjectionDocument, ProjectionKind,
    ProjectionMap, RetainedBlock,
};
