//! Group-invariant tensor feature coding.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`] finite groups given by Cayley tables, with hand-supplied real
//!   irreducible representations (Z2, D4, D6) and axiom validation.
//! * [`representation`] orthogonal representations, characters, multiplicities,
//!   isotypic projectors and symmetry-adapted bases.
//! * [`modeling`] invariant PCA and invariant (orbit) k-means together with the
//!   ordinary baselines.
//! * [`coding`] BP / iBP / VLAD / VLAT pooling and their invariant counterparts.
//! * [`classifier`] l2-regularised linear classification and the invariance
//!   certificate for the learned weights.
//! * [`harness`] synthetic data with a known group action, the binary feature
//!   format, the end-to-end pipeline and the self test.

pub mod classifier;
pub mod coding;
pub mod error;
pub mod group;
pub mod harness;
pub mod linalg;
pub mod modeling;
pub mod representation;
pub mod verify;

pub use classifier::{LinearModel, Loss, TrainConfig};
pub use coding::{GlobalFeature, LayoutSegment, Method, PostNorm};
pub use error::{Error, Result};
pub use group::{GroupName, GroupTable, Irrep, ValidationReport};
pub use modeling::{
    AssignmentResult, BasisState, Codebook, FeatureView, KMeansConfig, LocalFeatureSet,
    OrbitCodebook, ProjectionMap,
};
pub use representation::{Block, Representation, SymmetryAdaptedBasis};

/// Tolerance used for exact-algebra checks on hand-supplied irreducible tables.
pub const TABLE_TOL: f64 = 1e-12;

/// Tolerance for homomorphism / orthogonality checks on general representations.
pub const REP_TOL: f64 = 1e-10;

/// Largest dimension for which a representation is materialised as dense matrices.
pub const MAX_MATERIALIZED_DIM: usize = 4096;
