use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("representations are defined over different groups ({0} vs {1})")]
    GroupMismatch(String, String),

    #[error("action of element {element} is not a permutation: {reason}")]
    InvalidPermutation { element: usize, reason: String },

    #[error("action violates the group law for the pair ({0}, {1})")]
    GroupLawViolation(usize, usize),

    #[error("matrix of element {element} fails {property} (error {error:.3e})")]
    InvalidMatrix {
        element: usize,
        property: &'static str,
        error: f64,
    },

    #[error("multiplicity of {label} is not an integer ({value})")]
    NonIntegerMultiplicity { label: String, value: f64 },

    #[error("copy-seed space of {label} has rank {found}, expected {expected}")]
    RankMismatch {
        label: String,
        expected: usize,
        found: usize,
    },

    #[error("dimension {dim} exceeds the materialisation limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("covariance is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("codebook carries no second-order tensors")]
    MissingTensors,

    #[error("features are in {found} coordinates, expected {expected}")]
    WrongBasis {
        expected: &'static str,
        found: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wrap an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost stage name, if the error came out of the pipeline.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
