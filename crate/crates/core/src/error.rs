use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(
        "unsupported cell type `{0}` (expected one of: simple_cubic, body_centered_cubic, octet)"
    )]
    UnsupportedCellType(String),
    #[error("invalid unit cell: {0}")]
    InvalidCell(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate geometry: strut {strut} has zero length")]
    ZeroLengthStrut { strut: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuumError {
    #[error("singular element: rest volume determinant {det:e}")]
    SingularElement { det: f64 },
    #[error("inverted element: det F = {det:e}")]
    InvertedElement { det: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("Newton solver did not converge at step {step} after {iterations} iterations (residual {residual:e} N)")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("singular system at step {step}: factorization failed at every regularization level")]
    SingularSystem { step: usize },
    #[error("element {element} inverted at step {step}")]
    InvertedElement { step: usize, element: usize },
    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
}

impl NnError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        NnError::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("trajectory has {found} states, need at least {needed}")]
    TooFewStates { needed: usize, found: usize },
    #[error("mesh/graph mismatch: {0}")]
    Mismatch(String),
    #[error("dataset is empty")]
    Empty,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    Version(u64),
    #[error("checksum mismatch for {0}")]
    Checksum(String),
    #[error("malformed record: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training phase {0} requires a displacement-trained model")]
    PhaseOrder(&'static str),
    #[error("non-finite prediction at rollout step {step}")]
    NonFinite { step: usize },
    #[error("every slice plane is empty")]
    AllSlicesEmpty,
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid configuration at `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Crate-wide error used by the pipeline entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
