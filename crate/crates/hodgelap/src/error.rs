use thiserror::Error;

/// Errors surfaced by complex construction, operator preparation and solves.
#[derive(Debug, Error)]
pub enum Error {
    #[error("face {face:?} of simplex {simplex:?} is missing from the complex")]
    MissingFace { simplex: Vec<u32>, face: Vec<u32> },

    #[error("duplicate simplex {0:?}")]
    DuplicateSimplex(Vec<u32>),

    #[error("vertex tuple {0:?} is not strictly sorted")]
    NonSortedTuple(Vec<u32>),

    #[error("K flags are not face-closed: simplex {simplex:?} is in K but face {face:?} is not")]
    KNotFaceClosed { simplex: Vec<u32>, face: Vec<u32> },

    #[error("dimension {0} out of range for this operation")]
    DimOutOfRange(usize),

    #[error("chain scope/dimension mismatch: expected {expected}, got {got}")]
    ScopeMismatch { expected: String, got: String },

    #[error("ambient volume structure unavailable: {0}")]
    NoAmbient(String),

    #[error("no spanning structure of the dual graph avoids K triangles: tetrahedron {0} cannot be opened")]
    SpanningTreeBlocked(usize),

    #[error("H2 verification failed while building T: beta_2(T) = {got}, beta_2(K) = {expected}")]
    H2Mismatch { got: usize, expected: usize },

    #[error("squeeze order infeasible at position {0}")]
    OrderInfeasible(usize),

    #[error("collapsing sequence cannot be reordered: invalid at position {0} after partition")]
    CannotReorder(usize),

    #[error("collapsing sequence is not normalized (tetrahedron-triangle pair at position {0} after another kind)")]
    SequenceNotNormalized(usize),

    #[error("squeeze order does not match the T construction ({0})")]
    OrderMismatch(String),

    #[error("witness input vectors are linearly dependent")]
    DependentInput,

    #[error("iterative solve diverged: {0}")]
    SolveDiverged(String),

    #[error("Gram-Schmidt input is numerically rank deficient at vector {index} (pivot {pivot:.3e})")]
    RankDeficient { index: usize, pivot: f64 },

    #[error("theory-mode accuracy parameter underflows f64: log10 = {log10:.1}")]
    EpsilonUnderflow { log10: f64 },

    #[error("input is not a cycle: ||boundary|| = {residual:.3e} exceeds {tol:.3e} * ||x||")]
    NotACycle { residual: f64, tol: f64 },

    #[error("pairing matrix M = P^T Gamma is singular (|det| = {0:.3e})")]
    SingularM(f64),

    #[error("eigenvalue iteration stalled after {0} iterations")]
    IterationStalled(usize),

    #[error("instance too large for the dense oracle: {size} simplices exceeds cap {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("matrix is not symmetric: max |A - A^T| = {0:.3e}")]
    NotSymmetric(f64),

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
