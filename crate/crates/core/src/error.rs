use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{param}` = {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        param: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid design space: {0}")]
    InvalidSpace(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate design: rows {0} and {1} share a coordinate")]
    DegenerateDesign(usize, usize),
    #[error("Sobol' sequence supports at most {max} dimensions, requested {requested}")]
    DimensionUnsupported { requested: usize, max: usize },
    #[error("response variance is zero; Sobol' indices are undefined")]
    ZeroVariance,
    #[error("empty tree node")]
    EmptyNode,
    #[error("no split available: {0}")]
    NoSplit(String),
    #[error("grid does not cover the case geometry: {0}")]
    GeometryMismatch(String),
    #[error("degenerate region `{0}`")]
    DegenerateRegion(String),
    #[error("interpolation source is empty")]
    EmptySource,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("eigensolver failed: {0}")]
    SolverFailure(String),
    #[error("correlation matrix is ill-conditioned at every start")]
    IllConditioned,
    #[error("simulated field has zero range at this time")]
    ZeroRange,
    #[error("no density interface found: {0}")]
    NoInterface(String),
    #[error("point ({0}, {1}) outside the domain")]
    OutOfDomain(f64, f64),
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error("model component missing: {0}")]
    ModelMissing(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
