use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("monotonicity violation: {0}")]
    MonotonicityViolation(String),

    #[error("operation not supported for {0} representation")]
    UnsupportedRepresentation(&'static str),

    #[error("insufficient replicates: {usable} usable, {required} required")]
    InsufficientReplicates { usable: usize, required: usize },

    #[error("inner optimization failed at theta = {theta}: {reason}")]
    OptimizationFailure { theta: f64, reason: String },

    #[error("window too narrow: exp(l*) is {lower:e} at the lower edge and {upper:e} at the upper edge")]
    WindowTooNarrow { lower: f64, upper: f64 },

    #[error("confidence distribution has no finite mean/dispersion: {0}")]
    NonIntegrable(String),

    #[error("invalid partition: {0}")]
    PartitionInvalid(String),

    #[error("generator pairing mismatch: {0}")]
    Pairing(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("map produced non-finite values: {0}")]
    MapDomain(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("invalid input data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
