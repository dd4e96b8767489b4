use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis function {0} is not square integrable on its declared support")]
    FamilyNotSquareIntegrable(usize),
    #[error("span elements belong to different basis families ({0} vs {1})")]
    FamilyMismatch(u64, u64),
    #[error("coefficient vector has length {got}, family has {expected} functions")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no convergence after {cycles} cycles (max violation {violation:e}); the slab intersection may be empty")]
    NoConvergence { cycles: usize, violation: f64 },
    #[error("the coefficient cap requires an orthonormal family")]
    CapRequiresOrthonormal,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("kernel bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("invalid beta {0}: outside the range allowed by the boundedness constant")]
    InvalidBeta(f64),
    #[error("dual problem is ill posed: {0}")]
    DualIllPosed(String),
    #[error("operation requires an orthogonal family")]
    OrthogonalityRequired,
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("rejection sampler acceptance rate {0:.4} is below 1%")]
    EnvelopeError(f64),
    #[error("sample too small: need at least {needed} observations, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
    #[error("interval method {method} is not applicable: {reason}")]
    MethodNotApplicable { method: String, reason: String },
    #[error("raw sample evaluations were not retained for basis function {0}")]
    MissingRawValues(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
