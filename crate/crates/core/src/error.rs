use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrsaError {
    #[error("degree distribution is empty")]
    EmptyDistribution,
    #[error("negative coefficient {coeff} for degree {degree}")]
    NegativeCoefficient { degree: usize, coeff: f64 },
    #[error("coefficients sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("invalid degree {0}: degrees must be >= 1")]
    InvalidDegree(usize),
    #[error("cannot parse distribution spec {spec:?}: {reason}")]
    ParseDistribution { spec: String, reason: String },
    #[error("sampled degree {degree} exceeds the number of slots {slots}")]
    DegreeExceedsSlots { degree: usize, slots: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("enumeration needs {assignments} assignments, limit is {limit}")]
    TooLargeToEnumerate { assignments: f64, limit: u64 },
    #[error("threshold predicate does not change sign on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("population {n} must exceed slot count {m}")]
    InvalidPopulation { n: u64, m: usize },
    #[error("unknown distribution {0:?}")]
    UnknownDistribution(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, IrsaError>;
