use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Error {
    #[error("substitution image of the seed does not begin with the seed")]
    NonPrefixRule,

    #[error("invalid substitution rule: {0}")]
    InvalidRule(String),

    #[error("window of {requested} sites exceeds the maximum of {max}")]
    WindowTooLarge { requested: u64, max: u64 },

    #[error("no known special energy for this potential structure")]
    NoKnownSpecialEnergy,

    #[error("site {site} is outside the sampled window [{start}, {end}]")]
    OutOfWindow { site: i64, start: i64, end: i64 },

    #[error("root finding found {found} of {expected} roots: {detail}")]
    RootFindingFailure {
        found: usize,
        expected: usize,
        detail: String,
    },

    #[error("rotation number is rational at working precision")]
    RationalInput,

    #[error("coupling constant must be nonzero")]
    ZeroCoupling,

    #[error("finite-size guard violated: {0}")]
    FiniteSizeViolation(String),

    #[error("reference solution has vanishing Wronskian ({0:e})")]
    DegenerateReference(f64),

    #[error("window does not match the requested geometry: {0}")]
    WindowMismatch(String),

    #[error("unknown bound identifier `{0}`")]
    UnknownBound(String),

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
