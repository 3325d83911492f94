use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index ({n}, {m}) outside window {nn} x {nm}")]
    Index { n: i64, m: i64, nn: usize, nm: usize },

    #[error("singular corner at (n={n}, m={m}): |denominator| = {denominator:e}")]
    SingularCorner { n: usize, m: usize, denominator: f64 },

    #[error("non-finite value produced at (n={n}, m={m})")]
    NonFinite { n: usize, m: usize },

    #[error("singular potential at n={n}: |denominator| = {denominator:e}")]
    SingularPotential { n: usize, denominator: f64 },

    #[error("singular flow at (n={n}, m={m}), stage {stage}: |denominator| = {denominator:e}")]
    SingularFlow {
        n: usize,
        m: usize,
        stage: usize,
        denominator: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
