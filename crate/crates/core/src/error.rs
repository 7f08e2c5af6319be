use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("column {column} has no observed genotypes")]
    AllMissing { column: usize },

    #[error("phenotype is constant (zero residual sum of squares)")]
    ConstantPhenotype,

    #[error("binary phenotype needs both classes present")]
    SingleClass,

    #[error("no posterior draws accumulated")]
    NoDraws,

    #[error("no eligible (non-degenerate) covariates")]
    NoEligibleCovariates,

    #[error("simulated genetic signal is identically zero")]
    DegenerateSignal,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
