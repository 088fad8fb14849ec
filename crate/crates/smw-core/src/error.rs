use thiserror::Error;

/// Errors surfaced by the numerical kernels and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("SVD iteration failed to converge for a {rows}x{cols} matrix")]
    SvdNonConvergence { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is singular within rank tolerance (sigma_min = {sigma_min:.3e})")]
    Singular { sigma_min: f64 },

    #[error("capacitance matrix is singular within rank tolerance (sigma_min = {sigma_min:.3e})")]
    SingularCapacitance { sigma_min: f64 },

    #[error("all-zero matrix has no condition number")]
    ZeroMatrix,

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("invalid parameter: {context}")]
    InvalidParameter { context: String },

    #[error("construction post-condition failed: {context}")]
    ConstructionFailed { context: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn param(context: impl Into<String>) -> Self {
        Error::InvalidParameter {
            context: context.into(),
        }
    }
}
