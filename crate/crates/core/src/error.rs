use thiserror::Error;

/// Errors raised across the library.
///
/// Each variant maps onto one CLI exit class (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain: {0}")]
    Domain(String),

    #[error("unsupported order: {order} exceeds the maximum of {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("contract: {0}")]
    Contract(String),

    #[error("singular: jacobian determinant {det:e} below threshold")]
    Singular { det: f64 },

    #[error("degenerate space: {0}")]
    DegenerateSpace(String),

    #[error("fold: jacobian changes sign in patch {patch} (min det {min_det:e})")]
    Fold { patch: usize, min_det: f64 },

    #[error("overlap: interiors of patches {a} and {b} intersect")]
    Overlap { a: usize, b: usize },

    #[error("inversion failed: no convergence, last residual {residual:e}")]
    InversionFailed { residual: f64 },

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("linear algebra: {0}")]
    LinearAlgebra(String),

    #[error("format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used as the CLI error prefix.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::UnsupportedOrder { .. } => "unsupported-order",
            Error::Contract(_) => "contract",
            Error::Singular { .. } => "singular",
            Error::DegenerateSpace(_) => "degenerate-space",
            Error::Fold { .. } => "fold",
            Error::Overlap { .. } => "overlap",
            Error::InversionFailed { .. } => "inversion-failed",
            Error::Sampling(_) => "sampling",
            Error::LinearAlgebra(_) => "linear-algebra",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 for usage/input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_) | Error::Io(_) | Error::Contract(_) | Error::Domain(_) => 2,
            Error::UnsupportedOrder { .. } => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
