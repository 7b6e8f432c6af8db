use thiserror::Error;

/// Which covariance of a component failed to factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Row,
    Column,
}

impl std::fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CovarianceKind::Row => f.write_str("row covariance U"),
            CovarianceKind::Column => f.write_str("column covariance V"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(CovarianceKind),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("component {component} has effective size {size:.3}, need at least {required}")]
    DegenerateComponent {
        component: usize,
        size: f64,
        required: usize,
    },

    #[error("singular covariance estimate in component {component}: {kind}")]
    SingularCovariance {
        component: usize,
        kind: CovarianceKind,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("all {} starts failed: {}", .diagnostics.len(), .diagnostics.join("; "))]
    FitFailure { diagnostics: Vec<String> },

    #[error("{failed} of {total} subset refits failed")]
    SubsetFailure { failed: usize, total: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown observation id {0:?}")]
    UnknownId(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numerics of a fit rather than by the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::DegenerateComponent { .. }
                | Error::SingularCovariance { .. }
                | Error::Numeric(_)
                | Error::FitFailure { .. }
                | Error::SubsetFailure { .. }
                | Error::DegenerateData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
