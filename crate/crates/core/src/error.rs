use thiserror::Error;

pub type Result<T> = std::result::Result<T, HspError>;

#[derive(Debug, Error)]
pub enum HspError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("length mismatch for `{name}`: expected {expected}, got {actual}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("gaussian mode clipped by the grid: {mass:.3e} of the probability lies outside")]
    ModeClipped { mass: f64 },

    #[error("reference photon phase is not flat (spread {spread:.3e} rad on supported bins)")]
    NonFlatReference { spread: f64 },

    #[error("negative probability {value:.3e} at ({i}, {j})")]
    NegativeProbability { i: usize, j: usize, value: f64 },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("no curvature: quadratic coefficient {0:.3e} is below the numerical floor")]
    NoCurvature(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Data,
    Numerical,
}

impl HspError {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        HspError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            HspError::InvalidGrid(_)
            | HspError::InvalidArgument { .. }
            | HspError::ModeClipped { .. }
            | HspError::NonFlatReference { .. } => ErrorKind::Input,
            HspError::GridMismatch(_)
            | HspError::LengthMismatch { .. }
            | HspError::EmptyData(_)
            | HspError::Format(_)
            | HspError::Io(_) => ErrorKind::Data,
            HspError::NegativeProbability { .. }
            | HspError::NoCurvature(_)
            | HspError::Numerical(_) => ErrorKind::Numerical,
        }
    }
}
