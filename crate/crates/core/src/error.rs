use thiserror::Error;

use crate::hand_model::HandParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("point {index} is behind the camera (z = {z})")]
    BehindCamera { index: usize, z: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("infeasible solution: {0}")]
    Infeasible(String),

    #[error("degenerate root frame: {0}")]
    RootFrame(String),

    #[error("silhouette loss refused on a modal mask; only amodal masks are supervised")]
    ModalMask,

    #[error("fit diverged after {steps} accepted steps: {reason}")]
    FitDiverged {
        steps: usize,
        reason: String,
        last_valid: Box<HandParams>,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) | Error::Dimension { .. } | Error::ModalMask | Error::Format(_) | Error::Json(_) => {
                ErrorKind::Validation
            }
            Error::BehindCamera { .. }
            | Error::Degenerate(_)
            | Error::Infeasible(_)
            | Error::RootFrame(_)
            | Error::FitDiverged { .. } => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
        }
    }
}
