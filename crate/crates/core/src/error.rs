use thiserror::Error;

/// Errors raised by the box, divergence, loss and assignment routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
    #[error("box angle {theta} outside the {def} range")]
    AngleOutOfRange { theta: f64, def: &'static str },
    #[error("covariance is not symmetric positive definite: {0}")]
    NonSpd(String),
    #[error("closed form requires horizontal boxes (angle {0} is not a multiple of pi)")]
    NotHorizontal(f64),
    #[error("offset encodings use different angle modes")]
    ModeMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fit diverged at step {step}: loss is {loss}")]
    DivergedFit { step: usize, loss: f64 },
    #[error("anchor grid is empty")]
    EmptyGrid,
    #[error("heading vector ({dx}, {dy}) has zero magnitude")]
    ZeroHeading { dx: f64, dy: f64 },
}

impl Error {
    /// True for numeric failures, as opposed to malformed input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateBox(_)
                | Error::NonSpd(_)
                | Error::NotHorizontal(_)
                | Error::DivergedFit { .. }
                | Error::ZeroHeading { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
