use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid tournament: {0}")]
    InvalidTournament(String),

    #[error("tournament has {} tied pair(s), first {:?}", .0.len(), .0.first())]
    Ties(Vec<(usize, usize)>),

    #[error("an agent cannot cover itself (agent {0})")]
    SelfCover(usize),

    #[error("comparison graph is disconnected into {} components: {:?}", .0.len(), .0)]
    Disconnected(Vec<Vec<usize>>),

    #[error("matrix power sum overflowed at power {power}; K or alpha too aggressive")]
    Overflow { power: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("power iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("gradient requested for a non-scalar output of shape {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },

    #[error("gradient check failed: relative error {0:e}")]
    GradientCheck(f64),

    #[error("ground-truth membership is required when the calibration weight is positive")]
    MissingTruth,

    #[error("could not draw a tie-free tournament after {0} attempts")]
    TieFreeExhausted(usize),

    #[error("{failed} of {total} bootstrap replicates failed (limit is 10%)")]
    BootstrapFailures { failed: usize, total: usize },
}

impl Error {
    /// Numerical failures (as opposed to bad input or bad configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Overflow { .. }
                | Error::NonFinite(_)
                | Error::NonConvergence { .. }
                | Error::GradientCheck(_)
                | Error::TieFreeExhausted(_)
                | Error::BootstrapFailures { .. }
        )
    }

    /// Errors caused by parameter values rather than by the data.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidTemperature(_) | Error::InvalidParameter(_) | Error::MissingTruth
        )
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(tau))
    }
}
