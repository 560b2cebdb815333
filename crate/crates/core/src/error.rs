use thiserror::Error;

/// Errors raised by the simulation and optimization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("evolution degenerate: propagated trace {trace:e} vanished")]
    EvolutionDegenerate { trace: f64 },

    #[error("integrator step {step:e} underflowed at t = {t}")]
    Stiffness { t: f64, step: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("post-selection impossible: |f>-|e> block trace {trace:e} vanished")]
    PostSelectionImpossible { trace: f64 },

    #[error("closed form disagrees with the propagated state by {deviation:e} ({what})")]
    TranscriptionMismatch { what: &'static str, deviation: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
