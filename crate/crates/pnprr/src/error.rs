//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`].  Variants are grouped
//! by failure class so callers (notably the CLI) can map them to exit codes:
//! usage problems ([`Error::InvalidParameter`], [`Error::DimensionMismatch`],
//! [`Error::Parse`], [`Error::Unsupported`]), numerical failures
//! ([`Error::NonFinite`], [`Error::Divergence`], [`Error::Stall`],
//! [`Error::EmptyMasks`]), and external denoiser failures ([`Error::Plugin`]).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands disagree in rank or per-axis size.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Geodesic integration blew up; `step` is the time step index.
    #[error("geodesic integration diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    /// Line search could not find a decreasing step.  Carries the energy
    /// trace accumulated up to the failing iteration.
    #[error("line search stalled at iteration {iteration} after {halvings} step halvings")]
    Stall {
        iteration: usize,
        halvings: usize,
        energy_trace: Vec<f64>,
    },

    /// Dice overlap is undefined when both masks are empty.
    #[error("dice overlap undefined: both masks are empty")]
    EmptyMasks,

    /// An external denoiser subprocess misbehaved (spawn failure, non-zero
    /// exit, malformed or mismatched output).
    #[error("plugin denoiser failed: {0}")]
    Plugin(String),

    /// Malformed field file or config file; `line` is 1-based.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// Recognised but unimplemented input format.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Wraps a failure that occurred inside outer iteration `iteration` of
    /// the alternating loop.
    #[error("pnp outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code class: 1 usage, 2 numerical, 3 plugin.
    pub fn exit_class(&self) -> i32 {
        match self {
            Error::DimensionMismatch(_)
            | Error::InvalidParameter(_)
            | Error::Parse { .. }
            | Error::Unsupported(_)
            | Error::Io(_) => 1,
            Error::NonFinite(_)
            | Error::Divergence { .. }
            | Error::Stall { .. }
            | Error::EmptyMasks => 2,
            Error::Plugin(_) => 3,
            Error::AtIteration { source, .. } => source.exit_class(),
        }
    }
}
