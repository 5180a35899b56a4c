use std::path::PathBuf;

use thiserror::Error;

use crate::bundle::BundleResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The dual simplex QP did not reach its duality-gap tolerance.
    #[error("model subproblem did not converge after {iterations} iterations (gap {gap:e})")]
    SolverNonConvergence {
        iterations: usize,
        gap: f64,
        best: Vec<f64>,
    },

    /// The bundle subroutine hit its iteration cap; usually a mis-specified eta or delta.
    #[error("bundle subroutine exceeded {max_iter} iterations (last gap {:e})", .last.gap)]
    BundleMaxIter {
        max_iter: usize,
        last: Box<BundleResult>,
    },

    #[error("rejection sampler exceeded {max_rejections} rejections at center {center:?}")]
    MaxRejections {
        max_rejections: u64,
        center: Vec<f64>,
    },

    /// The proposal envelope failed to minorize the target; exp(h1 - g) exceeded one.
    #[error("envelope violation: log acceptance ratio {log_ratio:e} > 0")]
    EnvelopeViolation { log_ratio: f64 },

    #[error("potential `{0}` has no closed-form proximal map")]
    MissingProx(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

impl Error {
    /// Errors caused by bad input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Config(_) | Error::DimensionMismatch { .. } | Error::MissingProx(_)
        )
    }
}
