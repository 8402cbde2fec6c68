use thiserror::Error;

/// Errors raised by the photodetection routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A truncated vector or histogram would lose more mass than allowed.
    #[error("truncation too small for {what}: need at least {required}")]
    TruncationTooSmall { what: &'static str, required: usize },

    #[error("statistic undefined: {0}")]
    UndefinedStatistic(&'static str),

    /// The low-bias plateau of a signal-to-noise scan could not be established.
    #[error("signal-to-noise plateau undefined: {0}")]
    PlateauUndefined(&'static str),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(&'static str),

    #[error("quadrature failed for {integral} at n = {n}: {reason}")]
    Quadrature {
        integral: &'static str,
        n: usize,
        reason: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
