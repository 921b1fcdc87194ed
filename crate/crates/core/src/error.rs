use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("integration diverged at step {step} (t = {time:e} s): non-finite field values")]
    Diverged { step: usize, time: f64 },

    #[error("matrix exponential overflow after {smvps} SMVPs; increase the scaling count s")]
    ExpmOverflow { smvps: u64 },

    #[error("tolerance {requested:e} is below the achievable floor {floor:e}")]
    ToleranceTooSmall { requested: f64, floor: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot split {steps} time steps into {p} intervals")]
    PartitionTooFine { steps: usize, p: usize },

    #[error("interval {interval}: {source}")]
    Interval {
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True if this error (or the error wrapped by an interval context) is a
    /// numerical divergence or overflow rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Diverged { .. } | Error::ExpmOverflow { .. } => true,
            Error::Interval { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
