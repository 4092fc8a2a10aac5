use thiserror::Error;

/// Errors raised by the simulation, signal-processing and decoding layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("event {index}: window [{start}, {end}) lies outside the recording of {len} samples")]
    EpochOutOfBounds {
        index: usize,
        start: i64,
        end: i64,
        len: usize,
    },

    #[error("unstable filter: pole radius {radius:.6} is not inside the unit circle")]
    UnstableFilter { radius: f64 },

    #[error("degenerate training data: {0}")]
    DegenerateTrainingData(String),

    #[error("trial block already stopped after {trials} trials")]
    BlockStopped { trials: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
