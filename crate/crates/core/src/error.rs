use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid monitoring structure: {0}")]
    InvalidMonitoring(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("axes overlap: axis {0} appears in both groups")]
    OverlappingAxes(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("player index {index} out of range for {players} players")]
    PlayerIndex { index: usize, players: usize },

    #[error(
        "rate infeasible: R* + 2eps = {required:.6} bits exceeds log2|S0| = {threshold:.6} bits \
         (R* = {rstar:.6}, eps = {epsilon})"
    )]
    RateInfeasible {
        rstar: f64,
        epsilon: f64,
        required: f64,
        threshold: f64,
    },

    #[error("decoder search space of {size} candidates exceeds the cap of {cap}")]
    SearchTooLarge { size: f64, cap: u64 },

    /// Config file problem; the message names the line or field.
    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
