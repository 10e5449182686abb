use thiserror::Error;

/// Errors produced by the crossmatch library.
#[derive(Debug, Error)]
pub enum Error {
    /// A solver or statistic was asked to run on fewer points than it supports.
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },

    /// Brute-force enumeration refused: (t-1)!! matchings grow too fast.
    #[error("brute-force matching is limited to {max} points, got {got}")]
    BruteForceTooLarge { max: usize, got: usize },

    /// The closed-form null distribution requires an even combined sample size.
    #[error("closed-form null distribution requires even t = m + n, got t = {t}; use permutation calibration instead")]
    OddSampleSize { t: usize },

    /// The null variance formula has (t-3) in the denominator.
    #[error("null variance is undefined for t = {t} < 4")]
    VarianceUndefined { t: usize },

    /// A caller-supplied parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input data violated a structural requirement (dimensions, labels, sizes).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Numerical routine failed to reach its target accuracy.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
