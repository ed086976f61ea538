use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "epsilon calibration failed: target lambda2 {target} not reached \
         (achieved range [{min_lambda2:.6}, {max_lambda2:.6}])"
    )]
    Calibration {
        target: f64,
        min_lambda2: f64,
        max_lambda2: f64,
    },

    #[error("degenerate operator: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("point sets do not correspond: {left} vs {right} points")]
    Correspondence { left: usize, right: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("index {index} out of bounds for {len} points")]
    Index { index: usize, len: usize },

    #[error("malformed matrix data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_index(index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::Index { index, len })
    }
}
