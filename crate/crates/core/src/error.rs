use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice dimension {width}x{height}: both sides must be at least 3")]
    InvalidDimension { width: usize, height: usize },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate rate {0}: combined flip rate must be positive")]
    DegenerateRate(f64),

    #[error("class table inconsistency: {0}")]
    Inconsistent(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("step size error: {0}")]
    StepSize(String),

    #[error("relaxation did not converge at step {step} (t_c = {committed_time}) after {iterations} iterations")]
    Divergence {
        step: usize,
        committed_time: f64,
        iterations: usize,
        /// Per-iteration maxima of boundary event counts seen before giving up.
        f_per_iteration: Vec<usize>,
    },

    #[error("enumeration refused: {sites} sites exceeds the cap of {cap}")]
    EnumerationTooLarge { sites: usize, cap: usize },

    #[error("fixture parse error at line {line}: {message}")]
    Fixture { line: usize, message: String },
}
