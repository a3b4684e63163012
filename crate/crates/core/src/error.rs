use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numeric(#[from] ndiff::NdiffError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("need at least {needed} samples, got {got}")]
    DegenerateSample { needed: usize, got: usize },
    #[error("training of {component} diverged at epoch {epoch}")]
    Diverged { component: String, epoch: usize },
    #[error("quantile level {0} is outside (0, 1)")]
    AlphaRange(f64),
    #[error("positivity violated: {0}")]
    Positivity(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
