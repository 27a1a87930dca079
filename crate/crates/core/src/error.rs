use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unknown activation index {0}")]
    UnknownAi(usize),
    #[error("mesh regularity violated: {0}")]
    Regularity(String),
    #[error("geometry not resolved: {0}; increase geom_refine")]
    GeometryResolution(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sequencing error: {0}")]
    Sequencing(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
