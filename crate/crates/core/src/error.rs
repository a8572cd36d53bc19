use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("jet error: {0}")]
    Jet(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("degenerate hypersurface: {0}")]
    Degenerate(String),
    #[error("not locally strongly convex: {0}")]
    NotConvex(String),
    #[error("parameter mu = {mu} is not admissible: min(1 - mu*lambda) = {margin:.6}")]
    Inadmissible { mu: f64, margin: f64 },
    #[error("insufficient jet order: {0}")]
    Order(String),
    #[error("point is outside the tube: {0}")]
    OutsideTube(String),
    #[error("{0}")]
    Numerical(String),
    #[error("unknown surface `{0}`")]
    UnknownSurface(String),
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
