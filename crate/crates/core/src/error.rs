use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("asymmetric cost matrix at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("infeasible LP vector: {0}")]
    Infeasible(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("empty conditional measure")]
    EmptyMeasure,
    #[error("numerical precision failure: imaginary residue {0:e}")]
    Precision(f64),
    #[error("query budget exceeded: {0} oracle calls")]
    Budget(u128),
    #[error("invalid query: {0}")]
    Query(String),
    #[error("eta out of range: {0}")]
    EtaRange(f64),
    #[error("structural error: {0}")]
    Structure(String),
    #[error("constants violated: {0}")]
    ConstantsViolated(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
