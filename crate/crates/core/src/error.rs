use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The selected columns do not span a subspace of the expected dimension.
    #[error("selected submatrix is rank deficient ({rank} of {cols} columns independent)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("sparsity level {k} out of range 1..={max}")]
    BadK { k: usize, max: usize },

    #[error("only {distinct} distinct indices available, {k} requested")]
    TooFewDistinct { k: usize, distinct: usize },

    #[error("bad dimensions: {0}")]
    BadDimensions(String),

    #[error("bad support: {0}")]
    BadSupport(String),

    #[error("neighborhood size g={g} out of range 1..={q}")]
    BadG { g: usize, q: usize },

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
