use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at line {line}, field `{field}`: {message}")]
    Config {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("family {family} is not defined for W({a}, {b})")]
    FamilyMismatch {
        family: &'static str,
        a: String,
        b: String,
    },

    #[error("invalid windowed map: {0}")]
    InvalidMap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
