use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed variable `{name}`: {reason}")]
    MalformedVariable { name: String, reason: String },
    #[error("variable index {index} was not issued by this model")]
    UnknownVariable { index: usize },
    #[error("non-finite coefficient or right-hand side in {context}")]
    NonFinite { context: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}
