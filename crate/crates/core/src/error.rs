use alloc::string::String;

use thiserror::Error;

/// Parse failure with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {column}: expected {expected}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
}

impl SyntaxError {
    pub fn new(line: usize, column: usize, expected: impl Into<String>) -> Self {
        SyntaxError {
            line,
            column,
            expected: expected.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("template has {expected} slots but binding has {actual} values")]
    ArityMismatch { expected: usize, actual: usize },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("argument {value:?} of slot {slot} does not occur in the question")]
    QuestionDetachedArgument { slot: usize, value: String },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("replacement probability {0} is outside [0, 1]")]
    Probability(f64),
}
