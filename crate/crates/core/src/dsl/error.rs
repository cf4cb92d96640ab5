use thiserror::Error;

use super::lexer::Pos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(pos: Pos, kind: ParseErrorKind) -> Self {
        ParseError { line: pos.line, col: pos.col, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("expected {expected}, found end of input")]
    UnexpectedEof { expected: String },
    #[error("duplicate {category} `{name}`")]
    Duplicate { category: &'static str, name: String },
    #[error("`{value}` is not in the domain of `{variable}`")]
    UnknownValue { variable: String, value: String },
    #[error("probability `{0}` is outside (0,1]")]
    ProbabilityOutOfRange(String),
    #[error("effect probabilities sum to {sum}, which exceeds 1")]
    ProbabilitySum { sum: String },
    #[error("invalid integer `{0}`")]
    InvalidInteger(String),
    #[error("`{0}` is assigned more than once")]
    DuplicateAssignment(String),
    #[error("missing `Init` block: a model must declare its initial state")]
    MissingInit,
    #[error("initial state does not assign `{0}`")]
    InitIncomplete(String),
    #[error("{0}")]
    Invalid(String),
}
