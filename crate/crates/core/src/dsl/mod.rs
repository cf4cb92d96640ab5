//! The textual modeling language: parsing, formulas, validation and printing.

mod error;
mod formula;
mod lexer;
mod model;
mod parser;
mod print;
mod validate;

pub use error::{ParseError, ParseErrorKind};
pub use formula::{eval_formula, AtomLookup, EvalError, Formula};
pub use lexer::Pos;
pub use model::*;
pub use parser::{parse_domain, parse_domain_with_spans, SourceMap};
pub use print::{format_formula, to_source};
pub use validate::{has_errors, validate, Diagnostic, Severity, Subject};
