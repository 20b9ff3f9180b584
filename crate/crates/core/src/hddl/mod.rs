//! HDDL subset reader/printer, the disturbance file format, and the JSON
//! forms of trees, plans and states.

pub mod json;
pub mod lexer;
pub mod parse;
pub mod print;

use std::fmt;

use crate::model::{Effect, Formula, SourceSpan, Sym, TypedVar};

pub use json::{plan_from_json, plan_to_json, tree_from_json, tree_to_json, JsonError};
pub use parse::{parse_disturbances, parse_domain, parse_problem};
pub use print::{print_disturbances, print_domain, print_problem};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("lexical error: {0}")]
    Lexical(String),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("`{symbol}` expects {expected} argument(s), got {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("undeclared {what} `{name}`")]
    Undeclared { what: String, name: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("`{0}` is declared twice")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: SourceSpan,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.kind)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// After the k-th executed (non-dummy) action, counting from 1.
    After(usize),
    Random,
}

/// An exogenous state change with an applicability guard.
#[derive(Clone, Debug, PartialEq)]
pub struct DisturbanceSpec {
    pub name: Sym,
    pub params: Vec<TypedVar>,
    pub precondition: Formula,
    pub effect: Effect,
    pub placement: Placement,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisturbanceFile {
    pub name: Sym,
    pub domain_name: Sym,
    pub disturbances: Vec<DisturbanceSpec>,
}
