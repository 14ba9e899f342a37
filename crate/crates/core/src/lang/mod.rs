//! Field-calculus surface language.
//!
//! The grammar is C-like:
//!
//! ```text
//! program := def* expr?
//! def     := 'def' IDENT '(' params ')' '{' expr '}'
//! expr    := '(' params ')' '=>' expr | binary
//! binary  := unary (op unary)*          // || && == != < <= > >= min + - * /
//! unary   := '!' unary | '-' unary | postfix
//! postfix := primary ('(' args ')')*
//! primary := NUMBER | true | false | infinity | IDENT | '(' expr ')'
//!          | 'rep' '(' expr ')' '{' expr '}' | 'nbr' '{' expr '}'
//!          | 'sense' '(' IDENT ')' | OPERATOR          // operator as a value: mux(c, +, -)
//! ```
//!
//! `mux`, the hood folds, `nbrRange` and friends are ordinary builtins, not
//! keywords. Line comments start with `//`.

mod ast;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

pub use ast::{Def, Expr, ExprKind, Lambda, Literal, Name, Program, Tag};
pub use parser::{parse, parse_with_prelude};
pub use pretty::{format_number, pretty, pretty_expr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self { line, col, message: message.into() }
    }

    /// `file:line:col: message`, the diagnostic format used on stderr.
    pub fn with_file(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}
