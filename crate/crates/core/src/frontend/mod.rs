//! Lexing, parsing and typechecking of `.3d` source text.

mod diag;
mod lexer;
mod parser;
mod pretty;
mod typecheck;

pub use diag::{Code, Diagnostic, DiagnosticRecord, Severity};
pub use parser::{is_reserved, KEYWORDS};
pub use pretty::pretty;
pub use typecheck::typecheck;

use crate::ast::{Expr, Spec, SpecAst};

/// Identifies the accepted language subset; bumped when the grammar changes.
pub const GRAMMAR_VERSION: &str = "3d-subset-1";

/// Parses source text into an unchecked AST.
pub fn parse_spec(text: &str) -> Result<SpecAst, Vec<Diagnostic>> {
    let toks = lexer::tokenize(text).map_err(|d| vec![d])?;
    parser::Parser::new(toks).spec().map_err(|d| vec![d])
}

/// Parses a standalone expression (used by tests and tooling).
pub fn parse_expr(text: &str) -> Result<Expr, Diagnostic> {
    let toks = lexer::tokenize(text)?;
    let mut p = parser::Parser::new(toks);
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parse and typecheck, using the last definition as the entry point.
pub fn check(text: &str) -> Result<Spec, Vec<Diagnostic>> {
    check_with_entry(text, None)
}

pub fn check_with_entry(text: &str, entry: Option<&str>) -> Result<Spec, Vec<Diagnostic>> {
    typecheck(parse_spec(text)?, entry)
}

#[cfg(test)]
mod tests;
