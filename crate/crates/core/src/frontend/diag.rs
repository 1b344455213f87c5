use std::fmt;

use serde::Serialize;

use crate::ast::Span;

/// Stable diagnostic codes. Golden tests and external tooling match on these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Code {
    /// Expected a type definition.
    Syn001,
    /// Unexpected token.
    Syn002,
    /// Unterminated block, constraint or comment.
    Syn003,
    /// Reserved keyword used as an identifier.
    Syn004,
    /// Integer literal out of range.
    Syn005,
    /// Invalid character.
    Syn006,
    /// Unresolved type reference.
    Typ001,
    /// Unbound identifier in an expression.
    Typ002,
    /// Duplicate definition.
    Typ003,
    /// Bitfield run does not fill its container.
    Typ004,
    /// Recursive type reference.
    Typ005,
    /// Boolean/integer mismatch.
    Typ006,
    /// Duplicate case tag.
    Typ007,
    /// `consume-all` outside tail position.
    Typ008,
    /// Casetype scrutinee refers to something other than a parameter.
    Typ009,
    /// Wrong number of type arguments.
    Typ010,
    /// Bad entry point.
    Typ011,
    /// Enum constant out of range for its underlying type.
    Typ012,
    /// Array of something other than `UINT8`.
    Typ013,
    /// Invalid bitfield width or placement.
    Typ014,
    /// Shift amount is not a small constant.
    Typ015,
    /// Constraint on a field that has no scalar value.
    Typ016,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syn001 => "SYN001",
            Code::Syn002 => "SYN002",
            Code::Syn003 => "SYN003",
            Code::Syn004 => "SYN004",
            Code::Syn005 => "SYN005",
            Code::Syn006 => "SYN006",
            Code::Typ001 => "TYP001",
            Code::Typ002 => "TYP002",
            Code::Typ003 => "TYP003",
            Code::Typ004 => "TYP004",
            Code::Typ005 => "TYP005",
            Code::Typ006 => "TYP006",
            Code::Typ007 => "TYP007",
            Code::Typ008 => "TYP008",
            Code::Typ009 => "TYP009",
            Code::Typ010 => "TYP010",
            Code::Typ011 => "TYP011",
            Code::Typ012 => "TYP012",
            Code::Typ013 => "TYP013",
            Code::Typ014 => "TYP014",
            Code::Typ015 => "TYP015",
            Code::Typ016 => "TYP016",
        }
    }

    pub fn is_syntax(self) -> bool {
        self.as_str().starts_with("SYN")
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn error(code: Code, span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span,
        }
    }

    /// `file:line:col: CODE message`
    pub fn render(&self, file: &str) -> String {
        format!(
            "{}:{}:{}: {} {}",
            file, self.span.start_line, self.span.start_col, self.code, self.message
        )
    }

    pub fn record(&self, file: &str) -> DiagnosticRecord {
        DiagnosticRecord {
            file: file.to_string(),
            severity: self.severity,
            code: self.code.as_str(),
            message: self.message.clone(),
            line: self.span.start_line,
            column: self.span.start_col,
            end_line: self.span.end_line,
            end_column: self.span.end_col,
            start_offset: self.span.start,
            end_offset: self.span.end,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {} {}",
            self.span.start_line, self.span.start_col, self.code, self.message
        )
    }
}

/// Machine-readable form of a diagnostic, one record per diagnostic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiagnosticRecord {
    pub file: String,
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub line: u32,
    pub column: u32,
    pub end_line: u32,
    pub end_column: u32,
    pub start_offset: usize,
    pub end_offset: usize,
}

/// Maps byte offsets to 1-based line/column pairs.
pub(crate) struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub(crate) fn new(text: &str) -> LineIndex {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex { starts }
    }

    pub(crate) fn position(&self, text: &str, offset: usize) -> (u32, u32) {
        let line = self.starts.partition_point(|&s| s <= offset) - 1;
        let col = text[self.starts[line]..offset].chars().count() + 1;
        (line as u32 + 1, col as u32)
    }

    pub(crate) fn span(&self, text: &str, start: usize, end: usize) -> Span {
        let (start_line, start_col) = self.position(text, start);
        let (end_line, end_col) = self.position(text, end);
        Span {
            start,
            end,
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }
}
