//! Recursive-descent parser for the format language.
//!
//! ```text
//! spec     := item+
//! item     := 'typedef' 'struct' [TAG [params]] '{' field* '}' NAME ';'
//!           | 'casetype' TAG params '{' 'switch' '(' expr ')' '{' case+ '}' '}' NAME ';'
//!           | ['typedef'] INT 'enum' NAME '{' enumc (',' enumc)* [','] '}' [NAME] ';'
//!           | 'typedef' 'unit' NAME ';'
//! params   := '(' INT NAME (',' INT NAME)* ')'
//! case     := 'case' LIT ':' field
//! field    := tyref NAME [':' LIT] ['[' array ']'] ['{' expr '}'] ';'
//! tyref    := INT | 'unit' | NAME ['(' expr (',' expr)* ')']
//! array    := LIT | ':' 'byte-size' expr | ':' 'consume-all'
//! ```
//!
//! The parser stops at the first syntax error.

use super::diag::{Code, Diagnostic};
use super::lexer::{Tok, Token};
use crate::ast::*;

/// Words that may not be used as identifiers, besides the integer type names.
pub const KEYWORDS: &[&str] = &[
    "typedef", "struct", "casetype", "switch", "case", "enum", "unit", "type",
];

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word) || IntKind::from_keyword(word).is_some()
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    pub(crate) fn new(toks: Vec<Token>) -> Parser {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let found = self.peek();
        let code = if *found == Tok::Eof {
            Code::Syn003
        } else {
            Code::Syn002
        };
        let msg = if *found == Tok::Eof {
            format!("unexpected end of input, expected {expected}")
        } else {
            format!("expected {expected}, found {}", found.describe())
        };
        Diagnostic::error(code, self.span(), msg)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(what))
        }
    }

    fn expect_word(&mut self, word: &str) -> PResult<Span> {
        if self.at_word(word) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    /// An identifier that is not a reserved word.
    fn ident(&mut self, what: &str) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) if is_reserved(&name) => Err(Diagnostic::error(
                Code::Syn004,
                self.span(),
                format!("`{name}` is a reserved keyword and cannot be used as {what}"),
            )),
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn int_kind(&mut self) -> PResult<IntKind> {
        if let Tok::Ident(w) = self.peek() {
            if let Some(kind) = IntKind::from_keyword(w) {
                self.bump();
                return Ok(kind);
            }
        }
        Err(self.unexpected("an integer type such as `UINT8` or `UINT16BE`"))
    }

    fn literal(&mut self, what: &str) -> PResult<u64> {
        match *self.peek() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    pub(crate) fn spec(&mut self) -> PResult<SpecAst> {
        let mut defs = Vec::new();
        if *self.peek() == Tok::Eof {
            return Err(Diagnostic::error(
                Code::Syn001,
                self.span(),
                "expected typedef",
            ));
        }
        while *self.peek() != Tok::Eof {
            defs.push(self.item()?);
        }
        Ok(SpecAst { defs })
    }

    fn item(&mut self) -> PResult<TypeDef> {
        let start = self.span();
        let is_int_word =
            |t: &Tok| matches!(t, Tok::Ident(w) if IntKind::from_keyword(w).is_some());
        if self.at_word("typedef") {
            if self.peek_at(1) == &Tok::Ident("struct".into()) {
                self.bump();
                self.bump();
                return self.struct_def(start);
            }
            if self.peek_at(1) == &Tok::Ident("unit".into()) {
                self.bump();
                self.bump();
                let name = self.ident("a type name")?;
                self.expect(Tok::Semi, "`;`")?;
                return Ok(TypeDef {
                    name,
                    tag: None,
                    params: vec![],
                    body: TypeBody::Unit,
                    span: start.to(self.prev_span()),
                });
            }
            if is_int_word(self.peek_at(1)) {
                self.bump();
                return self.enum_def(start);
            }
            self.bump();
            return Err(self.unexpected("`struct`, `unit` or an enum declaration"));
        }
        if self.at_word("casetype") {
            self.bump();
            return self.casetype_def(start);
        }
        if is_int_word(self.peek()) {
            return self.enum_def(start);
        }
        Err(Diagnostic::error(
            Code::Syn001,
            self.span(),
            format!("expected typedef, found {}", self.peek().describe()),
        ))
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        loop {
            let kind = self.int_kind()?;
            let name = self.ident("a parameter name")?;
            params.push(Param { name, kind });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(params)
    }

    fn struct_def(&mut self, start: Span) -> PResult<TypeDef> {
        let mut tag = None;
        let mut params = vec![];
        if matches!(self.peek(), Tok::Ident(_)) {
            tag = Some(self.ident("a struct tag")?);
            if *self.peek() == Tok::LParen {
                params = self.params()?;
            }
        }
        self.expect(Tok::LBrace, "`{`")?;
        let mut fields = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("a field or `}`"));
            }
            fields.push(self.field()?);
        }
        self.bump();
        let name = self.ident("a type name")?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(TypeDef {
            name,
            tag,
            params,
            body: TypeBody::Struct(fields),
            span: start.to(self.prev_span()),
        })
    }

    fn casetype_def(&mut self, start: Span) -> PResult<TypeDef> {
        let tag = self.ident("a casetype tag")?;
        let params = self.params()?;
        self.expect(Tok::LBrace, "`{`")?;
        self.expect_word("switch")?;
        self.expect(Tok::LParen, "`(`")?;
        let scrutinee = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut cases = Vec::new();
        while self.at_word("case") {
            let case_start = self.bump().span;
            let tag = self.literal("an integer case tag")?;
            self.expect(Tok::Colon, "`:`")?;
            let field = self.field()?;
            cases.push(Case {
                tag,
                field,
                span: case_start.to(self.prev_span()),
            });
        }
        if cases.is_empty() {
            return Err(self.unexpected("`case`"));
        }
        self.expect(Tok::RBrace, "`case` or `}`")?;
        self.expect(Tok::RBrace, "`}`")?;
        let name = self.ident("a type name")?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(TypeDef {
            name,
            tag: Some(tag),
            params,
            body: TypeBody::Casetype { scrutinee, cases },
            span: start.to(self.prev_span()),
        })
    }

    fn enum_def(&mut self, start: Span) -> PResult<TypeDef> {
        let underlying = self.int_kind()?;
        self.expect_word("enum")?;
        let first = self.ident("an enum name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut constants = Vec::new();
        let mut next = 0u64;
        while *self.peek() != Tok::RBrace {
            let name = self.ident("an enum constant")?;
            let value = if self.eat(&Tok::Assign) {
                self.literal("an integer value")?
            } else {
                next
            };
            next = value.wrapping_add(1);
            constants.push(EnumConst { name, value });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        if constants.is_empty() {
            return Err(self.unexpected("an enum constant"));
        }
        self.expect(Tok::RBrace, "`,` or `}`")?;
        let (tag, name) = if matches!(self.peek(), Tok::Ident(_)) {
            (Some(first), self.ident("a type name")?)
        } else {
            (None, first)
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(TypeDef {
            name,
            tag,
            params: vec![],
            body: TypeBody::Enum {
                underlying,
                constants,
            },
            span: start.to(self.prev_span()),
        })
    }

    fn field(&mut self) -> PResult<FieldDecl> {
        let start = self.span();
        let ty = self.type_ref()?;
        let name = self.ident("a field name")?;
        let bitwidth = if self.eat(&Tok::Colon) {
            let w = self.literal("a bit width")?;
            Some(u32::try_from(w).unwrap_or(u32::MAX))
        } else {
            None
        };
        let array = if self.eat(&Tok::LBracket) {
            let form = if self.eat(&Tok::Colon) {
                let word = self.hyphenated_word()?;
                match word.as_str() {
                    "byte-size" => ArrayForm::ByteSize(self.expr()?),
                    "consume-all" => ArrayForm::ConsumeAll,
                    other => {
                        return Err(Diagnostic::error(
                            Code::Syn002,
                            self.prev_span(),
                            format!("unknown array form `:{other}`, expected `:byte-size` or `:consume-all`"),
                        ))
                    }
                }
            } else {
                ArrayForm::FixedBytes(self.literal("an array size")?)
            };
            self.expect(Tok::RBracket, "`]`")?;
            form
        } else {
            ArrayForm::None
        };
        let constraint = if *self.peek() == Tok::LBrace {
            let open = self.bump().span;
            let e = self.expr()?;
            if *self.peek() == Tok::Eof {
                return Err(Diagnostic::error(
                    Code::Syn003,
                    open,
                    "unterminated constraint",
                ));
            }
            self.expect(Tok::RBrace, "`}` closing the constraint")?;
            Some(e)
        } else {
            None
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(FieldDecl {
            name,
            ty,
            bitwidth,
            array,
            constraint,
            span: start.to(self.prev_span()),
        })
    }

    /// Reads `word(-word)*`, as in `byte-size`.
    fn hyphenated_word(&mut self) -> PResult<String> {
        let mut word = match self.peek().clone() {
            Tok::Ident(w) => {
                self.bump();
                w
            }
            _ => return Err(self.unexpected("`byte-size` or `consume-all`")),
        };
        while *self.peek() == Tok::Minus {
            if let Tok::Ident(w) = self.peek_at(1).clone() {
                self.bump();
                self.bump();
                word.push('-');
                word.push_str(&w);
            } else {
                break;
            }
        }
        Ok(word)
    }

    fn type_ref(&mut self) -> PResult<TypeRef> {
        match self.peek().clone() {
            Tok::Ident(w) => {
                if let Some(kind) = IntKind::from_keyword(&w) {
                    self.bump();
                    return Ok(TypeRef::Int(kind));
                }
                if w == "unit" {
                    self.bump();
                    return Ok(TypeRef::Unit);
                }
                let name = self.ident("a type name")?;
                let mut args = Vec::new();
                if self.eat(&Tok::LParen) {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RParen, "`)` or `,`")?;
                }
                Ok(TypeRef::Named { name, args })
            }
            _ => Err(self.unexpected("a field type")),
        }
    }

    pub(crate) fn finish(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::Pipe => BinOp::BitOr,
            Tok::Caret => BinOp::BitXor,
            Tok::Amp => BinOp::BitAnd,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Shl => BinOp::Shl,
            Tok::Shr => BinOp::Shr,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                let inner = self.unary()?;
                let span = start.to(inner.span);
                Ok(Expr::new(ExprKind::Not(Box::new(inner)), span))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::new(ExprKind::Int(n), start))
            }
            Tok::Ident(_) => {
                let id = self.ident("an identifier")?;
                Ok(Expr::new(ExprKind::Ident(id.name), id.span))
            }
            Tok::LParen => {
                self.bump();
                let mut e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                e.span = start.to(self.prev_span());
                Ok(e)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}
