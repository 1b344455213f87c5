//! Abstract syntax for the format description language.
//!
//! The same types describe both the unchecked output of the parser and the
//! checked [`Spec`] produced by the typechecker. The checker resolves named
//! references to enums into [`TypeRef::Enum`] and records the entry type.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// A region of source text: byte offsets plus 1-based line/column of both ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: Span) -> Span {
        let (first, last) = if self.start <= other.start {
            (self, other)
        } else {
            (other, self)
        };
        let tail = if last.end >= first.end { last } else { first };
        Span {
            start: first.start,
            start_line: first.start_line,
            start_col: first.start_col,
            end: tail.end,
            end_line: tail.end_line,
            end_col: tail.end_col,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Endian {
    Big,
    Little,
}

/// An unsigned machine integer type such as `UINT8` or `UINT16BE`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct IntKind {
    bits: u32,
    endian: Endian,
}

impl IntKind {
    pub const U8: IntKind = IntKind {
        bits: 8,
        endian: Endian::Big,
    };

    /// Builds a kind, canonicalizing 8-bit integers to big-endian.
    /// Returns `None` for widths other than 8, 16, 32 and 64.
    pub fn new(bits: u32, endian: Endian) -> Option<IntKind> {
        match bits {
            8 => Some(IntKind::U8),
            16 | 32 | 64 => Some(IntKind { bits, endian }),
            _ => None,
        }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn bytes(self) -> usize {
        (self.bits / 8) as usize
    }

    pub fn endian(self) -> Endian {
        self.endian
    }

    /// Largest representable value.
    pub fn max_value(self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    /// Parses a type keyword (`UINT8`, `UINT16`, `UINT32BE`, ...).
    pub fn from_keyword(word: &str) -> Option<IntKind> {
        let (digits, endian) = match word.strip_suffix("BE") {
            Some(rest) => (rest, Endian::Big),
            None => (word, Endian::Little),
        };
        let bits = digits.strip_prefix("UINT")?.parse().ok()?;
        IntKind::new(bits, endian)
    }

    pub fn keyword(self) -> String {
        match (self.bits, self.endian) {
            (8, _) => "UINT8".to_string(),
            (b, Endian::Big) => format!("UINT{b}BE"),
            (b, Endian::Little) => format!("UINT{b}"),
        }
    }
}

impl fmt::Display for IntKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Shl,
    Shr,
    BitAnd,
    BitOr,
    BitXor,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter. Follows C.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::BitOr => 3,
            BinOp::BitXor => 4,
            BinOp::BitAnd => 5,
            BinOp::Eq | BinOp::Ne => 6,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 7,
            BinOp::Shl | BinOp::Shr => 8,
            BinOp::Add | BinOp::Sub => 9,
            BinOp::Mul => 10,
        }
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ExprKind {
    Int(u64),
    Ident(String),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn int(n: u64) -> Expr {
        Expr::new(ExprKind::Int(n), Span::default())
    }

    pub fn ident(name: &str) -> Expr {
        Expr::new(ExprKind::Ident(name.to_string()), Span::default())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::new(
            ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            Span::default(),
        )
    }

    /// Every identifier mentioned, in left-to-right order.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_identifiers(&mut out);
        out
    }

    fn collect_identifiers<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.kind {
            ExprKind::Int(_) => {}
            ExprKind::Ident(name) => out.push(name),
            ExprKind::Not(inner) => inner.collect_identifiers(out),
            ExprKind::Binary(_, l, r) => {
                l.collect_identifiers(out);
                r.collect_identifiers(out);
            }
        }
    }

    fn erase_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            ExprKind::Int(_) | ExprKind::Ident(_) => {}
            ExprKind::Not(inner) => inner.erase_spans(),
            ExprKind::Binary(_, l, r) => {
                l.erase_spans();
                r.erase_spans();
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, parent: u8) -> fmt::Result {
    match &e.kind {
        ExprKind::Int(n) => write!(f, "{n}"),
        ExprKind::Ident(name) => f.write_str(name),
        ExprKind::Not(inner) => {
            f.write_str("!")?;
            write_expr(f, inner, u8::MAX)
        }
        ExprKind::Binary(op, l, r) => {
            let prec = op.precedence();
            let wrap = prec <= parent;
            if wrap {
                f.write_str("(")?;
            }
            // Left-associative: the left operand may share our precedence.
            write_expr(f, l, prec - 1)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, r, prec)?;
            if wrap {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: &str) -> Ident {
        Ident {
            name: name.to_string(),
            span: Span::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum TypeRef {
    Int(IntKind),
    /// A struct, casetype or unit alias instantiated with arguments.
    /// Before checking this also covers enum names.
    Named { name: Ident, args: Vec<Expr> },
    /// Set by the typechecker for references to enum definitions.
    Enum(Ident),
    Unit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ArrayForm {
    None,
    FixedBytes(u64),
    ByteSize(Expr),
    ConsumeAll,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldDecl {
    pub name: Ident,
    pub ty: TypeRef,
    pub bitwidth: Option<u32>,
    pub array: ArrayForm,
    pub constraint: Option<Expr>,
    pub span: Span,
}

/// A unit of parsing within a field list: one ordinary field, or a run of
/// bitfields sharing one container integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldGroup {
    Single(usize),
    /// `members` holds `(field index, shift, width)`; bits are assigned
    /// most-significant first in declaration order.
    Bits {
        kind: IntKind,
        members: Vec<(usize, u32, u32)>,
    },
}

/// Splits a field list into groups. Consecutive bitfields of one container
/// type fill containers greedily; a new container starts once the previous
/// one is full. Assumes the list passed the typechecker's fill rule.
pub fn field_groups(fields: &[FieldDecl]) -> Vec<FieldGroup> {
    /// Container kind, bits still free, and members placed so far.
    type Open = (IntKind, u32, Vec<(usize, u32, u32)>);
    let mut out = Vec::new();
    let mut open: Option<Open> = None;
    for (i, f) in fields.iter().enumerate() {
        let bit = match (f.bitwidth, &f.ty) {
            (Some(w), TypeRef::Int(kind)) => Some((*kind, w)),
            _ => None,
        };
        if let Some((kind, w)) = bit {
            let (k, used, mut members) = match open.take() {
                Some((k, used, members)) if k == kind => (k, used, members),
                Some((k, _, members)) => {
                    out.push(FieldGroup::Bits { kind: k, members });
                    (kind, 0, Vec::new())
                }
                None => (kind, 0, Vec::new()),
            };
            let shift = k.bits().saturating_sub(used + w);
            members.push((i, shift, w));
            if used + w >= k.bits() {
                out.push(FieldGroup::Bits { kind: k, members });
            } else {
                open = Some((k, used + w, members));
            }
        } else {
            if let Some((kind, _, members)) = open.take() {
                out.push(FieldGroup::Bits { kind, members });
            }
            out.push(FieldGroup::Single(i));
        }
    }
    if let Some((kind, _, members)) = open {
        out.push(FieldGroup::Bits { kind, members });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: Ident,
    pub kind: IntKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Case {
    pub tag: u64,
    pub field: FieldDecl,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EnumConst {
    pub name: Ident,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum TypeBody {
    Struct(Vec<FieldDecl>),
    Casetype { scrutinee: Expr, cases: Vec<Case> },
    Enum {
        underlying: IntKind,
        constants: Vec<EnumConst>,
    },
    Unit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeDef {
    pub name: Ident,
    /// Optional C-style tag (`_message` in `typedef struct _message`).
    pub tag: Option<Ident>,
    pub params: Vec<Param>,
    pub body: TypeBody,
    pub span: Span,
}

impl TypeDef {
    pub fn kind_name(&self) -> &'static str {
        match self.body {
            TypeBody::Struct(_) => "struct",
            TypeBody::Casetype { .. } => "casetype",
            TypeBody::Enum { .. } => "enum",
            TypeBody::Unit => "unit",
        }
    }
}

/// Parser output: definitions in source order, not yet checked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpecAst {
    pub defs: Vec<TypeDef>,
}

/// A checked specification with a single entry point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spec {
    defs: Vec<TypeDef>,
    index: BTreeMap<String, usize>,
    enum_consts: BTreeMap<String, u64>,
    entry: String,
}

impl Spec {
    /// Assembles a spec. Only the typechecker should call this; it is the
    /// one place that establishes the invariants.
    pub(crate) fn from_checked(defs: Vec<TypeDef>, entry: String) -> Spec {
        let index = defs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.name.clone(), i))
            .collect();
        let mut enum_consts = BTreeMap::new();
        for def in &defs {
            if let TypeBody::Enum { constants, .. } = &def.body {
                for c in constants {
                    enum_consts.insert(c.name.name.clone(), c.value);
                }
            }
        }
        Spec {
            defs,
            index,
            enum_consts,
            entry,
        }
    }

    pub fn defs(&self) -> &[TypeDef] {
        &self.defs
    }

    pub fn get(&self, name: &str) -> Option<&TypeDef> {
        self.index.get(name).map(|&i| &self.defs[i])
    }

    pub fn entry_name(&self) -> &str {
        &self.entry
    }

    pub fn entry(&self) -> &TypeDef {
        self.get(&self.entry).expect("checked spec has its entry")
    }

    pub fn enum_constant(&self, name: &str) -> Option<u64> {
        self.enum_consts.get(name).copied()
    }

    pub fn enum_constants(&self) -> &BTreeMap<String, u64> {
        &self.enum_consts
    }

    /// Copy with every span reset, for structural comparison of specs
    /// parsed from different texts.
    pub fn erase_spans(&self) -> Spec {
        let mut defs = self.defs.clone();
        for def in &mut defs {
            def.span = Span::default();
            def.name.span = Span::default();
            if let Some(tag) = &mut def.tag {
                tag.span = Span::default();
            }
            for p in &mut def.params {
                p.name.span = Span::default();
            }
            match &mut def.body {
                TypeBody::Struct(fields) => fields.iter_mut().for_each(erase_field),
                TypeBody::Casetype { scrutinee, cases } => {
                    scrutinee.erase_spans();
                    for case in cases {
                        case.span = Span::default();
                        erase_field(&mut case.field);
                    }
                }
                TypeBody::Enum { constants, .. } => {
                    for c in constants {
                        c.name.span = Span::default();
                    }
                }
                TypeBody::Unit => {}
            }
        }
        Spec::from_checked(defs, self.entry.clone())
    }
}

fn erase_field(field: &mut FieldDecl) {
    field.span = Span::default();
    field.name.span = Span::default();
    match &mut field.ty {
        TypeRef::Named { name, args } => {
            name.span = Span::default();
            args.iter_mut().for_each(Expr::erase_spans);
        }
        TypeRef::Enum(name) => name.span = Span::default(),
        TypeRef::Int(_) | TypeRef::Unit => {}
    }
    if let ArrayForm::ByteSize(e) = &mut field.array {
        e.erase_spans();
    }
    if let Some(c) = &mut field.constraint {
        c.erase_spans();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_kind_keywords() {
        assert_eq!(IntKind::from_keyword("UINT8"), Some(IntKind::U8));
        assert_eq!(IntKind::from_keyword("UINT8BE"), Some(IntKind::U8));
        let k = IntKind::from_keyword("UINT16BE").unwrap();
        assert_eq!((k.bits(), k.endian()), (16, Endian::Big));
        let k = IntKind::from_keyword("UINT32").unwrap();
        assert_eq!((k.bits(), k.endian()), (32, Endian::Little));
        assert_eq!(IntKind::from_keyword("UINT12"), None);
        assert_eq!(IntKind::from_keyword("INT8"), None);
        assert_eq!(IntKind::new(8, Endian::Little).unwrap().endian(), Endian::Big);
        assert_eq!(IntKind::from_keyword("UINT64BE").unwrap().max_value(), u64::MAX);
    }

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Add, Expr::ident("a"), Expr::int(1)),
            Expr::int(2),
        );
        assert_eq!(e.to_string(), "(a + 1) * 2");
        let e = Expr::binary(
            BinOp::Sub,
            Expr::ident("a"),
            Expr::binary(BinOp::Sub, Expr::ident("b"), Expr::ident("c")),
        );
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::binary(
            BinOp::Sub,
            Expr::binary(BinOp::Sub, Expr::ident("a"), Expr::ident("b")),
            Expr::ident("c"),
        );
        assert_eq!(e.to_string(), "a - b - c");
    }
}
