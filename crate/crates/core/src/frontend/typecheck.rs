use std::collections::{BTreeMap, HashMap, HashSet};

use super::diag::{Code, Diagnostic};
use crate::ast::*;
use crate::eval::{self, Value, MAX_SHIFT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Int => "integer",
            Ty::Bool => "boolean",
        }
    }
}

/// Checks a parsed spec. `entry` overrides the default entry point, which is
/// the last definition in the file.
pub fn typecheck(ast: SpecAst, entry: Option<&str>) -> Result<Spec, Vec<Diagnostic>> {
    let mut cx = Checker {
        diags: Vec::new(),
        kinds: HashMap::new(),
        params: HashMap::new(),
        enum_consts: BTreeMap::new(),
    };
    let mut defs = ast.defs;
    cx.collect(&defs);
    for def in &mut defs {
        cx.check_def(def);
    }
    if cx.diags.is_empty() {
        cx.check_cycles(&defs);
    }
    let entry_name = cx.check_entry(&defs, entry);
    if cx.diags.is_empty() {
        cx.check_tails(&defs, entry_name.as_deref());
    }
    match (cx.diags.is_empty(), entry_name) {
        (true, Some(entry)) => Ok(Spec::from_checked(defs, entry)),
        _ => Err(cx.diags),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum DefKind {
    Struct,
    Casetype,
    Enum,
    Unit,
}

struct Checker {
    diags: Vec<Diagnostic>,
    kinds: HashMap<String, DefKind>,
    params: HashMap<String, usize>,
    enum_consts: BTreeMap<String, u64>,
}

/// Names visible to an expression, besides enum constants.
struct Scope<'a> {
    locals: Vec<&'a str>,
}

impl Checker {
    fn err(&mut self, code: Code, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }

    fn collect(&mut self, defs: &[TypeDef]) {
        for def in defs {
            let kind = match def.body {
                TypeBody::Struct(_) => DefKind::Struct,
                TypeBody::Casetype { .. } => DefKind::Casetype,
                TypeBody::Enum { .. } => DefKind::Enum,
                TypeBody::Unit => DefKind::Unit,
            };
            if self.kinds.contains_key(&def.name.name) {
                self.err(
                    Code::Typ003,
                    def.name.span,
                    format!("type `{}` is defined more than once", def.name.name),
                );
                continue;
            }
            self.kinds.insert(def.name.name.clone(), kind);
            self.params.insert(def.name.name.clone(), def.params.len());
            if let TypeBody::Enum {
                underlying,
                constants,
            } = &def.body
            {
                for c in constants {
                    if self.enum_consts.contains_key(&c.name.name) {
                        self.err(
                            Code::Typ003,
                            c.name.span,
                            format!("enum constant `{}` is defined more than once", c.name.name),
                        );
                    } else if c.value > underlying.max_value() {
                        self.err(
                            Code::Typ012,
                            c.name.span,
                            format!(
                                "enum constant `{}` = {} does not fit in {}",
                                c.name.name, c.value, underlying
                            ),
                        );
                    } else {
                        self.enum_consts.insert(c.name.name.clone(), c.value);
                    }
                }
            }
        }
    }

    fn check_def(&mut self, def: &mut TypeDef) {
        let mut seen = HashSet::new();
        for p in &def.params {
            if !seen.insert(p.name.name.clone()) {
                self.err(
                    Code::Typ003,
                    p.name.span,
                    format!("parameter `{}` is declared more than once", p.name.name),
                );
            }
        }
        let param_names: Vec<String> = def.params.iter().map(|p| p.name.name.clone()).collect();
        match &mut def.body {
            TypeBody::Struct(fields) => {
                let mut locals: Vec<String> = param_names.clone();
                for field in fields.iter_mut() {
                    if locals.contains(&field.name.name) {
                        self.err(
                            Code::Typ003,
                            field.name.span,
                            format!("`{}` is already declared in this scope", field.name.name),
                        );
                    }
                    self.check_field(field, &locals);
                    locals.push(field.name.name.clone());
                }
                self.check_bitfield_runs(fields);
            }
            TypeBody::Casetype { scrutinee, cases } => {
                if def.params.is_empty() {
                    self.err(
                        Code::Typ009,
                        def.name.span,
                        "a casetype needs at least one parameter to switch on",
                    );
                }
                for name in scrutinee.identifiers() {
                    if !param_names.iter().any(|p| p == name)
                        && !self.enum_consts.contains_key(name)
                    {
                        self.err(
                            Code::Typ009,
                            scrutinee.span,
                            format!("casetype scrutinee may only refer to parameters, found `{name}`"),
                        );
                    }
                }
                let locals: Vec<&str> = param_names.iter().map(String::as_str).collect();
                if let Some(ty) = self.check_expr(scrutinee, &Scope { locals: locals.clone() }) {
                    self.want(ty, Ty::Int, scrutinee.span, "casetype scrutinee");
                }
                let mut tags = HashSet::new();
                for case in cases.iter_mut() {
                    if !tags.insert(case.tag) {
                        self.err(
                            Code::Typ007,
                            case.span,
                            format!("duplicate case tag {}", case.tag),
                        );
                    }
                    self.check_field(&mut case.field, &param_names);
                    self.check_bitfield_runs(std::slice::from_ref(&case.field));
                }
            }
            TypeBody::Enum { .. } | TypeBody::Unit => {}
        }
    }

    fn want(&mut self, got: Ty, want: Ty, span: Span, what: &str) {
        if got != want {
            self.err(
                Code::Typ006,
                span,
                format!("{what} must be {}, found {}", want.name(), got.name()),
            );
        }
    }

    fn check_field(&mut self, field: &mut FieldDecl, locals: &[String]) {
        let before = Scope {
            locals: locals.iter().map(String::as_str).collect(),
        };
        let fname = field.name.name.clone();
        let mut scalar = true;
        match &mut field.ty {
            TypeRef::Int(_) => {}
            TypeRef::Unit => scalar = false,
            TypeRef::Enum(_) => {}
            TypeRef::Named { name, args } => match self.kinds.get(&name.name).copied() {
                None => {
                    let span = name.span;
                    self.err(Code::Typ001, span, format!("unknown type `{}`", name.name));
                    return;
                }
                Some(DefKind::Enum) => {
                    if !args.is_empty() {
                        let span = name.span;
                        self.err(
                            Code::Typ010,
                            span,
                            format!("enum `{}` takes no arguments", name.name),
                        );
                    }
                    field.ty = TypeRef::Enum(name.clone());
                }
                Some(_) => {
                    scalar = false;
                    let expected = self.params[&name.name];
                    if args.len() != expected {
                        let span = name.span;
                        self.err(
                            Code::Typ010,
                            span,
                            format!(
                                "`{}` expects {} argument(s), found {}",
                                name.name,
                                expected,
                                args.len()
                            ),
                        );
                    }
                    for arg in args.iter() {
                        if let Some(ty) = self.check_expr(arg, &before) {
                            self.want(ty, Ty::Int, arg.span, "type argument");
                        }
                    }
                }
            },
        }
        if let Some(w) = field.bitwidth {
            match field.ty {
                TypeRef::Int(kind) => {
                    if w == 0 || w > kind.bits() {
                        self.err(
                            Code::Typ014,
                            field.span,
                            format!("bit width {w} of `{fname}` must be between 1 and {}", kind.bits()),
                        );
                    }
                }
                _ => self.err(
                    Code::Typ014,
                    field.span,
                    format!("bitfield `{fname}` must have an integer type"),
                ),
            }
            if field.array != ArrayForm::None {
                self.err(
                    Code::Typ014,
                    field.span,
                    format!("`{fname}` cannot be both a bitfield and an array"),
                );
            }
        }
        if field.array != ArrayForm::None && field.ty != TypeRef::Int(IntKind::U8) {
            self.err(
                Code::Typ013,
                field.span,
                format!("array `{fname}` must have element type UINT8"),
            );
        }
        if let ArrayForm::ByteSize(len) = &field.array {
            if let Some(ty) = self.check_expr(len, &before) {
                self.want(ty, Ty::Int, len.span, "array size");
            }
        }
        if let Some(c) = &field.constraint {
            if !scalar {
                self.err(
                    Code::Typ016,
                    c.span,
                    format!("`{fname}` has no scalar value to constrain"),
                );
            } else {
                let mut with_self = before.locals.clone();
                with_self.push(&fname);
                if let Some(ty) = self.check_expr(c, &Scope { locals: with_self }) {
                    self.want(ty, Ty::Bool, c.span, "constraint");
                }
            }
        }
    }

    /// Consecutive bitfields sharing a container type are packed into
    /// containers, each of which must be filled exactly.
    fn check_bitfield_runs(&mut self, fields: &[FieldDecl]) {
        let mut open: Option<(IntKind, u32, Span)> = None;
        for field in fields {
            let bits = match (field.bitwidth, &field.ty) {
                (Some(w), TypeRef::Int(kind)) if w >= 1 && w <= kind.bits() => Some((*kind, w)),
                _ => None,
            };
            match (open, bits) {
                (Some((kind, used, start)), Some((k, w))) if k == kind => {
                    let total = used + w;
                    if total > kind.bits() {
                        self.err(
                            Code::Typ004,
                            start.to(field.span),
                            format!(
                                "bitfield run overflows its {} container ({} of {} bits)",
                                kind,
                                total,
                                kind.bits()
                            ),
                        );
                        open = None;
                    } else if total == kind.bits() {
                        open = None;
                    } else {
                        open = Some((kind, total, start));
                    }
                }
                (prev, next) => {
                    if let Some((kind, used, start)) = prev {
                        self.unfilled(kind, used, start);
                    }
                    open = next.and_then(|(k, w)| {
                        (w < k.bits()).then_some((k, w, field.span))
                    });
                }
            }
        }
        if let Some((kind, used, start)) = open {
            self.unfilled(kind, used, start);
        }
    }

    fn unfilled(&mut self, kind: IntKind, used: u32, start: Span) {
        self.err(
            Code::Typ004,
            start,
            format!(
                "bitfields sum to {} bits but their {} container has {}",
                used,
                kind,
                kind.bits()
            ),
        );
    }

    fn check_expr(&mut self, e: &Expr, scope: &Scope) -> Option<Ty> {
        match &e.kind {
            ExprKind::Int(_) => Some(Ty::Int),
            ExprKind::Ident(name) => {
                if scope.locals.contains(&name.as_str()) || self.enum_consts.contains_key(name) {
                    Some(Ty::Int)
                } else {
                    self.err(Code::Typ002, e.span, format!("unbound identifier `{name}`"));
                    None
                }
            }
            ExprKind::Not(inner) => {
                let ty = self.check_expr(inner, scope)?;
                self.want(ty, Ty::Bool, inner.span, "operand of `!`");
                Some(Ty::Bool)
            }
            ExprKind::Binary(op, l, r) => {
                let lt = self.check_expr(l, scope);
                let rt = self.check_expr(r, scope);
                if matches!(op, BinOp::Shl | BinOp::Shr) {
                    self.check_shift_amount(r, scope);
                }
                let (operand, result) = if op.is_logical() {
                    (Ty::Bool, Ty::Bool)
                } else if op.is_comparison() {
                    (Ty::Int, Ty::Bool)
                } else {
                    (Ty::Int, Ty::Int)
                };
                let what = format!("operand of `{}`", op.symbol());
                let (lt, rt) = (lt?, rt?);
                self.want(lt, operand, l.span, &what);
                self.want(rt, operand, r.span, &what);
                Some(result)
            }
        }
    }

    fn check_shift_amount(&mut self, amount: &Expr, locals: &Scope) {
        let consts = &self.enum_consts;
        let scope = |name: &str| {
            if locals.locals.contains(&name) {
                None
            } else {
                consts.get(name).copied()
            }
        };
        match eval::eval_expr(&scope, amount) {
            Ok(Value::Int(n)) if n <= MAX_SHIFT.into() => {}
            Ok(Value::Int(_)) => self.err(
                Code::Typ015,
                amount.span,
                format!("shift amount exceeds {MAX_SHIFT}"),
            ),
            _ => self.err(
                Code::Typ015,
                amount.span,
                "shift amount must be a constant expression",
            ),
        }
    }

    fn check_cycles(&mut self, defs: &[TypeDef]) {
        let index: HashMap<&str, &TypeDef> =
            defs.iter().map(|d| (d.name.name.as_str(), d)).collect();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&str, u8> = HashMap::new();
        for def in defs {
            let mut stack = vec![];
            self.visit(def, &index, &mut state, &mut stack);
        }
    }

    fn visit<'a>(
        &mut self,
        def: &'a TypeDef,
        index: &HashMap<&str, &'a TypeDef>,
        state: &mut HashMap<&'a str, u8>,
        stack: &mut Vec<&'a str>,
    ) {
        let name = def.name.name.as_str();
        match state.get(name) {
            Some(2) => return,
            Some(1) => {
                let from = stack.iter().position(|n| *n == name).unwrap_or(0);
                let mut cycle: Vec<&str> = stack[from..].to_vec();
                cycle.push(name);
                self.err(
                    Code::Typ005,
                    def.name.span,
                    format!("recursive type definition: {}", cycle.join(" -> ")),
                );
                return;
            }
            _ => {}
        }
        state.insert(name, 1);
        stack.push(name);
        for target in referenced_types(def) {
            if let Some(next) = index.get(target) {
                self.visit(next, index, state, stack);
            }
        }
        stack.pop();
        state.insert(name, 2);
    }

    fn check_entry(&mut self, defs: &[TypeDef], entry: Option<&str>) -> Option<String> {
        let def = match entry {
            Some(name) => match defs.iter().find(|d| d.name.name == name) {
                Some(d) => d,
                None => {
                    let span = defs.last().map(|d| d.name.span).unwrap_or_default();
                    self.err(Code::Typ011, span, format!("entry type `{name}` is not defined"));
                    return None;
                }
            },
            None => defs.last()?,
        };
        if !def.params.is_empty() {
            self.err(
                Code::Typ011,
                def.name.span,
                format!("entry type `{}` must not take parameters", def.name.name),
            );
            return None;
        }
        Some(def.name.name.clone())
    }

    fn check_tails(&mut self, defs: &[TypeDef], entry: Option<&str>) {
        let index: HashMap<&str, &TypeDef> =
            defs.iter().map(|d| (d.name.name.as_str(), d)).collect();
        let mut done: HashSet<(String, bool)> = HashSet::new();
        let mut reported: HashSet<usize> = HashSet::new();
        if let Some(entry) = entry.and_then(|e| index.get(e)) {
            self.tail_walk(entry, true, &index, &mut done, &mut reported);
        }
        for def in defs {
            self.tail_walk(def, true, &index, &mut done, &mut reported);
        }
    }

    fn tail_walk(
        &mut self,
        def: &TypeDef,
        is_tail: bool,
        index: &HashMap<&str, &TypeDef>,
        done: &mut HashSet<(String, bool)>,
        reported: &mut HashSet<usize>,
    ) {
        if !done.insert((def.name.name.clone(), is_tail)) {
            return;
        }
        let fields: Vec<(&FieldDecl, bool)> = match &def.body {
            TypeBody::Struct(fields) => fields
                .iter()
                .enumerate()
                .map(|(i, f)| (f, is_tail && i + 1 == fields.len()))
                .collect(),
            TypeBody::Casetype { cases, .. } => {
                cases.iter().map(|c| (&c.field, is_tail)).collect()
            }
            _ => vec![],
        };
        for (field, tail) in fields {
            if field.array == ArrayForm::ConsumeAll && !tail && reported.insert(field.span.start) {
                self.err(
                    Code::Typ008,
                    field.span,
                    format!(
                        "`{}[:consume-all]` must be the last field on every path of the entry type",
                        field.name.name
                    ),
                );
            }
            if let TypeRef::Named { name, .. } = &field.ty {
                if let Some(next) = index.get(name.name.as_str()) {
                    self.tail_walk(next, tail, index, done, reported);
                }
            }
        }
    }
}

fn referenced_types(def: &TypeDef) -> Vec<&str> {
    let fields: Vec<&FieldDecl> = match &def.body {
        TypeBody::Struct(fields) => fields.iter().collect(),
        TypeBody::Casetype { cases, .. } => cases.iter().map(|c| &c.field).collect(),
        _ => vec![],
    };
    fields
        .into_iter()
        .filter_map(|f| match &f.ty {
            TypeRef::Named { name, .. } | TypeRef::Enum(name) => Some(name.name.as_str()),
            _ => None,
        })
        .collect()
}
