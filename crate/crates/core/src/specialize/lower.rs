use super::*;
use crate::ast::{
    field_groups, ArrayForm, Expr, ExprKind, FieldDecl, FieldGroup, TypeBody, TypeDef, TypeRef,
};
use crate::eval::{self, Value};

pub(super) fn lower(spec: &Spec) -> FirstOrderProgram {
    let mut cx = Lowerer {
        spec,
        vars: Vec::new(),
    };
    let entry = spec.entry();
    let mut steps = Vec::new();
    match &entry.body {
        TypeBody::Enum { .. } => {
            // An entry-level enum has no field name; report it under the type.
            cx.lower_enum_read(entry, &entry.name.name, "", VarRole::Hidden, &mut steps);
        }
        _ => cx.lower_def(entry, Vec::new(), "", &mut steps),
    }
    FirstOrderProgram {
        name: entry.name.name.clone(),
        root: Step::Seq(steps),
        vars: cx.vars,
        branches: Vec::new(),
    }
}

struct Lowerer<'s> {
    spec: &'s Spec,
    vars: Vec<VarInfo>,
}

type Locals = Vec<(String, VarId)>;

impl Lowerer<'_> {
    fn fresh(&mut self, name: &str, prefix: &str, role: VarRole) -> VarId {
        self.vars.push(VarInfo {
            name: name.to_string(),
            path: format!("{prefix}{name}"),
            role,
        });
        VarId(self.vars.len() - 1)
    }

    fn term(&self, e: &Expr, locals: &Locals) -> Term {
        match &e.kind {
            ExprKind::Int(n) => Term::Const(*n),
            ExprKind::Ident(name) => match locals.iter().rev().find(|(n, _)| n == name) {
                Some((_, v)) => Term::Var(*v),
                None => Term::Const(
                    self.spec
                        .enum_constant(name)
                        .expect("checked spec has no unbound identifiers"),
                ),
            },
            ExprKind::Not(inner) => Term::Not(Box::new(self.term(inner, locals))),
            ExprKind::Binary(op, l, r) => {
                let rhs = if matches!(op, BinOp::Shl | BinOp::Shr) {
                    Term::Const(self.fold(r))
                } else {
                    self.term(r, locals)
                };
                Term::bin(*op, self.term(l, locals), rhs)
            }
        }
    }

    fn fold(&self, e: &Expr) -> u64 {
        let scope = |name: &str| self.spec.enum_constant(name);
        match eval::eval_expr(&scope, e) {
            Ok(Value::Int(n)) => n.try_into().expect("checked shift amount"),
            _ => unreachable!("checked shift amount is constant"),
        }
    }

    fn lower_def(&mut self, def: &TypeDef, mut locals: Locals, prefix: &str, out: &mut Vec<Step>) {
        match &def.body {
            TypeBody::Struct(fields) => {
                for group in field_groups(fields) {
                    match group {
                        FieldGroup::Single(i) => self.lower_field(&fields[i], &mut locals, prefix, out),
                        FieldGroup::Bits { kind, members } => {
                            let first = &fields[members[0].0].name.name;
                            let container =
                                self.fresh(&format!("{first}$bits"), prefix, VarRole::Hidden);
                            let mut bits = Vec::new();
                            for &(i, shift, width) in &members {
                                let f = &fields[i];
                                let dest = self.fresh(&f.name.name, prefix, VarRole::Field);
                                locals.push((f.name.name.clone(), dest));
                                bits.push(BitMember { dest, shift, width });
                            }
                            out.push(Step::ReadBits {
                                container,
                                kind,
                                members: bits,
                            });
                            for &(i, _, _) in &members {
                                self.lower_constraint(&fields[i], &locals, out);
                            }
                        }
                    }
                }
            }
            TypeBody::Casetype { scrutinee, cases } => {
                let scrutinee = self.term(scrutinee, &locals);
                let mut lowered = Vec::with_capacity(cases.len());
                for case in cases {
                    let mut body = Vec::new();
                    let mut inner = locals.clone();
                    self.lower_field(&case.field, &mut inner, prefix, &mut body);
                    lowered.push(Case {
                        tag: case.tag,
                        body,
                    });
                }
                out.push(Step::Dispatch {
                    scrutinee,
                    cases: lowered,
                    casetype: def.name.name.clone(),
                    branch: None,
                    span: def.span,
                });
            }
            TypeBody::Enum { .. } => unreachable!("enum types are read through their fields"),
            TypeBody::Unit => {}
        }
    }

    fn lower_constraint(&mut self, field: &FieldDecl, locals: &Locals, out: &mut Vec<Step>) {
        if let Some(c) = &field.constraint {
            out.push(Step::CheckConstraint {
                cond: self.term(c, locals),
                kind: CheckKind::Constraint,
                field: field.name.name.clone(),
                branch: None,
                span: c.span,
            });
        }
    }

    /// Reads an enum-typed value and checks membership. Returns the variable.
    fn lower_enum_read(
        &mut self,
        def: &TypeDef,
        name: &str,
        prefix: &str,
        role: VarRole,
        out: &mut Vec<Step>,
    ) -> VarId {
        let TypeBody::Enum {
            underlying,
            constants,
        } = &def.body
        else {
            unreachable!("checked enum reference");
        };
        let dest = self.fresh(name, prefix, role);
        out.push(Step::ReadInt {
            dest,
            kind: *underlying,
        });
        let cond = constants
            .iter()
            .map(|c| Term::bin(BinOp::Eq, Term::Var(dest), Term::Const(c.value)))
            .reduce(|a, b| Term::bin(BinOp::Or, a, b))
            .unwrap_or_else(|| Term::bin(BinOp::Ne, Term::Var(dest), Term::Var(dest)));
        out.push(Step::CheckConstraint {
            cond,
            kind: CheckKind::EnumMembership,
            field: name.to_string(),
            branch: None,
            span: def.span,
        });
        dest
    }

    fn lower_field(
        &mut self,
        field: &FieldDecl,
        locals: &mut Locals,
        prefix: &str,
        out: &mut Vec<Step>,
    ) {
        let name = &field.name.name;
        match (&field.ty, &field.array) {
            (TypeRef::Int(kind), ArrayForm::None) => {
                let dest = self.fresh(name, prefix, VarRole::Field);
                out.push(Step::ReadInt { dest, kind: *kind });
                locals.push((name.clone(), dest));
            }
            (TypeRef::Int(_), ArrayForm::ConsumeAll) => {
                let dest = self.fresh(name, prefix, VarRole::Field);
                out.push(Step::ConsumeAll { dest });
                locals.push((name.clone(), dest));
            }
            (TypeRef::Int(_), array) => {
                let len = match array {
                    ArrayForm::FixedBytes(n) => Term::Const(*n),
                    ArrayForm::ByteSize(e) => self.term(e, locals),
                    _ => unreachable!(),
                };
                let dest = self.fresh(name, prefix, VarRole::Field);
                out.push(Step::SkipBytes {
                    dest,
                    len,
                    field: name.clone(),
                });
                locals.push((name.clone(), dest));
            }
            (TypeRef::Enum(enum_name), _) => {
                let def = self.spec.get(&enum_name.name).expect("checked reference");
                let dest = self.lower_enum_read(def, name, prefix, VarRole::Field, out);
                locals.push((name.clone(), dest));
            }
            (TypeRef::Named { name: tname, args }, _) => {
                let def = self.spec.get(&tname.name).expect("checked reference");
                let nested = format!("{prefix}{name}.");
                let mut inner = Locals::new();
                for (arg, param) in args.iter().zip(&def.params) {
                    let value = self.term(arg, locals);
                    let dest = self.fresh(&param.name.name, &nested, VarRole::Param);
                    out.push(Step::Let {
                        dest,
                        value,
                        max: param.kind.max_value(),
                        field: name.clone(),
                    });
                    inner.push((param.name.name.clone(), dest));
                }
                self.lower_def(def, inner, &nested, out);
                return;
            }
            (TypeRef::Unit, _) => return,
        }
        self.lower_constraint(field, locals, out);
    }
}
