use std::fmt::{self, Write};

use super::*;

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &Term, parent: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match t {
                Term::Const(n) => write!(f, "{n}"),
                Term::Var(v) => write!(f, "{v}"),
                Term::Not(inner) => {
                    f.write_str("!")?;
                    go(inner, u8::MAX, f)
                }
                Term::Bin(op, l, r) => {
                    let p = op.precedence();
                    if p < parent {
                        f.write_str("(")?;
                    }
                    go(l, p, f)?;
                    write!(f, " {} ", op.symbol())?;
                    go(r, p + 1, f)?;
                    if p < parent {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, 0, f)
    }
}

fn tag(branch: &Option<BranchId>) -> String {
    branch.map(|b| format!(" [{b}]")).unwrap_or_default()
}

fn step(out: &mut String, s: &Step, depth: usize) {
    let pad = "  ".repeat(depth);
    let _ = match s {
        Step::ReadInt { dest, kind } => writeln!(out, "{pad}read {dest} {kind}"),
        Step::ReadBits {
            container,
            kind,
            members,
        } => {
            let parts: Vec<String> = members
                .iter()
                .map(|m| format!("{}@{}:{}", m.dest, m.shift, m.width))
                .collect();
            writeln!(out, "{pad}read-bits {container} {kind} -> {}", parts.join(" "))
        }
        Step::Let {
            dest, value, max, ..
        } => writeln!(out, "{pad}let {dest} = {value} (max {max})"),
        Step::CheckConstraint {
            cond,
            kind,
            field,
            branch,
            ..
        } => {
            let what = match kind {
                CheckKind::Constraint => "check",
                CheckKind::EnumMembership => "check-enum",
            };
            writeln!(out, "{pad}{what} {field}: {cond}{}", tag(branch))
        }
        Step::Dispatch {
            scrutinee,
            cases,
            casetype,
            branch,
            ..
        } => {
            let _ = writeln!(out, "{pad}dispatch {casetype} on {scrutinee}{}", tag(branch));
            for c in cases {
                let _ = writeln!(out, "{pad}  case {}:", c.tag);
                for inner in &c.body {
                    step(out, inner, depth + 2);
                }
            }
            Ok(())
        }
        Step::SkipBytes { dest, len, .. } => writeln!(out, "{pad}skip {dest} {len}"),
        Step::ConsumeAll { dest } => writeln!(out, "{pad}consume-all {dest}"),
        Step::Seq(inner) => {
            for s in inner {
                step(out, s, depth);
            }
            Ok(())
        }
    };
}

pub(super) fn dump(p: &FirstOrderProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program {}", p.name);
    out.push_str("vars\n");
    for (i, v) in p.vars.iter().enumerate() {
        let role = match v.role {
            VarRole::Field => "field",
            VarRole::Param => "param",
            VarRole::Hidden => "hidden",
        };
        let _ = writeln!(out, "  {} {} {role}", VarId(i), v.path);
    }
    out.push_str("steps\n");
    step(&mut out, &p.root, 1);
    out.push_str("branches\n");
    for b in &p.branches {
        let _ = writeln!(
            out,
            "  {} {} {} arity={} at {}:{}",
            b.id, b.kind, b.label, b.arity, b.span.start_line, b.span.start_col
        );
    }
    out
}
