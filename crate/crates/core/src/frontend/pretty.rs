use std::fmt::Write;

use crate::ast::*;

/// Renders a spec as source text that checks back to the same spec.
pub fn pretty(spec: &Spec) -> String {
    let mut out = String::new();
    for (i, def) in spec.defs().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_def(&mut out, def);
    }
    out
}

fn write_params(out: &mut String, params: &[Param]) {
    if params.is_empty() {
        return;
    }
    let list: Vec<String> = params
        .iter()
        .map(|p| format!("{} {}", p.kind, p.name.name))
        .collect();
    let _ = write!(out, "({})", list.join(", "));
}

fn write_def(out: &mut String, def: &TypeDef) {
    let name = &def.name.name;
    match &def.body {
        TypeBody::Struct(fields) => {
            out.push_str("typedef struct");
            if let Some(tag) = &def.tag {
                let _ = write!(out, " {}", tag.name);
                write_params(out, &def.params);
            }
            out.push_str(" {\n");
            for f in fields {
                out.push_str("    ");
                write_field(out, f);
                out.push('\n');
            }
            let _ = writeln!(out, "}} {name};");
        }
        TypeBody::Casetype { scrutinee, cases } => {
            let tag = def.tag.as_ref().map_or(name.as_str(), |t| t.name.as_str());
            let _ = write!(out, "casetype {tag}");
            write_params(out, &def.params);
            let _ = writeln!(out, " {{\n    switch ({scrutinee}) {{");
            for case in cases {
                let _ = write!(out, "        case {}: ", case.tag);
                write_field(out, &case.field);
                out.push('\n');
            }
            let _ = writeln!(out, "    }}\n}} {name};");
        }
        TypeBody::Enum {
            underlying,
            constants,
        } => {
            let head = def.tag.as_ref().map_or(name.as_str(), |t| t.name.as_str());
            let _ = writeln!(out, "{underlying} enum {head} {{");
            let list: Vec<String> = constants
                .iter()
                .map(|c| format!("    {} = {}", c.name.name, c.value))
                .collect();
            out.push_str(&list.join(",\n"));
            out.push_str("\n}");
            if def.tag.is_some() {
                let _ = write!(out, " {name}");
            }
            out.push_str(";\n");
        }
        TypeBody::Unit => {
            let _ = writeln!(out, "typedef unit {name};");
        }
    }
}

fn write_field(out: &mut String, f: &FieldDecl) {
    match &f.ty {
        TypeRef::Int(kind) => out.push_str(&kind.keyword()),
        TypeRef::Unit => out.push_str("unit"),
        TypeRef::Enum(name) => out.push_str(&name.name),
        TypeRef::Named { name, args } => {
            out.push_str(&name.name);
            if !args.is_empty() {
                let list: Vec<String> = args.iter().map(ToString::to_string).collect();
                let _ = write!(out, "({})", list.join(", "));
            }
        }
    }
    let _ = write!(out, " {}", f.name.name);
    if let Some(w) = f.bitwidth {
        let _ = write!(out, ":{w}");
    }
    match &f.array {
        ArrayForm::None => {}
        ArrayForm::FixedBytes(n) => {
            let _ = write!(out, "[{n}]");
        }
        ArrayForm::ByteSize(e) => {
            let _ = write!(out, "[:byte-size {e}]");
        }
        ArrayForm::ConsumeAll => out.push_str("[:consume-all]"),
    }
    if let Some(c) = &f.constraint {
        let _ = write!(out, " {{ {c} }}");
    }
    out.push(';');
}
