use super::*;
use crate::ast::*;
use crate::samples;

fn codes(text: &str) -> Vec<&'static str> {
    match check(text) {
        Ok(_) => vec![],
        Err(diags) => diags.iter().map(|d| d.code.as_str()).collect(),
    }
}

fn struct_fields(def: &TypeDef) -> &[FieldDecl] {
    match &def.body {
        TypeBody::Struct(f) => f,
        _ => panic!("not a struct"),
    }
}

/// Post-hoc check of the invariants every checked spec must satisfy.
fn assert_invariants(spec: &Spec) {
    assert!(spec.entry().params.is_empty());
    for def in spec.defs() {
        let fields: Vec<&FieldDecl> = match &def.body {
            TypeBody::Struct(f) => f.iter().collect(),
            TypeBody::Casetype { cases, .. } => {
                let mut tags: Vec<u64> = cases.iter().map(|c| c.tag).collect();
                tags.sort_unstable();
                tags.dedup();
                assert_eq!(tags.len(), cases.len(), "case tags distinct");
                cases.iter().map(|c| &c.field).collect()
            }
            TypeBody::Enum {
                underlying,
                constants,
            } => {
                assert!(constants.iter().all(|c| c.value <= underlying.max_value()));
                vec![]
            }
            TypeBody::Unit => vec![],
        };
        for f in fields {
            if let (Some(w), TypeRef::Int(k)) = (f.bitwidth, &f.ty) {
                assert!(w >= 1 && w <= k.bits());
            }
            if f.array != ArrayForm::None {
                assert_eq!(f.ty, TypeRef::Int(IntKind::U8));
            }
            match &f.ty {
                TypeRef::Named { name, .. } => {
                    let target = spec.get(&name.name).expect("reference resolves");
                    assert!(!matches!(target.body, TypeBody::Enum { .. }));
                }
                TypeRef::Enum(name) => {
                    assert!(matches!(
                        spec.get(&name.name).unwrap().body,
                        TypeBody::Enum { .. }
                    ));
                }
                _ => {}
            }
        }
    }
}

#[test]
fn message_parses_to_one_struct() {
    let ast = parse_spec(samples::MESSAGE).unwrap();
    assert_eq!(ast.defs.len(), 1);
    let fields = struct_fields(&ast.defs[0]);
    assert_eq!(fields.len(), 2);
    assert_eq!(fields.iter().filter(|f| f.constraint.is_some()).count(), 1);
    assert_eq!(fields[0].constraint.as_ref().unwrap().to_string(), "first > 42");
    assert_eq!(ast.defs[0].tag.as_ref().unwrap().name, "_message");
}

#[test]
fn empty_input_expects_typedef() {
    let diags = parse_spec("").unwrap_err();
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].code, Code::Syn001);
    assert_eq!(diags[0].message, "expected typedef");
    assert_eq!(codes("   // only a comment\n"), vec!["SYN001"]);
}

#[test]
fn option_parses_structs_and_casetype() {
    let ast = parse_spec(samples::OPTION).unwrap();
    let kinds: Vec<&str> = ast.defs.iter().map(TypeDef::kind_name).collect();
    assert_eq!(kinds, vec!["struct", "casetype", "struct"]);
    let spec = check(samples::OPTION).unwrap();
    assert_eq!(spec.entry_name(), "OPTION");
}

#[test]
fn all_samples_check_and_satisfy_invariants() {
    for (name, text) in samples::ALL {
        let spec = check(text).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        assert_invariants(&spec);
    }
    assert_invariants(&check(&samples::constraint_chain(100)).unwrap());
}

#[test]
fn enum_reference_resolves() {
    let spec = check(samples::TLV).unwrap();
    let fields = struct_fields(spec.entry());
    assert!(matches!(&fields[2].ty, TypeRef::Enum(n) if n.name == "TlvType"));
    assert_eq!(spec.enum_constant("Long"), Some(2));
}

#[test]
fn bitfields_must_fill_container() {
    let text = "typedef struct _s { UINT16BE a:3; UINT16BE b:5; } s;";
    assert_eq!(codes(text), vec!["TYP004"]);
    let ok = "typedef struct _s { UINT16BE a:3; UINT16BE b:13; UINT8 c:8; } s;";
    assert_eq!(codes(ok), Vec::<&str>::new());
    // Two back-to-back containers of the same type.
    let two = "typedef struct _s { UINT8 a:4; UINT8 b:4; UINT8 c:2; UINT8 d:6; } s;";
    assert_eq!(codes(two), Vec::<&str>::new());
    let overflow = "typedef struct _s { UINT8 a:4; UINT8 b:5; } s;";
    assert_eq!(codes(overflow), vec!["TYP004"]);
    let mixed = "typedef struct _s { UINT8 a:4; UINT16BE b:12; } s;";
    assert_eq!(codes(mixed), vec!["TYP004", "TYP004"]);
    assert_eq!(codes("typedef struct _s { UINT8 a:9; } s;"), vec!["TYP014"]);
    assert_eq!(codes("typedef struct _s { UINT8 a:0; } s;"), vec!["TYP014"]);
}

#[test]
fn dangling_type_reference() {
    let text = "casetype _C(UINT8 k) { switch (k) { case 1: FOO f; } } C;\n\
                typedef struct _T { UINT8 k; C(k) c; } T;";
    let diags = check(text).unwrap_err();
    assert_eq!(diags[0].code, Code::Typ001);
    assert_eq!((diags[0].span.start_line, diags[0].span.start_col), (1, 45));
}

#[test]
fn dangling_operator_is_a_syntax_error() {
    let text = samples::OPTION.replace("Kind == 0x00 ||", "Kind == 0x00 |\n|");
    let diags = check(&text).unwrap_err();
    assert!(diags[0].code.is_syntax());
    let text = "typedef struct _m { UINT8 Kind { Kind == 0x00 | }; } m;";
    assert_eq!(codes(text), vec!["SYN002"]);
}

#[test]
fn reserved_keyword_as_identifier() {
    let vxlan = "typedef struct _VXLAN {\n  UINT8 flags;\n  UINT8 type;\n  UINT8 vni[3];\n} VXLAN;";
    let diags = check(vxlan).unwrap_err();
    assert_eq!(diags[0].code, Code::Syn004);
    assert_eq!(diags[0].span.start_line, 3);
    assert_eq!(codes("typedef struct _s { UINT8 UINT16; } s;"), vec!["SYN004"]);
    assert_eq!(codes("typedef struct _s { UINT8 case; } s;"), vec!["SYN004"]);
}

#[test]
fn unterminated_constraint() {
    assert_eq!(codes("typedef struct _s { UINT8 a { a > 1"), vec!["SYN003"]);
    assert_eq!(codes("typedef struct _s { UINT8 a;"), vec!["SYN003"]);
}

#[test]
fn type_errors_have_stable_codes() {
    let cases: &[(&str, &str)] = &[
        ("typedef struct _s { UINT8 a { b > 1 }; } s;", "TYP002"),
        ("typedef struct _s { UINT8 a; } s; typedef struct _t { UINT8 a; } s;", "TYP003"),
        ("typedef struct _s { UINT8 a; UINT8 a; } s;", "TYP003"),
        (
            "typedef struct _a { b x; } a; typedef struct _b { a y; } b;",
            "TYP005",
        ),
        ("typedef struct _s { UINT8 a { a + 1 }; } s;", "TYP006"),
        ("typedef struct _s { UINT8 a { a > 1 }; UINT8 b[:byte-size a > 1]; } s;", "TYP006"),
        (
            "casetype _C(UINT8 k) { switch (k) { case 1: UINT8 x; case 1: UINT8 y; } } C;\n\
             typedef struct _s { UINT8 k; C(k) c; } s;",
            "TYP007",
        ),
        ("typedef struct _s { UINT8 r[:consume-all]; UINT8 a; } s;", "TYP008"),
        (
            "typedef struct _i { UINT8 r[:consume-all]; } i;\n\
             typedef struct _s { i inner; UINT8 a; } s;",
            "TYP008",
        ),
        (
            "typedef struct _s(UINT8 p) { UINT8 a; } s;\n\
             typedef struct _t { UINT8 k; s x; } t;",
            "TYP010",
        ),
        ("typedef struct _s(UINT8 p) { UINT8 a; } s;", "TYP011"),
        ("UINT8 enum _E { A = 256 } E; typedef struct _s { E e; } s;", "TYP012"),
        ("typedef struct _s { UINT16BE a[4]; } s;", "TYP013"),
        ("typedef struct _s { UINT8 a; UINT8 b { (b << a) > 1 }; } s;", "TYP015"),
        ("typedef struct _s { UINT8 a { (a << 1000) > 1 }; } s;", "TYP015"),
        (
            "typedef struct _i { UINT8 a; } i;\n\
             typedef struct _s { i x { x > 1 }; } s;",
            "TYP016",
        ),
    ];
    for (text, code) in cases {
        assert_eq!(codes(text), vec![*code], "{text}");
    }
}

#[test]
fn scrutinee_must_refer_to_params() {
    let text = "casetype _C(UINT8 k) { switch (j) { case 1: UINT8 x; } } C;\n\
                typedef struct _s { UINT8 k; C(k) c; } s;";
    let got = codes(text);
    assert!(got.contains(&"TYP009"), "{got:?}");
}

#[test]
fn consume_all_in_tail_of_nested_struct_is_fine() {
    let text = "typedef struct _i { UINT8 n; UINT8 r[:consume-all]; } i;\n\
                typedef struct _s { UINT8 a; i inner; } s;";
    assert_eq!(codes(text), Vec::<&str>::new());
}

#[test]
fn entry_override() {
    let spec = check_with_entry(samples::OPTION, Some("MAX_SEG_SIZE")).unwrap();
    assert_eq!(spec.entry_name(), "MAX_SEG_SIZE");
    let diags = check_with_entry(samples::OPTION, Some("OPTION_OF_KIND")).unwrap_err();
    assert_eq!(diags[0].code, Code::Typ011);
    let diags = check_with_entry(samples::OPTION, Some("NOPE")).unwrap_err();
    assert_eq!(diags[0].code, Code::Typ011);
}

#[test]
fn enum_forms() {
    let text = "UINT16BE enum Colors { Red = 1, Green, Blue = 7, };\n\
                typedef struct _s { Colors c { c != Green }; } s;";
    let spec = check(text).unwrap();
    assert_eq!(spec.enum_constant("Green"), Some(2));
    assert_eq!(spec.enum_constant("Blue"), Some(7));
    let text = "typedef UINT8 enum _E { A = 1 } E;\ntypedef struct _s { E e; } s;";
    check(text).unwrap();
}

#[test]
fn check_is_deterministic() {
    let bad = "typedef struct _s { UINT8 a { b > 1 }; UINT16BE c:3; UINT8 d[:byte-size zz]; } s;";
    let first = check(bad).unwrap_err();
    for _ in 0..5 {
        assert_eq!(check(bad).unwrap_err(), first);
    }
    assert!(first.len() >= 3);
}

#[test]
fn pretty_round_trip() {
    let mut texts: Vec<String> = samples::ALL.iter().map(|(_, t)| t.to_string()).collect();
    texts.push(samples::constraint_chain(5));
    texts.push(
        "typedef unit Nothing;\n\
         UINT32 enum E { A, B };\n\
         typedef struct _s { UINT8 a { !(a > 1) && (a - 1) * 2 <= a << 2 }; \
         UINT8 d[2]; Nothing n; E e; UINT64BE w { w != 0 || a == A }; } s;"
            .to_string(),
    );
    for text in texts {
        let spec = check(&text).unwrap();
        let printed = pretty(&spec);
        let again = check(&printed).unwrap_or_else(|d| panic!("{printed}\n{d:?}"));
        assert_eq!(again.erase_spans(), spec.erase_spans(), "{printed}");
        assert_eq!(pretty(&again), printed);
    }
}

#[test]
fn expression_precedence() {
    let e = parse_expr("a || b && c == 1 + 2 * 3").unwrap();
    assert_eq!(e.to_string(), "a || b && c == 1 + 2 * 3");
    let e = parse_expr("(a || b) && c").unwrap();
    assert_eq!(e.to_string(), "(a || b) && c");
    let e = parse_expr("a & 0xF0 >> 4").unwrap();
    match e.kind {
        ExprKind::Binary(BinOp::BitAnd, _, r) => {
            assert!(matches!(r.kind, ExprKind::Binary(BinOp::Shr, _, _)))
        }
        other => panic!("{other:?}"),
    }
    assert!(parse_expr("a b").is_err());
}

#[test]
fn spans_point_into_source() {
    let diags = check("typedef struct _s {\n  UINT8 a { zz > 1 };\n} s;").unwrap_err();
    let d = &diags[0];
    assert_eq!(d.code, Code::Typ002);
    assert_eq!((d.span.start_line, d.span.start_col), (2, 13));
    assert_eq!(&"typedef struct _s {\n  UINT8 a { zz > 1 };\n} s;"[d.span.start..d.span.end], "zz");
    assert_eq!(d.render("x.3d"), "x.3d:2:13: TYP002 unbound identifier `zz`");
}
