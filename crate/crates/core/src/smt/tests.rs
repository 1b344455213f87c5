use super::*;
use crate::frontend::check;
use crate::interp::{validate, AcceptMode};
use crate::samples;
use crate::solver::{SolverConfig, SolverVerdict};
use crate::specialize::{instrument, replay, specialize, FirstOrderProgram, InstrumentPolicy};

fn program(text: &str) -> FirstOrderProgram {
    specialize(&check(text).unwrap())
}

fn squash(text: &str) -> String {
    let no_comments: Vec<&str> = text.lines().map(|l| l.split(";;").next().unwrap()).collect();
    no_comments.join(" ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn solver() -> SolverConfig {
    SolverConfig::from_env().unwrap()
}

#[test]
fn prelude_has_byte_range_and_state() {
    let p = emit_prelude(false);
    assert!(p.contains(
        "(declare-fun Input (Int) Int)\n(assert (forall ((i Int))\n                (and (<= 0 (Input i)) (< (Input i) 256))))\n"
    ));
    for accessor in [
        "remaining-input-size",
        "current-pos",
        "has-failed",
        "return-value",
        "branch-index",
    ] {
        assert!(p.contains(&format!("({accessor} ")), "{accessor}");
    }
    assert!(p.contains("(define-fun success-state"));
    assert!(p.contains("(define-fun fail-state"));
    assert!(!p.contains("branch-trace"));
    assert!(emit_prelude(true).contains("(declare-fun branch-trace (Int) Int)"));
}

#[test]
fn parse_uint8_matches_reference_shape() {
    let p = squash(&emit_prelude(false));
    let expected = squash(
        "(define-fun parse-uint8 ((s0 State)) State
          (if (and (not (has-failed s0))
                   (> (remaining-input-size s0) 0))
              (success-state
                (Input (current-pos s0))
                (incr (current-pos s0))
                (decr (remaining-input-size s0))
                (branch-index s0))
              (fail-state s0)))",
    );
    assert!(p.contains(&expected), "{p}");
}

#[test]
fn multi_byte_readers_compose_per_endianness() {
    let p = squash(&emit_prelude(false));
    assert!(p.contains(
        "(define-fun parse-uint16be ((s0 State)) State (if (and (not (has-failed s0)) (>= (remaining-input-size s0) 2)) (success-state (+ (* 256 (Input (current-pos s0))) (Input (+ (current-pos s0) 1)))"
    ));
    assert!(p.contains(
        "(define-fun parse-uint16 ((s0 State)) State (if (and (not (has-failed s0)) (>= (remaining-input-size s0) 2)) (success-state (+ (* 256 (Input (+ (current-pos s0) 1))) (Input (current-pos s0)))"
    ));
}

#[test]
fn message_encoding_is_the_reference_let_chain() {
    let p = program(samples::MESSAGE);
    let name = function_name(&p, false);
    assert!(name.starts_with("parse-message-") && name.len() == "parse-message-".len() + 8);
    let got = encode_program(&p, "parse-message", false);
    let expected = "\
(define-fun parse-message ((s0 State)) State
  (let ((s1 (parse-uint8 s0)))
    (if (has-failed s1) s1
      (if (> (return-value s1) 42)
          (parse-uint8 s1)
          (fail-state s1)))))
";
    assert_eq!(got, expected);
}

#[test]
fn instrumented_message_guards_both_arms() {
    let p = program(samples::MESSAGE);
    let got = squash(&encode_program(&p, "parse-message", true));
    let expected = squash(
        "(define-fun parse-message ((s0 State)) State
          (let ((s1 (parse-uint8 s0)))
            (if (has-failed s1) s1
              (if (and (> (return-value s1) 42)
                       (= 0 (branch-trace (branch-index s1))))
                  (parse-uint8 (incr-branch-index s1))
                  (if (and (not (> (return-value s1) 42))
                           (= 1 (branch-trace (branch-index s1))))",
    );
    assert!(got.starts_with(&expected), "{got}");
    assert!(got.contains("(fail-state (incr-branch-index s1)) (mismatch-state s1)"));
}

#[test]
fn unit_program_returns_its_state() {
    let p = program("typedef unit Nothing;");
    assert_eq!(
        encode_program(&p, "parse-Nothing", false),
        "(define-fun parse-Nothing ((s0 State)) State\n  s0)\n"
    );
}

#[test]
fn function_names_separate_programs() {
    let a = program(samples::MESSAGE);
    let b = program(samples::MESSAGE_RENAMED);
    assert_ne!(function_name(&a, false), function_name(&b, false));
    assert_eq!(function_name(&a, false), function_name(&program(samples::MESSAGE), false));
    assert_ne!(function_name(&a, false), function_name(&a, true));
}

#[test]
fn positive_query_has_reference_assertions() {
    let p = program(samples::MESSAGE);
    let f = function_name(&p, false);
    let q = build_query(&QuerySpec::new(QueryKind::Positive, AcceptMode::Prefix), &p);
    let text = squash(&q.text);
    assert!(text.starts_with("(set-option :produce-models true)"));
    assert!(text.contains("(declare-fun init () State)"));
    assert!(text.contains("(assert (and (not (has-failed init)) (= 0 (current-pos init))))"));
    assert!(text.contains(&format!("(assert (not (has-failed ({f} init))))")));
    assert!(!text.contains(&format!("(assert (= (remaining-input-size ({f} init)) 0))")));
    assert!(text.ends_with("(check-sat)"));
    let shown = q.render();
    assert!(shown.contains("(eval (remaining-input-size init))"));
    assert!(shown.contains("(eval (Input 0))"));

    let strict = build_query(&QuerySpec::new(QueryKind::Positive, AcceptMode::Strict), &p);
    assert!(strict
        .text
        .contains(&format!("(assert (= (remaining-input-size ({f} init)) 0))")));
}

#[test]
fn negative_and_trace_assertions() {
    let p = program(samples::MESSAGE);
    let f = function_name(&p, false);
    let q = build_query(&QuerySpec::new(QueryKind::Negative, AcceptMode::Prefix), &p);
    assert!(q.text.contains(&format!("(assert (has-failed ({f} init)))")));

    let fi = function_name(&p, true);
    let q = build_query(
        &QuerySpec::new(QueryKind::Positive, AcceptMode::Prefix).with_prefix(&[0]),
        &p,
    );
    assert!(q.text.contains("(assert (= (branch-index init) 0))"));
    assert!(q.text.contains("(assert (= (branch-trace 0) 0))"));
    assert!(q.text.contains(&format!("(assert (>= (branch-index ({fi} init)) 1))")));
    assert!(q.text.contains("(declare-fun branch-trace (Int) Int)"));
}

#[test]
fn diff_query_shares_input_and_init() {
    let a = program(samples::MESSAGE_UNCONSTRAINED);
    let b = program(samples::MESSAGE);
    let q = build_query(
        &QuerySpec::new(QueryKind::DiffLeftNotRight(&b), AcceptMode::Strict),
        &a,
    );
    assert_eq!(q.text.matches("(declare-fun init () State)").count(), 1);
    assert_eq!(q.text.matches("(declare-fun Input (Int) Int)").count(), 1);
    assert_eq!(q.text.matches("(define-fun parse-message-").count(), 2);
    // The same program on both sides is encoded once.
    let q = build_query(
        &QuerySpec::new(QueryKind::DiffLeftNotRight(&b), AcceptMode::Strict),
        &b,
    );
    assert_eq!(q.text.matches("(define-fun parse-message-").count(), 1);
}

#[test]
fn model_parsing() {
    let plan = EvalPlan::default();
    let t = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    assert_eq!(parse_model(&t(&["sat", "2", "43", "0"]), &plan), Ok(vec![0x2B, 0x00]));
    assert_eq!(parse_model(&t(&["sat", "0"]), &plan), Ok(vec![]));
    assert!(matches!(
        parse_model(&t(&["sat", "2", "43", "256"]), &plan),
        Err(ModelError::ModelValueOutOfRange { .. })
    ));
    assert!(matches!(
        parse_model(&t(&["sat", "(- 1)"]), &plan),
        Err(ModelError::ModelValueOutOfRange { .. })
    ));
    assert!(matches!(
        parse_model(&t(&["sat", "2", "43"]), &plan),
        Err(ModelError::MalformedSolverOutput(_))
    ));
    assert!(matches!(
        parse_model(&t(&["unsat"]), &plan),
        Err(ModelError::MalformedSolverOutput(_))
    ));
    assert!(matches!(
        parse_model(&t(&["sat", "5000"]), &plan),
        Err(ModelError::ModelTooLarge { .. })
    ));
    let gv = EvalPlan {
        dialect: Dialect::GetValue,
        max_packet: 16,
    };
    assert_eq!(
        parse_model(
            &t(&["sat", "(((remaining-input-size init) 1))", "(((Input 0) 7))"]),
            &gv
        ),
        Ok(vec![7])
    );
    assert_eq!(gv.byte_command(3), "(get-value ((Input 3)))");
    assert_eq!(parse_value("(- 12)", Dialect::Eval), Ok(-12));
}

// The tests below run the configured solver.

#[test]
fn prelude_alone_is_satisfiable() {
    let mut text = String::from("(set-logic ALL)\n");
    text.push_str(&emit_prelude(true));
    text.push_str("(declare-fun init () State)\n(check-sat)\n");
    let script = SmtScript {
        text,
        plan: EvalPlan {
            dialect: Dialect::Eval,
            max_packet: 0,
        },
    };
    assert!(matches!(solver().run(&script), SolverVerdict::Sat(_)));
}

fn grid(alphabet: &[u8], max: usize) -> Vec<Vec<u8>> {
    let mut all = vec![vec![]];
    let mut layer: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|p| {
                alphabet.iter().map(move |&b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .collect();
        all.extend(layer.iter().cloned());
    }
    all
}

#[test]
fn fixed_input_queries_agree_with_interpreter() {
    let inputs = grid(&[0x00, 0x02, 0x2B, 0xFF], 2);
    let cfg = solver();
    for (name, text) in samples::ALL {
        let spec = check(text).unwrap();
        let p = specialize(&spec);
        let scripts: Vec<SmtScript> = inputs
            .iter()
            .map(|input| {
                let mut q = QuerySpec::new(QueryKind::Positive, AcceptMode::Strict);
                q.fixed_input = Some(input.clone());
                build_query(&q, &p)
            })
            .collect();
        for (input, verdict) in inputs.iter().zip(cfg.run_many(&scripts)) {
            let want = validate(&spec, input, AcceptMode::Strict).accepted;
            let got = match &verdict {
                SolverVerdict::Sat(_) => true,
                SolverVerdict::Unsat => false,
                other => panic!("{name} {input:02x?}: {other:?}"),
            };
            assert_eq!(got, want, "{name} {input:02x?}");
        }
    }
}

#[test]
fn tlv_fixed_inputs_agree() {
    let spec = check(samples::TLV).unwrap();
    let p = specialize(&spec);
    let cases: Vec<Vec<u8>> = vec![
        vec![0x23, 0x01, 0x02, 0xAA, 0xBB, 0x01],
        vec![0x43, 0x00, 0x00],
        vec![0x30, 0x00, 0x00],
        vec![0x20, 0x09, 0x00],
        vec![0x20, 0x02, 0x00, 0x00, 0x01],
        vec![0x20, 0x02, 0x00, 0x00, 0x03, 0xFF],
        vec![0x20, 0x02, 0x00, 0x00, 0x03],
        vec![0x20, 0x01, 0x05],
        vec![0x20, 0x00, 0x07, 0x01],
    ];
    let cfg = solver();
    for mode in [AcceptMode::Strict, AcceptMode::Prefix] {
        let scripts: Vec<SmtScript> = cases
            .iter()
            .map(|input| {
                let mut q = QuerySpec::new(QueryKind::Positive, mode);
                q.fixed_input = Some(input.clone());
                build_query(&q, &p)
            })
            .collect();
        for (input, verdict) in cases.iter().zip(cfg.run_many(&scripts)) {
            let want = validate(&spec, input, mode).accepted;
            assert_eq!(matches!(verdict, SolverVerdict::Sat(_)), want, "{input:02x?} {mode}");
        }
    }
}

fn solve_packet(q: &QuerySpec, p: &FirstOrderProgram) -> Option<Vec<u8>> {
    let script = build_query(q, p);
    match solver().run(&script) {
        SolverVerdict::Sat(t) => Some(parse_model(&t, &script.plan).unwrap()),
        SolverVerdict::Unsat => None,
        other => panic!("{other:?}"),
    }
}

#[test]
fn positive_model_for_message() {
    let spec = check(samples::MESSAGE).unwrap();
    let p = specialize(&spec);
    let pkt = solve_packet(&QuerySpec::new(QueryKind::Positive, AcceptMode::Strict), &p).unwrap();
    assert_eq!(pkt.len(), 2);
    assert!(pkt[0] >= 0x2B);
    assert!(validate(&spec, &pkt, AcceptMode::Strict).accepted);
}

#[test]
fn blocked_packets_do_not_come_back() {
    let spec = check(samples::MESSAGE).unwrap();
    let p = specialize(&spec);
    let mut q = QuerySpec::new(QueryKind::Positive, AcceptMode::Strict);
    let mut seen = Vec::new();
    for _ in 0..4 {
        let pkt = solve_packet(&q, &p).unwrap();
        assert!(!seen.contains(&pkt), "{pkt:02x?} repeated");
        seen.push(pkt.clone());
        q.blocking.push(pkt);
    }
}

#[test]
fn trace_prefix_steers_the_model() {
    let spec = check(samples::OPTION).unwrap();
    let p = specialize(&spec);
    for (prefix, mode_positive) in [
        (vec![0, 0], true),
        (vec![0, 1], true),
        (vec![0, 2], true),
        (vec![1], false),
        (vec![0, 2], false),
    ] {
        let kind = if mode_positive {
            QueryKind::Positive
        } else {
            QueryKind::Negative
        };
        let q = QuerySpec::new(kind, AcceptMode::Strict).with_prefix(&prefix);
        let pkt = solve_packet(&q, &p).unwrap_or_else(|| panic!("{prefix:?} unsat"));
        let r = replay(&p, &pkt, AcceptMode::Strict);
        assert!(r.trace.starts_with(&prefix), "{prefix:?} {pkt:02x?} {:?}", r.trace);
        assert_eq!(r.outcome.is_success(), mode_positive, "{prefix:?} {pkt:02x?}");
    }
    // No case beyond the dispatch's arity, and no-match is unreachable
    // because the outer constraint excludes other kinds.
    let q = QuerySpec::new(QueryKind::Negative, AcceptMode::Strict).with_prefix(&[0, 3]);
    assert_eq!(solve_packet(&q, &p), None);
}

#[test]
fn negative_subgoals() {
    let spec = check(samples::MESSAGE).unwrap();
    let p = specialize(&spec);
    let failed = solve_packet(&QuerySpec::new(QueryKind::NegativeFailed, AcceptMode::Strict), &p).unwrap();
    assert!(!replay(&p, &failed, AcceptMode::Prefix).outcome.is_success());
    let mut q = QuerySpec::new(QueryKind::NegativeTrailing, AcceptMode::Strict);
    q.max_size = Some(16);
    let trailing = solve_packet(&q, &p).unwrap();
    assert!(trailing.len() > 2);
    assert!(validate(&spec, &trailing, AcceptMode::Prefix).accepted);
    assert!(!validate(&spec, &trailing, AcceptMode::Strict).accepted);
}

#[test]
fn always_fail_has_no_positive() {
    let p = program(samples::ALWAYS_FAIL);
    assert_eq!(
        solve_packet(&QuerySpec::new(QueryKind::Positive, AcceptMode::Prefix), &p),
        None
    );
    let uninstrumented = instrument(p, InstrumentPolicy::None);
    assert_eq!(
        solve_packet(
            &QuerySpec::new(QueryKind::Positive, AcceptMode::Strict),
            &uninstrumented
        ),
        None
    );
}
