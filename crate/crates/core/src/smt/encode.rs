use std::fmt::Write;

use num_bigint::BigUint;
use num_traits::One;
use sha2::{Digest, Sha256};

use super::prelude::reader_name;
use crate::ast::BinOp;
use crate::specialize::{BranchId, FirstOrderProgram, Step, Term};

/// `parse-<Type>-<8 hex digits>`, where the digits hash the program text.
pub fn function_name(program: &FirstOrderProgram, instrumented: bool) -> String {
    let mut h = Sha256::new();
    h.update(program.dump().as_bytes());
    h.update([u8::from(instrumented)]);
    let digest = h.finalize();
    format!("parse-{}-{}", program.name, hex::encode(&digest[..4]))
}

/// One `define-fun` for `program`. Branch tags are honored only when
/// `instrumented` is set; the coverage prelude must then be present.
pub fn encode_program(program: &FirstOrderProgram, fn_name: &str, instrumented: bool) -> String {
    let mut enc = Encoder {
        instrumented,
        next_state: 1,
        exprs: vec![String::new(); program.vars.len()],
        bounds: vec![None; program.vars.len()],
    };
    let steps = flatten(std::slice::from_ref(&program.root));
    let body = enc.seq(&steps, "s0".to_string());
    let mut out = String::new();
    let _ = writeln!(out, "(define-fun {fn_name} ((s0 State)) State");
    let _ = writeln!(out, "{})", indent(&body, 2));
    out
}

fn flatten(steps: &[Step]) -> Vec<&Step> {
    let mut out = Vec::new();
    for s in steps {
        match s {
            Step::Seq(inner) => out.extend(flatten(inner)),
            other => out.push(other),
        }
    }
    out
}

fn indent(text: &str, by: usize) -> String {
    let pad = " ".repeat(by);
    text.lines()
        .map(|l| format!("{pad}{l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn pow2(k: u64) -> BigUint {
    BigUint::one() << k
}

fn conj(parts: &[String]) -> String {
    match parts {
        [] => "true".to_string(),
        [one] => one.clone(),
        many => format!("(and {})", many.join(" ")),
    }
}

/// An SMT rendering of a term together with the conditions under which its
/// evaluation does not fail.
struct Rendered {
    text: String,
    defined: Vec<String>,
    bound: Option<BigUint>,
}

struct Encoder {
    instrumented: bool,
    next_state: usize,
    /// SMT expression for each variable, filled in as steps are encoded.
    exprs: Vec<String>,
    /// Largest value each variable can take, when known.
    bounds: Vec<Option<BigUint>>,
}

impl Encoder {
    fn fresh(&mut self) -> String {
        let s = format!("s{}", self.next_state);
        self.next_state += 1;
        s
    }

    fn tag(&self, branch: Option<BranchId>) -> Option<BranchId> {
        if self.instrumented {
            branch
        } else {
            None
        }
    }

    fn term(&self, t: &Term) -> Rendered {
        match t {
            Term::Const(n) => Rendered {
                text: n.to_string(),
                defined: vec![],
                bound: Some(BigUint::from(*n)),
            },
            Term::Var(v) => Rendered {
                text: self.exprs[v.0].clone(),
                defined: vec![],
                bound: self.bounds[v.0].clone(),
            },
            Term::Not(inner) => {
                let r = self.term(inner);
                Rendered {
                    text: format!("(not {})", r.text),
                    defined: r.defined,
                    bound: None,
                }
            }
            Term::Bin(op, l, r) => {
                let (mut a, mut b) = (self.term(l), self.term(r));
                let mut defined = std::mem::take(&mut a.defined);
                defined.append(&mut b.defined);
                let both = a.bound.as_ref().zip(b.bound.as_ref());
                let (text, bound) = match op {
                    BinOp::Add => (
                        format!("(+ {} {})", a.text, b.text),
                        both.map(|(x, y)| x + y),
                    ),
                    BinOp::Sub => {
                        defined.push(format!("(>= {} {})", a.text, b.text));
                        (format!("(- {} {})", a.text, b.text), a.bound)
                    }
                    BinOp::Mul => (
                        format!("(* {} {})", a.text, b.text),
                        both.map(|(x, y)| x * y),
                    ),
                    BinOp::Shl | BinOp::Shr => {
                        let Term::Const(k) = **r else {
                            unreachable!("shift amounts are folded to constants");
                        };
                        if *op == BinOp::Shl {
                            (
                                format!("(* {} {})", a.text, pow2(k)),
                                a.bound.map(|x| x << k),
                            )
                        } else {
                            (
                                format!("(div {} {})", a.text, pow2(k)),
                                a.bound.map(|x| x >> k),
                            )
                        }
                    }
                    BinOp::BitAnd | BinOp::BitOr | BinOp::BitXor => {
                        let limit = pow2(64);
                        for side in [&a, &b] {
                            if side.bound.as_ref().is_none_or(|x| *x >= limit) {
                                defined.push(format!("(< {} {limit})", side.text));
                            }
                        }
                        let f = match op {
                            BinOp::BitAnd => "bvand",
                            BinOp::BitOr => "bvor",
                            _ => "bvxor",
                        };
                        (
                            format!(
                                "(bv2nat ({f} ((_ int2bv 64) {}) ((_ int2bv 64) {})))",
                                a.text, b.text
                            ),
                            Some(&limit - 1u32),
                        )
                    }
                    BinOp::Lt => (format!("(< {} {})", a.text, b.text), None),
                    BinOp::Le => (format!("(<= {} {})", a.text, b.text), None),
                    BinOp::Gt => (format!("(> {} {})", a.text, b.text), None),
                    BinOp::Ge => (format!("(>= {} {})", a.text, b.text), None),
                    BinOp::Eq => (format!("(= {} {})", a.text, b.text), None),
                    BinOp::Ne => (format!("(not (= {} {}))", a.text, b.text), None),
                    BinOp::And => (format!("(and {} {})", a.text, b.text), None),
                    BinOp::Or => (format!("(or {} {})", a.text, b.text), None),
                };
                Rendered {
                    text,
                    defined,
                    bound,
                }
            }
        }
    }

    /// A boolean term that is true exactly when `t` evaluates to true.
    fn holds(&self, t: &Term) -> String {
        let r = self.term(t);
        let mut parts = r.defined;
        parts.push(r.text);
        conj(&parts)
    }

    /// `(let ((sN call)) (if (has-failed sN) sN <rest>))`, or just `call`
    /// when nothing follows.
    fn bind_then(&mut self, call: String, rest: &[&Step], bind: impl FnOnce(&mut Self, &str)) -> String {
        if rest.is_empty() {
            return call;
        }
        let s = self.fresh();
        bind(self, &s);
        let tail = self.seq(rest, s.clone());
        format!(
            "(let (({s} {call}))\n  (if (has-failed {s}) {s}\n{}))",
            indent(&tail, 4)
        )
    }

    /// Binds `state` to a name if it is not one already, then encodes `rest`.
    fn named(&mut self, state: String, f: impl FnOnce(&mut Self, String) -> String) -> String {
        if is_symbol(&state) {
            return f(self, state);
        }
        let s = self.fresh();
        let body = f(self, s.clone());
        format!("(let (({s} {state}))\n{})", indent(&body, 2))
    }

    fn seq(&mut self, steps: &[&Step], state: String) -> String {
        let Some((step, rest)) = steps.split_first() else {
            return state;
        };
        match step {
            Step::ReadInt { dest, kind } => {
                let call = format!("({} {state})", reader_name(*kind));
                let bound = BigUint::from(kind.max_value());
                self.bind_then(call, rest, |e, s| {
                    e.exprs[dest.0] = format!("(return-value {s})");
                    e.bounds[dest.0] = Some(bound);
                })
            }
            Step::ReadBits {
                container,
                kind,
                members,
            } => {
                let call = format!("({} {state})", reader_name(*kind));
                let bits = kind.bits();
                self.bind_then(call, rest, |e, s| {
                    let rv = format!("(return-value {s})");
                    e.exprs[container.0] = rv.clone();
                    e.bounds[container.0] = Some(BigUint::from(kind.max_value()));
                    for m in members {
                        let shifted = if m.shift == 0 {
                            rv.clone()
                        } else {
                            format!("(div {rv} {})", pow2(m.shift.into()))
                        };
                        e.exprs[m.dest.0] = if m.shift + m.width == bits {
                            shifted
                        } else {
                            format!("(mod {shifted} {})", pow2(m.width.into()))
                        };
                        e.bounds[m.dest.0] = Some(pow2(m.width.into()) - 1u32);
                    }
                })
            }
            Step::Let {
                dest, value, max, ..
            } => {
                let r = self.term(value);
                let max_big = BigUint::from(*max);
                let mut guard = r.defined.clone();
                if r.bound.as_ref().is_none_or(|b| *b > max_big) {
                    guard.push(format!("(<= {} {max})", r.text));
                }
                self.exprs[dest.0] = r.text;
                self.bounds[dest.0] = Some(r.bound.map_or(max_big.clone(), |b| b.min(max_big)));
                if guard.is_empty() {
                    return self.seq(rest, state);
                }
                self.named(state, |e, s| {
                    let tail = e.seq(rest, s.clone());
                    format!(
                        "(if {}\n{}\n    (fail-state {s}))",
                        conj(&guard),
                        indent(&tail, 4)
                    )
                })
            }
            Step::CheckConstraint { cond, branch, .. } => {
                let branch = self.tag(*branch);
                self.named(state, |e, s| {
                    let c = e.holds(cond);
                    match branch {
                        None => {
                            let tail = e.seq(rest, s.clone());
                            format!("(if {c}\n{}\n    (fail-state {s}))", indent(&tail, 4))
                        }
                        Some(_) => {
                            let next = format!("(incr-branch-index {s})");
                            let tail = e.seq(rest, next.clone());
                            format!(
                                "(if (and {c}\n         (= 0 (branch-trace (branch-index {s}))))\n\
                                 {}\n    \
                                 (if (and (not {c})\n             (= 1 (branch-trace (branch-index {s}))))\n        \
                                 (fail-state {next})\n        \
                                 (mismatch-state {s})))",
                                indent(&tail, 4)
                            )
                        }
                    }
                })
            }
            Step::Dispatch {
                scrutinee,
                cases,
                branch,
                ..
            } => {
                let branch = self.tag(*branch);
                let dispatch = self.named(state, |e, s| {
                    let r = e.term(scrutinee);
                    let guards: Vec<String> = cases
                        .iter()
                        .map(|c| {
                            let mut parts = r.defined.clone();
                            parts.push(format!("(= {} {})", r.text, c.tag));
                            conj(&parts)
                        })
                        .collect();
                    let entry = match branch {
                        Some(_) => format!("(incr-branch-index {s})"),
                        None => s.clone(),
                    };
                    let mut arms = Vec::new();
                    for (i, c) in cases.iter().enumerate() {
                        let body = e.seq(&flatten(&c.body), entry.clone());
                        let guard = match branch {
                            Some(_) => format!(
                                "(and {} (= {i} (branch-trace (branch-index {s}))))",
                                guards[i]
                            ),
                            None => guards[i].clone(),
                        };
                        arms.push((guard, body));
                    }
                    let otherwise = match branch {
                        Some(_) => {
                            let mut none: Vec<String> =
                                guards.iter().map(|g| format!("(not {g})")).collect();
                            none.push(format!(
                                "(= {} (branch-trace (branch-index {s})))",
                                cases.len()
                            ));
                            format!(
                                "(if {}\n    (fail-state {entry})\n    (mismatch-state {s}))",
                                conj(&none)
                            )
                        }
                        None => format!("(fail-state {s})"),
                    };
                    arms.into_iter().rev().fold(otherwise, |acc, (g, body)| {
                        format!("(if {g}\n{}\n{})", indent(&body, 4), indent(&acc, 2))
                    })
                });
                if rest.is_empty() {
                    return dispatch;
                }
                let s = self.fresh();
                let tail = self.seq(rest, s.clone());
                format!(
                    "(let (({s}\n{}))\n  (if (has-failed {s}) {s}\n{}))",
                    indent(&dispatch, 8),
                    indent(&tail, 4)
                )
            }
            Step::SkipBytes { dest, len, .. } => {
                let r = self.term(len);
                let mut guard = r.defined.clone();
                if r.bound.as_ref().is_none_or(|b| *b > BigUint::from(u64::MAX)) {
                    guard.push(format!("(<= {} {})", r.text, u64::MAX));
                }
                let bound = r.bound.clone();
                let skip = |e: &mut Self, s: String| {
                    let call = format!("(skip-bytes {s} {})", r.text);
                    e.bind_then(call, rest, |e, n| {
                        e.exprs[dest.0] = format!("(return-value {n})");
                        e.bounds[dest.0] = bound.clone();
                    })
                };
                if guard.is_empty() {
                    return skip(self, state);
                }
                self.named(state, |e, s| {
                    let body = skip(e, s.clone());
                    format!(
                        "(if {}\n{}\n    (fail-state {s}))",
                        conj(&guard),
                        indent(&body, 4)
                    )
                })
            }
            Step::ConsumeAll { dest } => self.named(state, |e, s| {
                let call = format!("(skip-bytes {s} (remaining-input-size {s}))");
                e.bind_then(call, rest, |e, n| {
                    e.exprs[dest.0] = format!("(return-value {n})");
                })
            }),
            Step::Seq(_) => unreachable!("sequences are flattened"),
        }
    }
}

fn is_symbol(s: &str) -> bool {
    !s.starts_with('(')
}

