use std::fmt::Write;

use crate::ast::{Endian, IntKind};

const BYTE_RANGE: &str = "\
(declare-fun Input (Int) Int)
(assert (forall ((i Int))
                (and (<= 0 (Input i)) (< (Input i) 256))))
";

const STATE: &str = "\
(declare-datatype State
  ((mk-state (remaining-input-size Int)
             (current-pos Int)
             (has-failed Bool)
             (return-value Int)
             (branch-index Int))))
(define-fun incr ((n Int)) Int (+ n 1))
(define-fun decr ((n Int)) Int (- n 1))
(define-fun success-state ((v Int) (pos Int) (rem Int) (bi Int)) State
  (mk-state rem pos false v bi))
(define-fun fail-state ((s State)) State
  (mk-state (remaining-input-size s) (current-pos s) true (return-value s) (branch-index s)))
";

const SKIP: &str = "\
(define-fun skip-bytes ((s0 State) (n Int)) State
  (if (and (not (has-failed s0))
           (<= 0 n)
           (<= n (remaining-input-size s0)))
      (success-state
        n
        (+ (current-pos s0) n)
        (- (remaining-input-size s0) n)
        (branch-index s0))
      (fail-state s0)))
";

const COVERAGE: &str = "\
(declare-fun branch-trace (Int) Int)
(define-fun incr-branch-index ((s State)) State
  (mk-state (remaining-input-size s) (current-pos s) (has-failed s) (return-value s)
            (+ (branch-index s) 1)))
(define-fun mismatch-state ((s State)) State
  (mk-state (remaining-input-size s) (current-pos s) true (return-value s) (- 1)))
";

/// Integer kinds with a `parse-*` reader in the prelude.
pub const READ_KINDS: [(u32, Endian); 7] = [
    (8, Endian::Big),
    (16, Endian::Little),
    (16, Endian::Big),
    (32, Endian::Little),
    (32, Endian::Big),
    (64, Endian::Little),
    (64, Endian::Big),
];

/// Name of the reader function for an integer kind.
pub fn reader_name(kind: IntKind) -> String {
    format!("parse-{}", kind.keyword().to_lowercase())
}

fn byte_at(offset: usize) -> String {
    if offset == 0 {
        "(Input (current-pos s0))".to_string()
    } else {
        format!("(Input (+ (current-pos s0) {offset}))")
    }
}

fn compose(kind: IntKind) -> String {
    let n = kind.bytes();
    let order: Vec<usize> = match kind.endian() {
        Endian::Big => (0..n).collect(),
        Endian::Little => (0..n).rev().collect(),
    };
    let mut acc = byte_at(order[0]);
    for &i in &order[1..] {
        acc = format!("(+ (* 256 {acc}) {})", byte_at(i));
    }
    acc
}

fn reader(kind: IntKind) -> String {
    let n = kind.bytes();
    let mut out = String::new();
    let _ = writeln!(out, "(define-fun {} ((s0 State)) State", reader_name(kind));
    out.push_str("  (if (and (not (has-failed s0))\n");
    if n == 1 {
        out.push_str("           (> (remaining-input-size s0) 0))\n");
        out.push_str("      (success-state\n");
        out.push_str("        (Input (current-pos s0)) ;; return value.\n");
        out.push_str("        (incr (current-pos s0))  ;; new position.\n");
        out.push_str("        (decr (remaining-input-size s0)) ;; new remaining size.\n");
    } else {
        let _ = writeln!(out, "           (>= (remaining-input-size s0) {n}))");
        out.push_str("      (success-state\n");
        let _ = writeln!(out, "        {}", compose(kind));
        let _ = writeln!(out, "        (+ (current-pos s0) {n})");
        let _ = writeln!(out, "        (- (remaining-input-size s0) {n})");
    }
    out.push_str("        (branch-index s0))\n");
    out.push_str("      (fail-state s0)))\n");
    out
}

/// The shared declarations every script starts with. `coverage` adds the
/// branch trace function and the helpers instrumented encodings use.
pub fn emit_prelude(coverage: bool) -> String {
    let mut out = String::new();
    out.push_str(BYTE_RANGE);
    out.push_str(STATE);
    for (bits, endian) in READ_KINDS {
        out.push_str(&reader(IntKind::new(bits, endian).expect("valid kind")));
    }
    out.push_str(SKIP);
    if coverage {
        out.push_str(COVERAGE);
    }
    out
}
