use std::fmt::Write;

use serde::Serialize;

use super::encode::{encode_program, function_name};
use super::prelude::emit_prelude;
use crate::interp::AcceptMode;
use crate::specialize::{BranchTrace, FirstOrderProgram};

/// Default largest packet reified from a model.
pub const DEFAULT_MAX_PACKET: usize = 4096;

/// What the query asks the solver for.
#[derive(Clone, Copy, Debug)]
pub enum QueryKind<'a> {
    /// An input the program accepts.
    Positive,
    /// An input the program rejects, for any reason.
    Negative,
    /// An input on which the program fails.
    NegativeFailed,
    /// An input the program parses while leaving bytes over. Only
    /// distinct from a success in strict mode.
    NegativeTrailing,
    /// An input the program accepts and the other program rejects.
    DiffLeftNotRight(&'a FirstOrderProgram),
}

impl QueryKind<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            QueryKind::Positive => "positive",
            QueryKind::Negative => "negative",
            QueryKind::NegativeFailed => "negative-failed",
            QueryKind::NegativeTrailing => "negative-trailing",
            QueryKind::DiffLeftNotRight(_) => "diff",
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuerySpec<'a> {
    pub kind: QueryKind<'a>,
    pub mode: AcceptMode,
    /// Encode branch tags and the branch trace. Diff queries ignore it.
    pub instrumented: bool,
    pub trace_prefix: BranchTrace,
    /// The run must pass at least this many tagged branches.
    pub min_depth: usize,
    /// Packets the model must differ from.
    pub blocking: Vec<Vec<u8>>,
    /// Pins the input to exactly these bytes.
    pub fixed_input: Option<Vec<u8>>,
    /// Upper bound on the input size asserted in the script.
    pub max_size: Option<usize>,
}

impl<'a> QuerySpec<'a> {
    pub fn new(kind: QueryKind<'a>, mode: AcceptMode) -> QuerySpec<'a> {
        QuerySpec {
            kind,
            mode,
            instrumented: false,
            trace_prefix: Vec::new(),
            min_depth: 0,
            blocking: Vec::new(),
            fixed_input: None,
            max_size: None,
        }
    }

    /// An instrumented query whose run must start with `prefix`.
    pub fn with_prefix(mut self, prefix: &[u32]) -> QuerySpec<'a> {
        self.instrumented = true;
        self.trace_prefix = prefix.to_vec();
        self.min_depth = prefix.len();
        self
    }
}

/// How model values are requested from the solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Dialect {
    /// `(eval t)`, answered with the bare value.
    #[default]
    Eval,
    /// `(get-value (t))`, answered with `((t v))`.
    GetValue,
}

/// Commands whose answers reconstruct a packet: the size, then one command
/// per byte below that size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EvalPlan {
    pub dialect: Dialect,
    pub max_packet: usize,
}

impl Default for EvalPlan {
    fn default() -> Self {
        EvalPlan {
            dialect: Dialect::Eval,
            max_packet: DEFAULT_MAX_PACKET,
        }
    }
}

impl EvalPlan {
    fn request(&self, term: &str) -> String {
        match self.dialect {
            Dialect::Eval => format!("(eval {term})"),
            Dialect::GetValue => format!("(get-value ({term}))"),
        }
    }

    pub fn size_command(&self) -> String {
        self.request("(remaining-input-size init)")
    }

    pub fn byte_command(&self, i: usize) -> String {
        self.request(&format!("(Input {i})"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmtScript {
    /// Everything up to and including `(check-sat)`.
    pub text: String,
    pub plan: EvalPlan,
}

impl SmtScript {
    /// The script followed by the first model requests, for display.
    pub fn render(&self) -> String {
        format!(
            "{}{} ;; input size from model.\n{} ;; first input byte; one request per byte.\n",
            self.text,
            self.plan.size_command(),
            self.plan.byte_command(0)
        )
    }
}

fn accepted(f: &str, mode: AcceptMode) -> String {
    match mode {
        AcceptMode::Prefix => format!("(not (has-failed ({f} init)))"),
        AcceptMode::Strict => format!(
            "(and (not (has-failed ({f} init)))\n     (= (remaining-input-size ({f} init)) 0))"
        ),
    }
}

fn rejected(f: &str, mode: AcceptMode) -> String {
    match mode {
        AcceptMode::Prefix => format!("(has-failed ({f} init))"),
        AcceptMode::Strict => format!(
            "(or (has-failed ({f} init))\n    (> (remaining-input-size ({f} init)) 0))"
        ),
    }
}

/// Pins the input to `bytes`.
pub fn packet_equals(bytes: &[u8]) -> String {
    let mut parts = vec![format!("(= (remaining-input-size init) {})", bytes.len())];
    for (i, b) in bytes.iter().enumerate() {
        parts.push(format!("(= (Input {i}) {b})"));
    }
    format!("(and {})", parts.join(" "))
}

/// Builds a complete script for `q` against `program`.
pub fn build_query(q: &QuerySpec, program: &FirstOrderProgram) -> SmtScript {
    build_query_with(q, program, EvalPlan::default())
}

pub fn build_query_with(q: &QuerySpec, program: &FirstOrderProgram, plan: EvalPlan) -> SmtScript {
    let diff = matches!(q.kind, QueryKind::DiffLeftNotRight(_));
    let instrumented = q.instrumented && !diff;
    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n(set-logic ALL)\n");
    out.push_str(&emit_prelude(instrumented));

    let f = function_name(program, instrumented);
    out.push_str(&encode_program(program, &f, instrumented));
    let other = match q.kind {
        QueryKind::DiffLeftNotRight(p2) => {
            let g = function_name(p2, false);
            if g != f {
                out.push_str(&encode_program(p2, &g, false));
            }
            Some(g)
        }
        _ => None,
    };

    out.push_str("(declare-fun init () State) ;; initial state.\n");
    out.push_str("(assert (and (not (has-failed init))\n             (= 0 (current-pos init))))\n");
    out.push_str("(assert (>= (remaining-input-size init) 0))\n");
    if instrumented {
        out.push_str("(assert (= (branch-index init) 0)) ;; start from index 0.\n");
    }

    let _ = match (&q.kind, q.mode) {
        (QueryKind::Positive, mode) => {
            let _ = writeln!(out, "(assert (not (has-failed ({f} init))))");
            if mode == AcceptMode::Strict {
                let _ = writeln!(out, "(assert (= (remaining-input-size ({f} init)) 0))");
            }
            Ok(())
        }
        (QueryKind::Negative, mode) => writeln!(out, "(assert {})", rejected(&f, mode)),
        (QueryKind::NegativeFailed, _) => writeln!(out, "(assert (has-failed ({f} init)))"),
        (QueryKind::NegativeTrailing, _) => writeln!(
            out,
            "(assert (not (has-failed ({f} init))))\n(assert (> (remaining-input-size ({f} init)) 0))"
        ),
        (QueryKind::DiffLeftNotRight(_), mode) => {
            let g = other.as_deref().expect("diff has a second function");
            let _ = writeln!(out, "(assert {})", accepted(&f, mode));
            writeln!(out, "(assert {})", rejected(g, mode))
        }
    };

    if instrumented {
        for (k, o) in q.trace_prefix.iter().enumerate() {
            let _ = writeln!(out, "(assert (= (branch-trace {k}) {o}))");
        }
        let _ = writeln!(
            out,
            "(assert (>= (branch-index ({f} init)) {}))",
            q.min_depth
        );
    }
    if let Some(bytes) = &q.fixed_input {
        let _ = writeln!(out, "(assert {})", packet_equals(bytes));
    }
    if let Some(max) = q.max_size {
        let _ = writeln!(out, "(assert (<= (remaining-input-size init) {max}))");
    }
    for b in &q.blocking {
        let _ = writeln!(out, "(assert (not {}))", packet_equals(b));
    }
    out.push_str("(check-sat)\n");
    SmtScript { text: out, plan }
}
