//! Lowering of a checked spec to a first-order program.
//!
//! Parameterized types are instantiated per use site, nested types are
//! inlined, and every read, check and case split becomes a primitive
//! [`Step`]. Constraint checks and casetype dispatches can carry a branch id;
//! a [`BranchTrace`] records, for each tagged branch a run passes through,
//! which outcome it took. Outcome 0 means a constraint holds and 1 that it
//! fails; for a dispatch, cases are numbered in declaration order and the
//! last index means no case matched.

mod dump;
mod lower;
mod replay;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::ast::{BinOp, IntKind, Span, Spec};

pub use replay::{replay, Replay};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BranchId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// How a variable shows up in a parse result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VarRole {
    /// A parsed field; bound in the outcome under its dotted path.
    Field,
    /// A type argument bound on entry to an instantiation.
    Param,
    /// A bitfield container or an entry-level enum; not reported.
    Hidden,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VarInfo {
    pub name: String,
    pub path: String,
    pub role: VarRole,
}

/// An integer or boolean expression over program variables. Enum constants
/// are substituted and shift amounts are folded to constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Term {
    Const(u64),
    Var(VarId),
    Not(Box<Term>),
    Bin(BinOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn bin(op: BinOp, l: Term, r: Term) -> Term {
        Term::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn vars(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => out.push(*v),
            Term::Not(t) => t.vars(out),
            Term::Bin(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CheckKind {
    /// A field's refinement constraint.
    Constraint,
    /// An enum field's value must be one of the declared constants.
    EnumMembership,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BitMember {
    pub dest: VarId,
    pub shift: u32,
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Case {
    pub tag: u64,
    pub body: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Step {
    ReadInt {
        dest: VarId,
        kind: IntKind,
    },
    /// Reads one container integer and splits it into bitfields.
    ReadBits {
        container: VarId,
        kind: IntKind,
        members: Vec<BitMember>,
    },
    /// Binds a type argument. Fails if the value is undefined or exceeds `max`.
    Let {
        dest: VarId,
        value: Term,
        max: u64,
        field: String,
    },
    CheckConstraint {
        cond: Term,
        kind: CheckKind,
        field: String,
        branch: Option<BranchId>,
        span: Span,
    },
    Dispatch {
        scrutinee: Term,
        cases: Vec<Case>,
        casetype: String,
        branch: Option<BranchId>,
        span: Span,
    },
    /// Skips `len` bytes and binds the length to `dest`.
    SkipBytes {
        dest: VarId,
        len: Term,
        field: String,
    },
    /// Skips the rest of the input and binds its length to `dest`.
    ConsumeAll {
        dest: VarId,
    },
    Seq(Vec<Step>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BranchKind {
    Constraint,
    Casetype,
}

impl fmt::Display for BranchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchKind::Constraint => "constraint",
            BranchKind::Casetype => "casetype",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchPoint {
    pub id: BranchId,
    pub arity: usize,
    pub kind: BranchKind,
    /// Field name for a constraint, type name for a casetype.
    pub label: String,
    pub span: Span,
}

/// Outcome indices, one per tagged branch a run passes through.
pub type BranchTrace = Vec<u32>;

/// Which steps receive branch ids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum InstrumentPolicy {
    /// Constraint checks (including enum membership) and dispatches.
    #[default]
    Default,
    None,
    ConstraintsOnly,
    CasetypesOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FirstOrderProgram {
    /// Name of the entry type.
    pub name: String,
    pub root: Step,
    pub vars: Vec<VarInfo>,
    pub branches: Vec<BranchPoint>,
}

/// Lowers the entry type of `spec` and tags branches with the default policy.
pub fn specialize(spec: &Spec) -> FirstOrderProgram {
    instrument(lower::lower(spec), InstrumentPolicy::Default)
}

/// Reassigns branch ids in program order according to `policy`.
pub fn instrument(mut program: FirstOrderProgram, policy: InstrumentPolicy) -> FirstOrderProgram {
    let mut branches = Vec::new();
    tag_step(&mut program.root, policy, &mut branches);
    program.branches = branches;
    program
}

fn tag_step(step: &mut Step, policy: InstrumentPolicy, out: &mut Vec<BranchPoint>) {
    match step {
        Step::CheckConstraint {
            branch,
            field,
            span,
            ..
        } => {
            *branch = None;
            if matches!(
                policy,
                InstrumentPolicy::Default | InstrumentPolicy::ConstraintsOnly
            ) {
                let id = BranchId(out.len());
                *branch = Some(id);
                out.push(BranchPoint {
                    id,
                    arity: 2,
                    kind: BranchKind::Constraint,
                    label: field.clone(),
                    span: *span,
                });
            }
        }
        Step::Dispatch {
            branch,
            cases,
            casetype,
            span,
            ..
        } => {
            *branch = None;
            if matches!(
                policy,
                InstrumentPolicy::Default | InstrumentPolicy::CasetypesOnly
            ) {
                let id = BranchId(out.len());
                *branch = Some(id);
                out.push(BranchPoint {
                    id,
                    arity: cases.len() + 1,
                    kind: BranchKind::Casetype,
                    label: casetype.clone(),
                    span: *span,
                });
            }
            for case in cases {
                for s in &mut case.body {
                    tag_step(s, policy, out);
                }
            }
        }
        Step::Seq(steps) => {
            for s in steps {
                tag_step(s, policy, out);
            }
        }
        _ => {}
    }
}

impl FirstOrderProgram {
    pub fn branch(&self, id: BranchId) -> &BranchPoint {
        &self.branches[id.0]
    }

    pub fn is_instrumented(&self) -> bool {
        !self.branches.is_empty()
    }

    /// The tagged branches a run may reach next after following `prefix`.
    /// Empty when every path consistent with the prefix ends first, or when
    /// the prefix is not realizable by the program's structure.
    pub fn next_branches(&self, prefix: &[u32]) -> BTreeSet<BranchId> {
        let mut out = BTreeSet::new();
        let root = std::slice::from_ref(&self.root);
        walk(vec![root], prefix, &mut out);
        out
    }

    /// Largest arity among [`Self::next_branches`], or `None` if there is none.
    pub fn next_arity(&self, prefix: &[u32]) -> Option<usize> {
        self.next_branches(prefix)
            .into_iter()
            .map(|b| self.branch(b).arity)
            .max()
    }

    /// Checks single assignment and definition before use.
    pub fn lint(&self) -> Result<(), String> {
        let mut assigned = vec![false; self.vars.len()];
        lint_steps(std::slice::from_ref(&self.root), &mut assigned)
    }

    /// Indented text rendering, one step per line.
    pub fn dump(&self) -> String {
        dump::dump(self)
    }
}

fn walk(mut stack: Vec<&[Step]>, prefix: &[u32], out: &mut BTreeSet<BranchId>) {
    let mut prefix = prefix;
    loop {
        let Some(top) = stack.last_mut() else {
            return;
        };
        let Some((step, rest)) = top.split_first() else {
            stack.pop();
            continue;
        };
        *top = rest;
        match step {
            Step::CheckConstraint {
                branch: Some(b), ..
            } => match prefix.split_first() {
                None => {
                    out.insert(*b);
                    return;
                }
                Some((0, more)) => prefix = more,
                Some(_) => return,
            },
            Step::Dispatch {
                branch: Some(b),
                cases,
                ..
            } => match prefix.split_first() {
                None => {
                    out.insert(*b);
                    return;
                }
                Some((&o, more)) => {
                    let Some(case) = cases.get(o as usize) else {
                        return;
                    };
                    prefix = more;
                    stack.push(&case.body);
                }
            },
            Step::Dispatch {
                branch: None,
                cases,
                ..
            } => {
                for case in cases {
                    let mut fork = stack.clone();
                    fork.push(&case.body);
                    walk(fork, prefix, out);
                }
                return;
            }
            Step::Seq(steps) => stack.push(steps),
            _ => {}
        }
    }
}

fn lint_steps(steps: &[Step], assigned: &mut [bool]) -> Result<(), String> {
    fn use_term(t: &Term, assigned: &[bool]) -> Result<(), String> {
        let mut vs = Vec::new();
        t.vars(&mut vs);
        match vs.into_iter().find(|v| !assigned[v.0]) {
            Some(v) => Err(format!("{v} used before assignment")),
            None => Ok(()),
        }
    }
    fn def(v: VarId, assigned: &mut [bool]) -> Result<(), String> {
        if std::mem::replace(&mut assigned[v.0], true) {
            return Err(format!("{v} assigned twice"));
        }
        Ok(())
    }
    for step in steps {
        match step {
            Step::ReadInt { dest, .. } | Step::ConsumeAll { dest } => def(*dest, assigned)?,
            Step::ReadBits {
                container, members, ..
            } => {
                def(*container, assigned)?;
                for m in members {
                    def(m.dest, assigned)?;
                }
            }
            Step::Let { dest, value, .. } => {
                use_term(value, assigned)?;
                def(*dest, assigned)?;
            }
            Step::SkipBytes { dest, len, .. } => {
                use_term(len, assigned)?;
                def(*dest, assigned)?;
            }
            Step::CheckConstraint { cond, .. } => use_term(cond, assigned)?,
            Step::Dispatch {
                scrutinee, cases, ..
            } => {
                use_term(scrutinee, assigned)?;
                let mut tags = BTreeSet::new();
                for case in cases {
                    if !tags.insert(case.tag) {
                        return Err(format!("duplicate tag {}", case.tag));
                    }
                    // Variables from one case are not visible after the dispatch.
                    let mut inner = assigned.to_vec();
                    lint_steps(&case.body, &mut inner)?;
                    for (a, i) in assigned.iter_mut().zip(inner) {
                        *a |= i;
                    }
                }
            }
            Step::Seq(inner) => lint_steps(inner, assigned)?,
        }
    }
    Ok(())
}
