use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::*;
use crate::eval::{self, decode_int, EvalError, Value};
use crate::interp::{AcceptMode, Bindings, FailureReason, ParseOutcome};

/// The result of running a program on a concrete input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Replay {
    pub outcome: ParseOutcome,
    pub trace: BranchTrace,
    /// The branch id behind each trace entry.
    pub branches: Vec<BranchId>,
}

/// Runs `program` on `input`, applying `mode` to the final outcome.
pub fn replay(program: &FirstOrderProgram, input: &[u8], mode: AcceptMode) -> Replay {
    let mut m = Machine {
        program,
        input,
        pos: 0,
        values: vec![None; program.vars.len()],
        trace: Vec::new(),
        branches: Vec::new(),
    };
    let outcome = match m.steps(std::slice::from_ref(&program.root)) {
        Ok(()) => {
            let bindings = program
                .vars
                .iter()
                .zip(&m.values)
                .filter(|(info, _)| info.role == VarRole::Field)
                .filter_map(|(info, v)| v.map(|v| (info.path.clone(), v)))
                .collect();
            ParseOutcome::Success {
                consumed: m.pos,
                bindings: Bindings(bindings),
            }
        }
        Err((reason, at)) => ParseOutcome::Failure { reason, at },
    };
    Replay {
        outcome: outcome.under_mode(input.len(), mode),
        trace: m.trace,
        branches: m.branches,
    }
}

type Halt = (FailureReason, usize);

struct Machine<'p, 'i> {
    program: &'p FirstOrderProgram,
    input: &'i [u8],
    pos: usize,
    values: Vec<Option<u64>>,
    trace: BranchTrace,
    branches: Vec<BranchId>,
}

impl Machine<'_, '_> {
    fn eval(&self, t: &Term) -> Result<Value, EvalError> {
        match t {
            Term::Const(n) => Ok(Value::Int(BigUint::from(*n))),
            Term::Var(v) => self.values[v.0]
                .map(|x| Value::Int(BigUint::from(x)))
                .ok_or_else(|| EvalError::UnboundIdentifier(self.program.vars[v.0].name.clone())),
            Term::Not(inner) => match self.eval(inner)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                Value::Int(_) => Err(EvalError::TypeMismatch {
                    expected: "boolean",
                }),
            },
            Term::Bin(op, l, r) => {
                let (l, r) = (self.eval(l), self.eval(r));
                eval::apply_binop(*op, l?, r?)
            }
        }
    }

    fn eval_u64(&self, t: &Term, limit: u64) -> Option<u64> {
        match self.eval(t) {
            Ok(Value::Int(n)) => n.to_u64().filter(|&v| v <= limit),
            _ => None,
        }
    }

    fn record(&mut self, branch: Option<BranchId>, outcome: usize) {
        if let Some(b) = branch {
            self.trace.push(outcome as u32);
            self.branches.push(b);
        }
    }

    fn read(&mut self, kind: IntKind) -> Result<u64, Halt> {
        let end = self.pos + kind.bytes();
        if end > self.input.len() {
            return Err((FailureReason::InsufficientInput, self.pos));
        }
        let v = decode_int(&self.input[self.pos..end], kind).expect("slice has the kind's width");
        self.pos = end;
        Ok(v)
    }

    fn steps(&mut self, steps: &[Step]) -> Result<(), Halt> {
        for step in steps {
            self.step(step)?;
        }
        Ok(())
    }

    fn step(&mut self, step: &Step) -> Result<(), Halt> {
        match step {
            Step::ReadInt { dest, kind } => {
                let v = self.read(*kind)?;
                self.values[dest.0] = Some(v);
            }
            Step::ReadBits {
                container,
                kind,
                members,
            } => {
                let c = self.read(*kind)?;
                self.values[container.0] = Some(c);
                for m in members {
                    self.values[m.dest.0] = Some((c >> m.shift) & (u64::MAX >> (64 - m.width)));
                }
            }
            Step::Let {
                dest,
                value,
                max,
                field,
            } => match self.eval_u64(value, *max) {
                Some(v) => self.values[dest.0] = Some(v),
                None => return Err((FailureReason::InvalidExpression(field.clone()), self.pos)),
            },
            Step::CheckConstraint {
                cond,
                kind,
                field,
                branch,
                ..
            } => {
                let ok = matches!(self.eval(cond), Ok(Value::Bool(true)));
                self.record(*branch, usize::from(!ok));
                if !ok {
                    let reason = match kind {
                        CheckKind::Constraint => FailureReason::ConstraintViolated(field.clone()),
                        CheckKind::EnumMembership => FailureReason::EnumOutOfRange(field.clone()),
                    };
                    return Err((reason, self.pos));
                }
            }
            Step::Dispatch {
                scrutinee,
                cases,
                casetype,
                branch,
                ..
            } => {
                let tag = self.eval_u64(scrutinee, u64::MAX);
                match tag.and_then(|t| cases.iter().position(|c| c.tag == t)) {
                    Some(i) => {
                        self.record(*branch, i);
                        self.steps(&cases[i].body)?;
                    }
                    None => {
                        self.record(*branch, cases.len());
                        return Err((FailureReason::NoCaseMatched(casetype.clone()), self.pos));
                    }
                }
            }
            Step::SkipBytes { dest, len, field } => {
                let Some(n) = self.eval_u64(len, u64::MAX) else {
                    return Err((FailureReason::InvalidExpression(field.clone()), self.pos));
                };
                let remaining = (self.input.len() - self.pos) as u64;
                if n > remaining {
                    return Err((FailureReason::InsufficientInput, self.pos));
                }
                self.pos += n as usize;
                self.values[dest.0] = Some(n);
            }
            Step::ConsumeAll { dest } => {
                let n = self.input.len() - self.pos;
                self.pos = self.input.len();
                self.values[dest.0] = Some(n as u64);
            }
            Step::Seq(inner) => self.steps(inner)?,
        }
        Ok(())
    }
}
