//! Value model and expression evaluation.
//!
//! Arithmetic is over unbounded non-negative integers. Evaluation is strict:
//! both operands of every operator are evaluated, including `&&` and `||`,
//! so an error anywhere in a constraint fails the whole constraint. The SMT
//! encoding collects definedness side conditions the same way.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::ast::{BinOp, Endian, Expr, ExprKind, IntKind};

/// Largest shift amount accepted in a constant shift expression.
pub const MAX_SHIFT: u64 = 512;

/// Bitwise operators are defined on operands below `2^BITWISE_WIDTH`.
pub const BITWISE_WIDTH: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(BigUint),
    Bool(bool),
}

impl Value {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigUint> {
        match self {
            Value::Int(n) => Some(n),
            Value::Bool(_) => None,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("subtraction {lhs} - {rhs} would be negative")]
    NegativeResult { lhs: BigUint, rhs: BigUint },
    #[error("unbound identifier `{0}`")]
    UnboundIdentifier(String),
    #[error("operand of a bitwise operator does not fit in {BITWISE_WIDTH} bits")]
    BitwiseOverflow,
    #[error("shift amount {0} exceeds {MAX_SHIFT}")]
    ShiftTooLarge(BigUint),
    #[error("expected {expected} operand")]
    TypeMismatch { expected: &'static str },
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("expected {expected} bytes for {kind}, got {got}")]
pub struct LengthMismatch {
    pub kind: IntKind,
    pub expected: usize,
    pub got: usize,
}

/// Identifier bindings visible to an expression.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Env {
    bindings: HashMap<String, u64>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn bind(&mut self, name: &str, value: u64) {
        self.bindings.insert(name.to_string(), value);
    }

    pub fn lookup(&self, name: &str) -> Option<u64> {
        self.bindings.get(name).copied()
    }

    pub fn with(mut self, name: &str, value: u64) -> Env {
        self.bind(name, value);
        self
    }
}

/// A scope: local bindings first, then global constants (enum values).
pub trait Scope {
    fn resolve(&self, name: &str) -> Option<u64>;
}

impl Scope for Env {
    fn resolve(&self, name: &str) -> Option<u64> {
        self.lookup(name)
    }
}

impl<F: Fn(&str) -> Option<u64>> Scope for F {
    fn resolve(&self, name: &str) -> Option<u64> {
        self(name)
    }
}

pub fn eval_expr(env: &impl Scope, e: &Expr) -> Result<Value, EvalError> {
    match &e.kind {
        ExprKind::Int(n) => Ok(Value::Int(BigUint::from(*n))),
        ExprKind::Ident(name) => env
            .resolve(name)
            .map(|v| Value::Int(BigUint::from(v)))
            .ok_or_else(|| EvalError::UnboundIdentifier(name.clone())),
        ExprKind::Not(inner) => {
            let b = expect_bool(eval_expr(env, inner)?)?;
            Ok(Value::Bool(!b))
        }
        ExprKind::Binary(op, l, r) => {
            let lhs = eval_expr(env, l);
            let rhs = eval_expr(env, r);
            let (lhs, rhs) = (lhs?, rhs?);
            apply_binop(*op, lhs, rhs)
        }
    }
}

/// Applies a binary operator to two evaluated operands.
pub fn apply_binop(op: BinOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    if op.is_logical() {
        let (a, b) = (expect_bool(lhs)?, expect_bool(rhs)?);
        return Ok(Value::Bool(match op {
            BinOp::And => a && b,
            _ => a || b,
        }));
    }
    let (a, b) = (expect_int(lhs)?, expect_int(rhs)?);
    let out = match op {
        BinOp::Add => a + b,
        BinOp::Sub => {
            if b > a {
                return Err(EvalError::NegativeResult { lhs: a, rhs: b });
            }
            a - b
        }
        BinOp::Mul => a * b,
        BinOp::Shl | BinOp::Shr => {
            let amount = b
                .to_u64()
                .filter(|&n| n <= MAX_SHIFT)
                .ok_or_else(|| EvalError::ShiftTooLarge(b.clone()))?;
            if op == BinOp::Shl {
                a << amount
            } else {
                a >> amount
            }
        }
        BinOp::BitAnd | BinOp::BitOr | BinOp::BitXor => {
            if a.bits() > u64::from(BITWISE_WIDTH) || b.bits() > u64::from(BITWISE_WIDTH) {
                return Err(EvalError::BitwiseOverflow);
            }
            match op {
                BinOp::BitAnd => a & b,
                BinOp::BitOr => a | b,
                _ => a ^ b,
            }
        }
        BinOp::Lt => return Ok(Value::Bool(a < b)),
        BinOp::Le => return Ok(Value::Bool(a <= b)),
        BinOp::Gt => return Ok(Value::Bool(a > b)),
        BinOp::Ge => return Ok(Value::Bool(a >= b)),
        BinOp::Eq => return Ok(Value::Bool(a == b)),
        BinOp::Ne => return Ok(Value::Bool(a != b)),
        BinOp::And | BinOp::Or => unreachable!("handled above"),
    };
    Ok(Value::Int(out))
}

fn expect_bool(v: Value) -> Result<bool, EvalError> {
    v.as_bool().ok_or(EvalError::TypeMismatch {
        expected: "boolean",
    })
}

fn expect_int(v: Value) -> Result<BigUint, EvalError> {
    match v {
        Value::Int(n) => Ok(n),
        Value::Bool(_) => Err(EvalError::TypeMismatch {
            expected: "integer",
        }),
    }
}

/// Evaluates a boolean expression; any evaluation error counts as `false`.
pub fn holds(env: &impl Scope, e: &Expr) -> bool {
    matches!(eval_expr(env, e), Ok(Value::Bool(true)))
}

/// Evaluates an integer expression and narrows it to `u64`, or `None` when
/// evaluation fails or the value is wider than `limit`.
pub fn eval_int_within(env: &impl Scope, e: &Expr, limit: u64) -> Option<u64> {
    match eval_expr(env, e) {
        Ok(Value::Int(n)) => n.to_u64().filter(|&v| v <= limit),
        _ => None,
    }
}

pub fn decode_int(bytes: &[u8], kind: IntKind) -> Result<u64, LengthMismatch> {
    if bytes.len() != kind.bytes() {
        return Err(LengthMismatch {
            kind,
            expected: kind.bytes(),
            got: bytes.len(),
        });
    }
    let fold = |acc: u64, b: &u8| (acc << 8) | u64::from(*b);
    Ok(match kind.endian() {
        Endian::Big => bytes.iter().fold(0, fold),
        Endian::Little => bytes.iter().rev().fold(0, fold),
    })
}
