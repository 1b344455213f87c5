//! Reference semantics: a direct interpreter over the checked AST.
//!
//! A parser maps an input byte sequence to either a failure or a success
//! carrying the number of bytes consumed. This module is the ground truth the
//! specializer, the SMT encoding and the test generator are checked against.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::*;
use crate::eval::{self, decode_int, Env};

/// Whether the entry type must consume the whole input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptMode {
    #[default]
    Strict,
    Prefix,
}

impl fmt::Display for AcceptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcceptMode::Strict => "strict",
            AcceptMode::Prefix => "prefix",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FailureReason {
    InsufficientInput,
    ConstraintViolated(String),
    NoCaseMatched(String),
    EnumOutOfRange(String),
    /// An array size or type argument could not be evaluated (for example a
    /// negative subtraction) or does not fit the parameter's type.
    InvalidExpression(String),
    TrailingBytes,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::InsufficientInput => f.write_str("InsufficientInput"),
            FailureReason::ConstraintViolated(x) => write!(f, "ConstraintViolated({x})"),
            FailureReason::NoCaseMatched(x) => write!(f, "NoCaseMatched({x})"),
            FailureReason::EnumOutOfRange(x) => write!(f, "EnumOutOfRange({x})"),
            FailureReason::InvalidExpression(x) => write!(f, "InvalidExpression({x})"),
            FailureReason::TrailingBytes => f.write_str("TrailingBytes"),
        }
    }
}

/// Scalar values bound while parsing, keyed by dotted field path
/// (`payload.case2.MaxSegSize`). Arrays bind their length.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Bindings(pub Vec<(String, u64)>);

impl Bindings {
    /// Looks up a binding by full path, falling back to the last path segment.
    pub fn get(&self, name: &str) -> Option<u64> {
        self.0
            .iter()
            .find(|(p, _)| p == name)
            .or_else(|| {
                self.0
                    .iter()
                    .find(|(p, _)| p.rsplit('.').next() == Some(name))
            })
            .map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, u64)> {
        self.0.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ParseOutcome {
    Success { consumed: usize, bindings: Bindings },
    Failure { reason: FailureReason, at: usize },
}

impl ParseOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, ParseOutcome::Success { .. })
    }

    pub fn failure_reason(&self) -> Option<&FailureReason> {
        match self {
            ParseOutcome::Failure { reason, .. } => Some(reason),
            ParseOutcome::Success { .. } => None,
        }
    }

    /// Applies the acceptance mode to an entry-level outcome.
    pub fn under_mode(self, input_len: usize, mode: AcceptMode) -> ParseOutcome {
        match self {
            ParseOutcome::Success { consumed, .. }
                if mode == AcceptMode::Strict && consumed < input_len =>
            {
                ParseOutcome::Failure {
                    reason: FailureReason::TrailingBytes,
                    at: consumed,
                }
            }
            other => other,
        }
    }
}

impl fmt::Display for ParseOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseOutcome::Success { consumed, bindings } => {
                write!(f, "Success consumed={consumed}")?;
                for (k, v) in bindings.iter() {
                    write!(f, " {k}={v}")?;
                }
                Ok(())
            }
            ParseOutcome::Failure { reason, at } => write!(f, "Failure {reason} at {at}"),
        }
    }
}

/// Result of the acceptance predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub accepted: bool,
    pub outcome: ParseOutcome,
}

struct Failure {
    reason: FailureReason,
    at: usize,
}

fn fail<T>(reason: FailureReason, at: usize) -> Result<T, Failure> {
    Err(Failure { reason, at })
}

/// Parses `input[pos..]` as the named type with the given arguments.
///
/// # Panics
/// If `type_name` is not defined in `spec`.
pub fn parse_type(
    spec: &Spec,
    type_name: &str,
    args: &[u64],
    input: &[u8],
    pos: usize,
) -> ParseOutcome {
    let def = spec
        .get(type_name)
        .unwrap_or_else(|| panic!("type `{type_name}` is not defined"));
    let mut run = Interp {
        spec,
        input,
        bindings: Vec::new(),
    };
    match run.def(def, args, pos, "") {
        Ok(end) => ParseOutcome::Success {
            consumed: end - pos,
            bindings: Bindings(run.bindings),
        },
        Err(Failure { reason, at }) => ParseOutcome::Failure { reason, at },
    }
}

/// Whether the spec's entry type accepts `input` under `mode`.
pub fn validate(spec: &Spec, input: &[u8], mode: AcceptMode) -> Validation {
    let outcome =
        parse_type(spec, spec.entry_name(), &[], input, 0).under_mode(input.len(), mode);
    Validation {
        accepted: outcome.is_success(),
        outcome,
    }
}

/// Shorthand for `validate(..).accepted`.
pub fn accepts(spec: &Spec, input: &[u8], mode: AcceptMode) -> bool {
    validate(spec, input, mode).accepted
}

struct Interp<'s, 'i> {
    spec: &'s Spec,
    input: &'i [u8],
    bindings: Vec<(String, u64)>,
}

impl Interp<'_, '_> {
    fn read(&self, kind: IntKind, pos: usize) -> Result<u64, Failure> {
        let end = pos + kind.bytes();
        if end > self.input.len() {
            return fail(FailureReason::InsufficientInput, pos);
        }
        Ok(decode_int(&self.input[pos..end], kind).expect("slice has the kind's width"))
    }

    fn check(&self, env: &Env, field: &FieldDecl, at: usize) -> Result<(), Failure> {
        match &field.constraint {
            Some(c) if !eval::holds(&self.scope(env), c) => fail(
                FailureReason::ConstraintViolated(field.name.name.clone()),
                at,
            ),
            _ => Ok(()),
        }
    }

    fn scope<'a>(&'a self, env: &'a Env) -> impl Fn(&str) -> Option<u64> + 'a {
        move |name: &str| env.lookup(name).or_else(|| self.spec.enum_constant(name))
    }

    fn bind(&mut self, env: &mut Env, prefix: &str, name: &str, value: u64) {
        env.bind(name, value);
        self.bindings.push((format!("{prefix}{name}"), value));
    }

    fn def(
        &mut self,
        def: &TypeDef,
        args: &[u64],
        pos: usize,
        prefix: &str,
    ) -> Result<usize, Failure> {
        let mut env = Env::new();
        for (p, v) in def.params.iter().zip(args) {
            env.bind(&p.name.name, *v);
        }
        match &def.body {
            TypeBody::Struct(fields) => {
                let mut pos = pos;
                for group in field_groups(fields) {
                    pos = match group {
                        FieldGroup::Single(i) => self.field(&fields[i], &mut env, pos, prefix)?,
                        FieldGroup::Bits { kind, members } => {
                            let container = self.read(kind, pos)?;
                            let after = pos + kind.bytes();
                            for (i, shift, width) in members {
                                let f = &fields[i];
                                let v = (container >> shift) & (u64::MAX >> (64 - width));
                                self.bind(&mut env, prefix, &f.name.name, v);
                                self.check(&env, f, after)?;
                            }
                            after
                        }
                    };
                }
                Ok(pos)
            }
            TypeBody::Casetype { scrutinee, cases } => {
                let tag = eval::eval_int_within(&self.scope(&env), scrutinee, u64::MAX);
                match tag.and_then(|t| cases.iter().find(|c| c.tag == t)) {
                    Some(case) => self.field(&case.field, &mut env, pos, prefix),
                    None => fail(FailureReason::NoCaseMatched(def.name.name.clone()), pos),
                }
            }
            TypeBody::Enum {
                underlying,
                constants,
            } => {
                let v = self.read(*underlying, pos)?;
                let end = pos + underlying.bytes();
                if !constants.iter().any(|c| c.value == v) {
                    return fail(FailureReason::EnumOutOfRange(def.name.name.clone()), end);
                }
                Ok(end)
            }
            TypeBody::Unit => Ok(pos),
        }
    }

    fn field(
        &mut self,
        field: &FieldDecl,
        env: &mut Env,
        pos: usize,
        prefix: &str,
    ) -> Result<usize, Failure> {
        let name = &field.name.name;
        let end = match (&field.ty, &field.array) {
            (TypeRef::Int(kind), ArrayForm::None) => {
                let v = self.read(*kind, pos)?;
                self.bind(env, prefix, name, v);
                pos + kind.bytes()
            }
            (TypeRef::Int(_), array) => {
                let remaining = self.input.len() - pos;
                let n = match array {
                    ArrayForm::FixedBytes(n) => *n,
                    ArrayForm::ByteSize(e) => {
                        eval::eval_int_within(&self.scope(env), e, u64::MAX).ok_or_else(|| {
                            Failure {
                                reason: FailureReason::InvalidExpression(name.clone()),
                                at: pos,
                            }
                        })?
                    }
                    _ => remaining as u64,
                };
                if n > remaining as u64 {
                    return fail(FailureReason::InsufficientInput, pos);
                }
                self.bind(env, prefix, name, n);
                pos + n as usize
            }
            (TypeRef::Enum(enum_name), _) => {
                let def = self.spec.get(&enum_name.name).expect("checked reference");
                let TypeBody::Enum {
                    underlying,
                    constants,
                } = &def.body
                else {
                    unreachable!("checked enum reference");
                };
                let v = self.read(*underlying, pos)?;
                let end = pos + underlying.bytes();
                self.bind(env, prefix, name, v);
                if !constants.iter().any(|c| c.value == v) {
                    return fail(FailureReason::EnumOutOfRange(name.clone()), end);
                }
                end
            }
            (TypeRef::Named { name: tname, args }, _) => {
                let def = self.spec.get(&tname.name).expect("checked reference");
                let mut values = Vec::with_capacity(args.len());
                for (arg, param) in args.iter().zip(&def.params) {
                    match eval::eval_int_within(&self.scope(env), arg, param.kind.max_value()) {
                        Some(v) => values.push(v),
                        None => return fail(FailureReason::InvalidExpression(name.clone()), pos),
                    }
                }
                let nested = format!("{prefix}{name}.");
                return self.def(def, &values, pos, &nested);
            }
            (TypeRef::Unit, _) => return Ok(pos),
        };
        self.check(env, field, end)?;
        Ok(end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::check;
    use crate::samples;

    fn spec(text: &str) -> Spec {
        check(text).unwrap()
    }

    fn failure(reason: FailureReason, at: usize) -> ParseOutcome {
        ParseOutcome::Failure { reason, at }
    }

    #[test]
    fn message_examples() {
        let s = spec(samples::MESSAGE);
        let ok = parse_type(&s, "message", &[], &[0x2B, 0x00], 0);
        assert_eq!(
            ok,
            ParseOutcome::Success {
                consumed: 2,
                bindings: Bindings(vec![("first".into(), 43), ("second".into(), 0)]),
            }
        );
        assert_eq!(
            parse_type(&s, "message", &[], &[0x2A, 0x00], 0),
            failure(FailureReason::ConstraintViolated("first".into()), 1)
        );
        assert_eq!(
            parse_type(&s, "message", &[], &[0x2B], 0),
            failure(FailureReason::InsufficientInput, 1)
        );
    }

    #[test]
    fn option_mss() {
        let s = spec(samples::OPTION);
        let out = parse_type(&s, "OPTION", &[], &[0x02, 0x04, 0x05, 0xB4], 0);
        let ParseOutcome::Success { consumed, bindings } = out else {
            panic!("{out:?}")
        };
        assert_eq!(consumed, 4);
        assert_eq!(bindings.get("MaxSegSize"), Some(1460));
        assert_eq!(bindings.get("payload.case2.Length"), Some(4));
        assert_eq!(
            parse_type(&s, "OPTION", &[], &[0x03], 0),
            failure(FailureReason::ConstraintViolated("Kind".into()), 1)
        );
        assert!(accepts(&s, &[0x00], AcceptMode::Strict));
        assert!(accepts(&s, &[0x01], AcceptMode::Strict));
        assert!(!accepts(&s, &[0x02, 0x04, 0x05], AcceptMode::Strict));
    }

    #[test]
    fn casetype_without_match() {
        let s = spec(samples::OPTION);
        assert_eq!(
            parse_type(&s, "OPTION_OF_KIND", &[7], &[], 0),
            failure(FailureReason::NoCaseMatched("OPTION_OF_KIND".into()), 0)
        );
        assert!(parse_type(&s, "OPTION_OF_KIND", &[1], &[], 0).is_success());
    }

    #[test]
    fn validate_modes() {
        let s = spec(samples::MESSAGE);
        let v = validate(&s, &[0x2B, 0x00], AcceptMode::Strict);
        assert!(v.accepted);
        let v = validate(&s, &[0x2B, 0x00, 0x00], AcceptMode::Strict);
        assert!(!v.accepted);
        assert_eq!(v.outcome, failure(FailureReason::TrailingBytes, 2));
        assert!(accepts(&s, &[0x2B, 0x00, 0x00], AcceptMode::Prefix));
        let v = validate(&s, &[], AcceptMode::Strict);
        assert_eq!(v.outcome, failure(FailureReason::InsufficientInput, 0));
    }

    #[test]
    fn tlv_features() {
        let s = spec(samples::TLV);
        // Version=1 (001), Flags=0b00011 -> 0x23; Type=Short; Len=2; two value bytes; trailer.
        let pkt = [0x23, 0x01, 0x02, 0xAA, 0xBB, 0x01, 0x02, 0x03];
        let out = parse_type(&s, "TLV", &[], &pkt, 0);
        let ParseOutcome::Success { consumed, bindings } = &out else {
            panic!("{out:?}")
        };
        assert_eq!(*consumed, 8);
        assert_eq!(bindings.get("Version"), Some(1));
        assert_eq!(bindings.get("Flags"), Some(3));
        assert_eq!(bindings.get("Body.short.Value"), Some(2));
        assert_eq!(bindings.get("Trailer"), Some(3));

        let bad_version = [0x43, 0x00, 0x00];
        assert_eq!(
            parse_type(&s, "TLV", &[], &bad_version, 0),
            failure(FailureReason::ConstraintViolated("Version".into()), 1)
        );
        let flag_bit = [0x30, 0x00, 0x00];
        assert_eq!(
            parse_type(&s, "TLV", &[], &flag_bit, 0),
            failure(FailureReason::ConstraintViolated("Flags".into()), 1)
        );
        let bad_enum = [0x20, 0x09, 0x00];
        assert_eq!(
            parse_type(&s, "TLV", &[], &bad_enum, 0),
            failure(FailureReason::EnumOutOfRange("Type".into()), 2)
        );
        // Long body with Len < 2 violates its constraint.
        let short_long = [0x20, 0x02, 0x00, 0x00, 0x01];
        assert_eq!(
            parse_type(&s, "TLV", &[], &short_long, 0),
            failure(FailureReason::ConstraintViolated("Len".into()), 5)
        );
        // Long body, Len=3: one value byte.
        assert!(accepts(&s, &[0x20, 0x02, 0x00, 0x00, 0x03, 0xFF], AcceptMode::Strict));
        // Short body with Len > 4 fails the outer constraint.
        assert_eq!(
            parse_type(&s, "TLV", &[], &[0x20, 0x01, 0x05], 0),
            failure(FailureReason::ConstraintViolated("Len".into()), 3)
        );
    }

    #[test]
    fn array_length_underflow_is_invalid_expression() {
        let s = spec("typedef struct _s { UINT8 n; UINT8 d[:byte-size n - 2]; } s;");
        assert_eq!(
            parse_type(&s, "s", &[], &[1, 0, 0], 0),
            failure(FailureReason::InvalidExpression("d".into()), 1)
        );
        assert!(accepts(&s, &[3, 9], AcceptMode::Strict));
    }

    #[test]
    fn argument_must_fit_parameter() {
        let s = spec(
            "typedef struct _p(UINT8 n) { UINT8 d[:byte-size n]; } p;\n\
             typedef struct _s { UINT8 a; p(a + 250) x; } s;",
        );
        assert_eq!(
            parse_type(&s, "s", &[], &[10], 0),
            failure(FailureReason::InvalidExpression("x".into()), 1)
        );
        assert_eq!(
            parse_type(&s, "s", &[], &[1], 0),
            failure(FailureReason::InsufficientInput, 1)
        );
    }

    #[test]
    fn little_endian_and_unit_alias() {
        let s = spec("typedef unit Nothing;\ntypedef struct _s { UINT16 a { a == 0x0201 }; Nothing n; } s;");
        assert!(accepts(&s, &[0x01, 0x02], AcceptMode::Strict));
        assert!(!accepts(&s, &[0x02, 0x01], AcceptMode::Strict));
    }

    #[test]
    fn enum_entry_type() {
        let s = spec("UINT8 enum E { A = 1, B = 3 };");
        assert!(accepts(&s, &[3], AcceptMode::Strict));
        assert_eq!(
            validate(&s, &[2], AcceptMode::Strict).outcome,
            failure(FailureReason::EnumOutOfRange("E".into()), 1)
        );
    }

    /// Every input up to `len` bytes over a small alphabet.
    fn inputs(alphabet: &[u8], len: usize) -> Vec<Vec<u8>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..len {
            let mut next = Vec::new();
            for p in &frontier {
                for &b in alphabet {
                    let mut q: Vec<u8> = p.clone();
                    q.push(b);
                    next.push(q);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn insufficient_input_is_prefix_monotone() {
        for (_, text) in samples::ALL {
            let s = spec(text);
            for input in inputs(&[0x00, 0x01, 0x02, 0x2B, 0xFF], 4) {
                let out = parse_type(&s, s.entry_name(), &[], &input, 0);
                if out.failure_reason() == Some(&FailureReason::InsufficientInput) {
                    for k in 0..input.len() {
                        let p = parse_type(&s, s.entry_name(), &[], &input[..k], 0);
                        assert_eq!(
                            p.failure_reason(),
                            Some(&FailureReason::InsufficientInput),
                            "{input:?}[..{k}]"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn outcomes_stay_within_input() {
        for (_, text) in samples::ALL {
            let s = spec(text);
            for input in inputs(&[0x00, 0x02, 0x2B, 0xFF], 4) {
                match parse_type(&s, s.entry_name(), &[], &input, 0) {
                    ParseOutcome::Success { consumed, .. } => assert!(consumed <= input.len()),
                    ParseOutcome::Failure { at, .. } => assert!(at <= input.len()),
                }
            }
        }
    }
}
