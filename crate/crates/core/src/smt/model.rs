use thiserror::Error;

use super::query::{Dialect, EvalPlan};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed solver output: {0}")]
    MalformedSolverOutput(String),
    #[error("model value for {what} is out of range: {value}")]
    ModelValueOutOfRange { what: String, value: String },
    #[error("model input of {size} bytes exceeds the cap of {cap} bytes")]
    ModelTooLarge { size: String, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexp(text: &str) -> Option<Sexp> {
    fn go(tokens: &[String], i: &mut usize) -> Option<Sexp> {
        let t = tokens.get(*i)?;
        *i += 1;
        match t.as_str() {
            "(" => {
                let mut items = Vec::new();
                loop {
                    match tokens.get(*i)?.as_str() {
                        ")" => {
                            *i += 1;
                            return Some(Sexp::List(items));
                        }
                        _ => items.push(go(tokens, i)?),
                    }
                }
            }
            ")" => None,
            atom => Some(Sexp::Atom(atom.to_string())),
        }
    }
    let tokens: Vec<String> = text
        .replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let mut i = 0;
    let out = go(&tokens, &mut i)?;
    (i == tokens.len()).then_some(out)
}

fn int_of(s: &Sexp) -> Option<i128> {
    match s {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), Sexp::Atom(n)] if minus == "-" => n.parse::<i128>().ok().map(|v| -v),
            _ => None,
        },
    }
}

/// Reads one integer answer in the given dialect.
pub fn parse_value(answer: &str, dialect: Dialect) -> Result<i128, ModelError> {
    let malformed = || ModelError::MalformedSolverOutput(answer.trim().to_string());
    let sexp = parse_sexp(answer).ok_or_else(malformed)?;
    let value = match dialect {
        Dialect::Eval => int_of(&sexp),
        Dialect::GetValue => match &sexp {
            Sexp::List(pairs) => match pairs.as_slice() {
                [Sexp::List(pair)] if pair.len() == 2 => int_of(&pair[1]),
                _ => None,
            },
            Sexp::Atom(_) => None,
        },
    };
    value.ok_or_else(malformed)
}

/// Number of parentheses opened minus closed; zero when an answer is complete.
pub fn paren_depth(text: &str) -> i64 {
    text.chars().fold(0, |d, c| match c {
        '(' => d + 1,
        ')' => d - 1,
        _ => d,
    })
}

/// Reconstructs a packet from a transcript of `sat`, the size answer, and
/// one answer per byte.
pub fn parse_model(transcript: &[String], plan: &EvalPlan) -> Result<Vec<u8>, ModelError> {
    let (verdict, answers) = transcript
        .split_first()
        .ok_or_else(|| ModelError::MalformedSolverOutput("empty transcript".into()))?;
    if verdict.trim() != "sat" {
        return Err(ModelError::MalformedSolverOutput(format!(
            "expected `sat`, found `{}`",
            verdict.trim()
        )));
    }
    let size_answer = answers
        .first()
        .ok_or_else(|| ModelError::MalformedSolverOutput("missing input size".into()))?;
    let size = parse_value(size_answer, plan.dialect)?;
    if size < 0 {
        return Err(ModelError::ModelValueOutOfRange {
            what: "input size".into(),
            value: size.to_string(),
        });
    }
    if size > plan.max_packet as i128 {
        return Err(ModelError::ModelTooLarge {
            size: size.to_string(),
            cap: plan.max_packet,
        });
    }
    let size = size as usize;
    if answers.len() < size + 1 {
        return Err(ModelError::MalformedSolverOutput(format!(
            "expected {size} byte values, found {}",
            answers.len() - 1
        )));
    }
    answers[1..=size]
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let v = parse_value(a, plan.dialect)?;
            u8::try_from(v).map_err(|_| ModelError::ModelValueOutOfRange {
                what: format!("Input {i}"),
                value: v.to_string(),
            })
        })
        .collect()
}
