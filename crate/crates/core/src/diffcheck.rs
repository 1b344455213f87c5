//! Differential testing and equivalence of two specs.
//!
//! One direction asks for a packet the left spec accepts and the right spec
//! rejects. Both programs read the same input from the same initial state.
//! Two unsatisfiable directions mean the specs accept the same packets.

use serde::Serialize;
use thiserror::Error;

use crate::ast::Spec;
use crate::corpus::{Label, TestPacket};
use crate::interp::{validate, AcceptMode, ParseOutcome};
use crate::smt::{build_query, parse_model, EvalPlan, ModelError, QueryKind, QuerySpec};
use crate::solver::{SolverConfig, SolverVerdict};
use crate::specialize::{specialize, FirstOrderProgram};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiffConfig {
    pub mode: AcceptMode,
    pub max_witnesses: usize,
    /// Input size bound asserted while harvesting witnesses. An
    /// unsatisfiable bounded query is re-asked without it.
    pub size_bound: Option<usize>,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            mode: AcceptMode::Strict,
            max_witnesses: 5,
            size_bound: Some(64),
        }
    }
}

/// Result of one direction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Direction {
    /// Distinguishing packets exist. The list is empty only when every
    /// model was too large to reify.
    Sat { witnesses: Vec<TestPacket> },
    Unsat,
    Unknown { reason: String },
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::Sat { .. } => "sat",
            Direction::Unsat => "unsat",
            Direction::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result")]
pub enum DiffResult {
    Equivalent,
    /// The left spec accepts packets the right one rejects, not vice versa.
    LeftPermissive { witnesses: Vec<TestPacket> },
    RightPermissive { witnesses: Vec<TestPacket> },
    Incomparable {
        left: Vec<TestPacket>,
        right: Vec<TestPacket>,
    },
    Inconclusive { left: Direction, right: Direction },
}

impl DiffResult {
    pub fn name(&self) -> &'static str {
        match self {
            DiffResult::Equivalent => "Equivalent",
            DiffResult::LeftPermissive { .. } => "LeftPermissive",
            DiffResult::RightPermissive { .. } => "RightPermissive",
            DiffResult::Incomparable { .. } => "Incomparable",
            DiffResult::Inconclusive { .. } => "Inconclusive",
        }
    }

    /// Combines the verdicts of left-not-right and right-not-left.
    pub fn from_directions(left: Direction, right: Direction) -> DiffResult {
        match (left, right) {
            (Direction::Unsat, Direction::Unsat) => DiffResult::Equivalent,
            (Direction::Sat { witnesses }, Direction::Unsat) => DiffResult::LeftPermissive { witnesses },
            (Direction::Unsat, Direction::Sat { witnesses }) => DiffResult::RightPermissive { witnesses },
            (Direction::Sat { witnesses: left }, Direction::Sat { witnesses: right }) => {
                DiffResult::Incomparable { left, right }
            }
            (left, right) => DiffResult::Inconclusive { left, right },
        }
    }

    /// The same comparison with the arguments swapped.
    pub fn mirror(self) -> DiffResult {
        match self {
            DiffResult::Equivalent => DiffResult::Equivalent,
            DiffResult::LeftPermissive { witnesses } => DiffResult::RightPermissive { witnesses },
            DiffResult::RightPermissive { witnesses } => DiffResult::LeftPermissive { witnesses },
            DiffResult::Incomparable { left, right } => DiffResult::Incomparable {
                left: right,
                right: left,
            },
            DiffResult::Inconclusive { left, right } => DiffResult::Inconclusive {
                left: right,
                right: left,
            },
        }
    }

    /// All witnesses, left-accepted ones first.
    pub fn witnesses(&self) -> Vec<&TestPacket> {
        match self {
            DiffResult::LeftPermissive { witnesses } | DiffResult::RightPermissive { witnesses } => {
                witnesses.iter().collect()
            }
            DiffResult::Incomparable { left, right } => left.iter().chain(right).collect(),
            DiffResult::Inconclusive { left, right } => [left, right]
                .into_iter()
                .filter_map(|d| match d {
                    Direction::Sat { witnesses } => Some(witnesses),
                    _ => None,
                })
                .flatten()
                .collect(),
            DiffResult::Equivalent => Vec::new(),
        }
    }

    /// Process exit code used by the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            DiffResult::Equivalent => 0,
            DiffResult::LeftPermissive { .. } => 10,
            DiffResult::RightPermissive { .. } => 11,
            DiffResult::Incomparable { .. } => 12,
            DiffResult::Inconclusive { .. } => 20,
        }
    }
}

#[derive(Debug, Error)]
pub enum DiffError {
    /// A model does not distinguish the specs under the interpreter.
    #[error("encoder bug: {0}")]
    EncoderBug(String),
    #[error("malformed solver output: {0}")]
    Model(#[from] ModelError),
}

/// Packets `left` accepts and `right` rejects, up to `max_witnesses`.
pub fn diff_one_direction(
    left: &Spec,
    right: &Spec,
    cfg: &DiffConfig,
    solver: &SolverConfig,
) -> Result<Direction, DiffError> {
    let p1 = specialize(left);
    let p2 = specialize(right);
    Harvester {
        left,
        right,
        p1: &p1,
        p2: &p2,
        cfg,
        solver,
    }
    .run()
}

/// Compares two specs in both directions, concurrently.
pub fn equiv(left: &Spec, right: &Spec, cfg: &DiffConfig, solver: &SolverConfig) -> Result<DiffResult, DiffError> {
    let (l, r) = std::thread::scope(|s| {
        let l = s.spawn(|| diff_one_direction(left, right, cfg, solver));
        let r = diff_one_direction(right, left, cfg, solver);
        (l.join().expect("diff thread panicked"), r)
    });
    Ok(DiffResult::from_directions(l?, r?))
}

/// How each spec handles one packet, for locating where they diverge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub left: ParseOutcome,
    pub right: ParseOutcome,
    /// The first binding whose path or value differs, if both got that far.
    pub first_difference: Option<String>,
}

pub fn explain(left: &Spec, right: &Spec, bytes: &[u8], mode: AcceptMode) -> Divergence {
    let l = validate(left, bytes, mode).outcome;
    let r = validate(right, bytes, mode).outcome;
    let first_difference = match (&l, &r) {
        (ParseOutcome::Success { bindings: a, .. }, ParseOutcome::Success { bindings: b, .. }) => a
            .iter()
            .zip(b.iter())
            .find(|(x, y)| x != y)
            .map(|(x, y)| format!("{}={} vs {}={}", x.0, x.1, y.0, y.1)),
        _ => None,
    };
    Divergence {
        left: l,
        right: r,
        first_difference,
    }
}

struct Harvester<'a> {
    left: &'a Spec,
    right: &'a Spec,
    p1: &'a FirstOrderProgram,
    p2: &'a FirstOrderProgram,
    cfg: &'a DiffConfig,
    solver: &'a SolverConfig,
}

impl Harvester<'_> {
    fn script(&self, blocking: &[Vec<u8>], bounded: bool) -> crate::smt::SmtScript {
        let mut q = QuerySpec::new(QueryKind::DiffLeftNotRight(self.p2), self.cfg.mode);
        q.blocking = blocking.to_vec();
        if bounded {
            q.max_size = self.cfg.size_bound;
        }
        build_query(&q, self.p1)
    }

    fn run(&self) -> Result<Direction, DiffError> {
        let mut witnesses = Vec::new();
        let mut blocking = Vec::new();
        let mut bounded = self.cfg.size_bound.is_some();
        loop {
            match self.solver.run(&self.script(&blocking, bounded)) {
                SolverVerdict::Sat(transcript) => {
                    let bytes = match parse_model(&transcript, &EvalPlan::default()) {
                        Ok(b) => b,
                        Err(ModelError::ModelTooLarge { .. }) => return Ok(Direction::Sat { witnesses }),
                        Err(e) => return Err(e.into()),
                    };
                    witnesses.push(self.verify(bytes.clone())?);
                    blocking.push(bytes);
                    if witnesses.len() >= self.cfg.max_witnesses {
                        return Ok(Direction::Sat { witnesses });
                    }
                }
                SolverVerdict::Unsat if !witnesses.is_empty() => return Ok(Direction::Sat { witnesses }),
                SolverVerdict::Unsat if bounded => bounded = false,
                SolverVerdict::Unsat => return Ok(Direction::Unsat),
                SolverVerdict::Unknown(reason) if witnesses.is_empty() => {
                    return Ok(Direction::Unknown {
                        reason: format!("{reason:?}"),
                    })
                }
                SolverVerdict::Unknown(_) => return Ok(Direction::Sat { witnesses }),
                SolverVerdict::Crash { stderr, status } => {
                    return Ok(Direction::Unknown {
                        reason: format!("solver crashed ({status:?}): {}", stderr.trim()),
                    })
                }
            }
        }
    }

    fn verify(&self, bytes: Vec<u8>) -> Result<TestPacket, DiffError> {
        let l = validate(self.left, &bytes, self.cfg.mode);
        let r = validate(self.right, &bytes, self.cfg.mode);
        if !l.accepted || r.accepted {
            return Err(DiffError::EncoderBug(format!(
                "witness {} does not distinguish the specs: left {}, right {}",
                hex::encode(&bytes),
                l.outcome,
                r.outcome
            )));
        }
        Ok(TestPacket::new(bytes, Label::Positive, Vec::new(), "diff left-not-right".into()))
    }
}
