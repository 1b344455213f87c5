//! Coverage-guided test generation.
//!
//! Trace prefixes are explored depth first, outcomes in ascending order.
//! At each prefix the solver is asked, per goal, for packets whose run
//! starts with that prefix; distinct packets are harvested with blocking
//! clauses up to the quota. An unsatisfiable goal is dropped for the whole
//! subtree, since extending the prefix only adds constraints. Every packet
//! is checked against the interpreter before it is kept.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::ast::Spec;
use crate::corpus::{dedupe, Label, TestPacket};
use crate::interp::{validate, AcceptMode};
use crate::smt::{build_query, parse_model, ModelError, QueryKind, QuerySpec};
use crate::solver::{SolverConfig, SolverVerdict};
use crate::specialize::{replay, specialize, BranchKind, FirstOrderProgram};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GenConfig {
    /// Longest trace prefix explored.
    pub branch_depth: usize,
    /// Packets harvested per goal at each prefix.
    pub quota: usize,
    pub max_tests: usize,
    pub mode: AcceptMode,
    pub polarity: Polarity,
    /// Unknown verdicts tolerated before generation stops.
    pub unknown_budget: usize,
    /// Input size bound asserted while harvesting. An unsatisfiable goal is
    /// re-asked without it before its subtree is pruned.
    pub size_bound: Option<usize>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            branch_depth: 100,
            quota: 2,
            max_tests: 200,
            mode: AcceptMode::Strict,
            polarity: Polarity::Both,
            unknown_budget: 10,
            size_bound: Some(64),
        }
    }
}

/// One solver goal used during generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    Positive,
    /// The parser fails.
    NegativeFailed,
    /// The parser succeeds but leaves input over (strict mode only).
    NegativeTrailing,
}

impl Goal {
    fn kind(self) -> QueryKind<'static> {
        match self {
            Goal::Positive => QueryKind::Positive,
            Goal::NegativeFailed => QueryKind::NegativeFailed,
            Goal::NegativeTrailing => QueryKind::NegativeTrailing,
        }
    }

    fn label(self) -> Label {
        match self {
            Goal::Positive => Label::Positive,
            _ => Label::Negative,
        }
    }

    pub fn name(self) -> &'static str {
        self.kind().label()
    }
}

/// What the solver said about one goal at one prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeRecord {
    pub prefix: Vec<u32>,
    pub goal: Goal,
    /// `sat`, `unsat`, `unknown`, or `sat (unbounded)` when a model exists
    /// only above the size bound.
    pub verdict: String,
    pub packets: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchCoverage {
    pub id: usize,
    pub kind: BranchKind,
    pub label: String,
    pub arity: usize,
    /// Outcomes taken by at least one emitted packet.
    pub hit: Vec<u32>,
    /// Outcomes proven reachable by a satisfiable prefix query.
    pub realizable: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub branches: Vec<BranchCoverage>,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GenReport {
    pub packets: Vec<TestPacket>,
    pub coverage: CoverageReport,
    /// Verdict of each goal at the empty prefix.
    pub root: Vec<(Goal, String)>,
    pub unknowns: usize,
    /// Generation stopped because the unknown budget ran out.
    pub budget_exceeded: bool,
    /// Generation stopped at `max_tests`.
    pub truncated: bool,
    pub warnings: Vec<String>,
}

impl GenReport {
    /// True when some query went unanswered, so the corpus may be partial.
    pub fn incomplete(&self) -> bool {
        self.unknowns > 0 || self.budget_exceeded
    }

    /// The root verdict for `goal`, if it was asked.
    pub fn root_verdict(&self, goal: Goal) -> Option<&str> {
        self.root
            .iter()
            .find(|(g, _)| *g == goal)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Error)]
pub enum TestgenError {
    /// The solver and the interpreter disagree; the encoding is wrong.
    #[error("encoder bug: {0}")]
    EncoderBug(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Generates a labeled corpus for the spec's entry type.
pub fn gen_tests(spec: &Spec, cfg: &GenConfig, solver: &SolverConfig) -> Result<GenReport, TestgenError> {
    let program = specialize(spec);
    let mut goals = Vec::new();
    if cfg.polarity != Polarity::Negative {
        goals.push(Goal::Positive);
    }
    if cfg.polarity != Polarity::Positive {
        goals.push(Goal::NegativeFailed);
        if cfg.mode == AcceptMode::Strict {
            goals.push(Goal::NegativeTrailing);
        }
    }
    let mut run = Run {
        spec,
        program: &program,
        cfg,
        solver,
        packets: Vec::new(),
        seen: HashSet::new(),
        nodes: Vec::new(),
        realizable: BTreeMap::new(),
        unknowns: 0,
        budget_exceeded: false,
        truncated: false,
        warnings: Vec::new(),
    };
    run.explore(&mut Vec::new(), &goals)?;

    let packets = dedupe(std::mem::take(&mut run.packets));
    let mut hit: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    for p in &packets {
        let r = replay(&program, &p.bytes, cfg.mode);
        for (b, o) in r.branches.iter().zip(&r.trace) {
            hit.entry(b.0).or_default().insert(*o);
        }
    }
    let branches = program
        .branches
        .iter()
        .map(|b| BranchCoverage {
            id: b.id.0,
            kind: b.kind,
            label: b.label.clone(),
            arity: b.arity,
            hit: hit.get(&b.id.0).map(|s| s.iter().copied().collect()).unwrap_or_default(),
            realizable: run
                .realizable
                .get(&b.id.0)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default(),
        })
        .collect();
    let root = run
        .nodes
        .iter()
        .filter(|n| n.prefix.is_empty())
        .map(|n| (n.goal, n.verdict.clone()))
        .collect();
    Ok(GenReport {
        packets,
        coverage: CoverageReport {
            branches,
            nodes: run.nodes,
        },
        root,
        unknowns: run.unknowns,
        budget_exceeded: run.budget_exceeded,
        truncated: run.truncated,
        warnings: run.warnings,
    })
}

struct Run<'a> {
    spec: &'a Spec,
    program: &'a FirstOrderProgram,
    cfg: &'a GenConfig,
    solver: &'a SolverConfig,
    packets: Vec<TestPacket>,
    seen: HashSet<Vec<u8>>,
    nodes: Vec<NodeRecord>,
    realizable: BTreeMap<usize, BTreeSet<u32>>,
    unknowns: usize,
    budget_exceeded: bool,
    truncated: bool,
    warnings: Vec<String>,
}

enum Harvest {
    Sat(usize),
    /// Satisfiable only above the size bound.
    Unbounded,
    Unsat,
    Unknown,
}

impl Run<'_> {
    fn stopped(&self) -> bool {
        self.budget_exceeded || self.truncated
    }

    fn query(&self, goal: Goal, prefix: &[u32], blocking: &[Vec<u8>], bounded: bool) -> QuerySpec<'static> {
        let mut q = QuerySpec::new(goal.kind(), self.cfg.mode).with_prefix(prefix);
        q.blocking = blocking.to_vec();
        if bounded {
            q.max_size = self.cfg.size_bound;
        }
        q
    }

    fn explore(&mut self, prefix: &mut Vec<u32>, goals: &[Goal]) -> Result<(), TestgenError> {
        if goals.is_empty() || self.stopped() {
            return Ok(());
        }
        // First queries of each goal are independent; solve them together.
        let scripts: Vec<_> = goals
            .iter()
            .map(|g| build_query(&self.query(*g, prefix, &[], true), self.program))
            .collect();
        let first = self.solver.run_many(&scripts);

        let mut live = Vec::new();
        for (goal, verdict) in goals.iter().zip(first) {
            if self.stopped() {
                break;
            }
            let result = self.harvest(*goal, prefix, verdict)?;
            let verdict = match result {
                Harvest::Sat(_) => "sat",
                Harvest::Unbounded => "sat (unbounded)",
                Harvest::Unsat => "unsat",
                Harvest::Unknown => "unknown",
            };
            let packets = match result {
                Harvest::Sat(n) => n,
                _ => 0,
            };
            self.nodes.push(NodeRecord {
                prefix: prefix.clone(),
                goal: *goal,
                verdict: verdict.to_string(),
                packets,
            });
            if matches!(result, Harvest::Sat(_) | Harvest::Unbounded) {
                live.push(*goal);
            }
        }
        if live.is_empty() {
            return Ok(());
        }
        if let Some(&last) = prefix.last() {
            // The prefix itself is realizable, so its last outcome is too.
            let b = self.branch_at(&prefix[..prefix.len() - 1], last);
            if let Some(b) = b {
                self.realizable.entry(b).or_default().insert(last);
            }
        }
        if prefix.len() >= self.cfg.branch_depth {
            return Ok(());
        }
        let Some(arity) = self.program.next_arity(prefix) else {
            return Ok(());
        };
        for o in 0..arity as u32 {
            if self.stopped() {
                break;
            }
            prefix.push(o);
            self.explore(prefix, &live)?;
            prefix.pop();
        }
        Ok(())
    }

    /// The branch reached after `prefix` that can take outcome `o`.
    fn branch_at(&self, prefix: &[u32], o: u32) -> Option<usize> {
        self.program
            .next_branches(prefix)
            .into_iter()
            .find(|b| (o as usize) < self.program.branch(*b).arity)
            .map(|b| b.0)
    }

    fn note_unknown(&mut self, what: String) {
        self.unknowns += 1;
        self.warnings.push(what);
        if self.unknowns > self.cfg.unknown_budget {
            self.budget_exceeded = true;
        }
    }

    fn harvest(&mut self, goal: Goal, prefix: &[u32], first: SolverVerdict) -> Result<Harvest, TestgenError> {
        let mut blocking: Vec<Vec<u8>> = Vec::new();
        let mut verdict = first;
        let mut found = 0;
        loop {
            match verdict {
                SolverVerdict::Sat(transcript) => {
                    let plan = crate::smt::EvalPlan::default();
                    let bytes = match parse_model(&transcript, &plan) {
                        Ok(b) => b,
                        Err(ModelError::ModelTooLarge { size, cap }) => {
                            self.warnings.push(format!(
                                "{} at {prefix:?}: model of {size} bytes exceeds cap {cap}",
                                goal.name()
                            ));
                            return Ok(if found > 0 { Harvest::Sat(found) } else { Harvest::Unbounded });
                        }
                        Err(e) => return Err(TestgenError::Solver(e.to_string())),
                    };
                    self.admit(goal, prefix, &bytes)?;
                    found += 1;
                    blocking.push(bytes);
                    if found >= self.cfg.quota || self.stopped() {
                        return Ok(Harvest::Sat(found));
                    }
                }
                SolverVerdict::Unsat if found > 0 => return Ok(Harvest::Sat(found)),
                SolverVerdict::Unsat => {
                    if self.cfg.size_bound.is_none() {
                        return Ok(Harvest::Unsat);
                    }
                    let script = build_query(&self.query(goal, prefix, &[], false), self.program);
                    return match self.solver.run(&script) {
                        SolverVerdict::Unsat => Ok(Harvest::Unsat),
                        SolverVerdict::Sat(_) => Ok(Harvest::Unbounded),
                        SolverVerdict::Unknown(_) => {
                            self.note_unknown(format!("{} at {prefix:?}: unknown", goal.name()));
                            Ok(Harvest::Unknown)
                        }
                        SolverVerdict::Crash { stderr, .. } => Err(TestgenError::Solver(stderr)),
                    };
                }
                SolverVerdict::Unknown(reason) => {
                    self.note_unknown(format!("{} at {prefix:?}: unknown ({reason:?})", goal.name()));
                    return Ok(if found > 0 { Harvest::Sat(found) } else { Harvest::Unknown });
                }
                SolverVerdict::Crash { stderr, .. } => return Err(TestgenError::Solver(stderr)),
            }
            let script = build_query(&self.query(goal, prefix, &blocking, true), self.program);
            verdict = self.solver.run(&script);
        }
    }

    /// Verifies a model against the interpreter and replay, then records it.
    fn admit(&mut self, goal: Goal, prefix: &[u32], bytes: &[u8]) -> Result<(), TestgenError> {
        let accepted = validate(self.spec, bytes, self.cfg.mode).accepted;
        let label = goal.label();
        if Label::from_accepted(accepted) != label {
            return Err(TestgenError::EncoderBug(format!(
                "{} query at prefix {prefix:?} produced {} which the interpreter labels {}",
                goal.name(),
                hex::encode(bytes),
                Label::from_accepted(accepted)
            )));
        }
        let r = replay(self.program, bytes, self.cfg.mode);
        if !r.trace.starts_with(prefix) {
            return Err(TestgenError::EncoderBug(format!(
                "packet {} replays with trace {:?}, outside prefix {prefix:?}",
                hex::encode(bytes),
                r.trace
            )));
        }
        if self.seen.insert(bytes.to_vec()) {
            if self.seen.len() > self.cfg.max_tests {
                self.seen.remove(bytes);
                self.truncated = true;
                return Ok(());
            }
            self.packets.push(TestPacket::new(
                bytes.to_vec(),
                label,
                r.trace,
                format!("{} prefix={prefix:?}", goal.name()),
            ));
            if self.seen.len() >= self.cfg.max_tests {
                self.truncated = true;
            }
        }
        Ok(())
    }
}
