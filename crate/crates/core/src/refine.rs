//! Candidate refinement.
//!
//! Candidates come from a provider, labels from a labeler. Each round asks
//! for one candidate, admits it if it checks, generates tests for newly
//! admitted candidates and distinguishing packets for new pairs of
//! survivors, labels everything new, and drops every candidate that
//! disagrees with a labeled packet. Once the provider is exhausted a last
//! augment and prune pass runs.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::Spec;
use crate::corpus::{Label, TestPacket};
use crate::diffcheck::{equiv, DiffConfig, DiffResult};
use crate::frontend::check;
use crate::interp::{validate, AcceptMode};
use crate::solver::{split_command, SolverConfig};
use crate::testgen::{gen_tests, GenConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub name: String,
    pub text: String,
}

/// One entry of the state log handed back to the provider.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum LogRecord {
    SyntaxError {
        candidate: String,
        diagnostics: Vec<String>,
    },
    FailingTest {
        candidate: String,
        packet: String,
        expected: Label,
        got: Label,
    },
}

/// Renders the log as line-delimited JSON.
pub fn render_log(log: &[LogRecord]) -> String {
    log.iter()
        .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
        .collect()
}

pub trait CandidateProvider {
    /// The next candidate, or `None` once exhausted.
    fn next_candidate(&mut self, log: &[LogRecord]) -> Result<Option<Candidate>, String>;
}

pub trait Labeler {
    fn label(&mut self, packet: &[u8]) -> Result<Label, String>;
}

/// Yields the `.3d` files of a directory in file-name order.
pub struct DirProvider {
    files: std::vec::IntoIter<PathBuf>,
}

impl DirProvider {
    pub fn new(dir: &Path) -> std::io::Result<DirProvider> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e == "3d"));
        files.sort();
        Ok(DirProvider {
            files: files.into_iter(),
        })
    }
}

impl CandidateProvider for DirProvider {
    fn next_candidate(&mut self, _log: &[LogRecord]) -> Result<Option<Candidate>, String> {
        let Some(path) = self.files.next() else {
            return Ok(None);
        };
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Some(Candidate { name, text }))
    }
}

/// Yields candidates from a fixed list, for tests and embedding.
pub struct ListProvider(pub std::collections::VecDeque<Candidate>);

impl CandidateProvider for ListProvider {
    fn next_candidate(&mut self, _log: &[LogRecord]) -> Result<Option<Candidate>, String> {
        Ok(self.0.pop_front())
    }
}

/// Runs a command per request. The state log is written to its standard
/// input as line-delimited JSON and `TDFORGE_ROUND` holds the request
/// number. A candidate is read from standard output; empty output means
/// exhausted and a non-zero exit is a failure.
pub struct CommandProvider {
    argv: Vec<String>,
    calls: usize,
}

impl CommandProvider {
    pub fn new(command: &str) -> Result<CommandProvider, String> {
        Ok(CommandProvider {
            argv: split_command(command)?,
            calls: 0,
        })
    }
}

impl CandidateProvider for CommandProvider {
    fn next_candidate(&mut self, log: &[LogRecord]) -> Result<Option<Candidate>, String> {
        self.calls += 1;
        let out = run_with_stdin(&self.argv, render_log(log).as_bytes(), &[("TDFORGE_ROUND", self.calls.to_string())])?;
        if !out.status.success() {
            return Err(format!(
                "provider exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        let text = String::from_utf8(out.stdout).map_err(|e| format!("provider output is not UTF-8: {e}"))?;
        if text.trim().is_empty() {
            return Ok(None);
        }
        Ok(Some(Candidate {
            name: format!("candidate-{}", self.calls),
            text,
        }))
    }
}

/// Labels packets by running a trusted spec.
pub struct SpecLabeler {
    pub spec: Spec,
    pub mode: AcceptMode,
}

impl Labeler for SpecLabeler {
    fn label(&mut self, packet: &[u8]) -> Result<Label, String> {
        Ok(Label::from_accepted(validate(&self.spec, packet, self.mode).accepted))
    }
}

/// Runs a command with the packet on standard input; exit status 0 means
/// positive, any other exit status negative.
pub struct CommandLabeler {
    argv: Vec<String>,
}

impl CommandLabeler {
    pub fn new(command: &str) -> Result<CommandLabeler, String> {
        Ok(CommandLabeler {
            argv: split_command(command)?,
        })
    }
}

impl Labeler for CommandLabeler {
    fn label(&mut self, packet: &[u8]) -> Result<Label, String> {
        let out = run_with_stdin(&self.argv, packet, &[])?;
        match out.status.code() {
            Some(0) => Ok(Label::Positive),
            Some(_) => Ok(Label::Negative),
            None => Err(format!("labeler terminated by signal: {}", out.status)),
        }
    }
}

fn run_with_stdin(argv: &[String], input: &[u8], env: &[(&str, String)]) -> Result<std::process::Output, String> {
    let (program, args) = argv.split_first().ok_or("empty command")?;
    let mut child = Command::new(program)
        .args(args)
        .envs(env.iter().map(|(k, v)| (*k, v)))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot run `{program}`: {e}"))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = input.to_vec();
    // Written from a thread so a child that ignores its input cannot block us.
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let mut out_pipe = child.stdout.take().expect("piped stdout");
    let mut err_pipe = child.stderr.take().expect("piped stderr");
    let err_reader = std::thread::spawn(move || {
        let _ = err_pipe.read_to_end(&mut stderr);
        stderr
    });
    let _ = out_pipe.read_to_end(&mut stdout);
    let status = child.wait().map_err(|e| e.to_string())?;
    let _ = writer.join();
    let stderr = err_reader.join().unwrap_or_default();
    Ok(std::process::Output { status, stdout, stderr })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefineConfig {
    pub mode: AcceptMode,
    /// Provider requests before the final pass.
    pub max_rounds: usize,
    pub gen: GenConfig,
    pub diff: DiffConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            mode: AcceptMode::Strict,
            max_rounds: 15,
            gen: GenConfig {
                max_tests: 64,
                ..GenConfig::default()
            },
            diff: DiffConfig {
                max_witnesses: 2,
                ..DiffConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Survivor {
    pub candidate: Candidate,
    pub spec: Spec,
}

#[derive(Clone, Debug)]
pub struct LoopResult {
    pub candidates: Vec<Survivor>,
    /// Labeled packets in insertion order, seeds first.
    pub positives: Vec<TestPacket>,
    pub negatives: Vec<TestPacket>,
    pub log: Vec<LogRecord>,
    pub warnings: Vec<String>,
    pub rounds: usize,
}

impl LoopResult {
    /// Every labeled packet, positives first.
    pub fn labeled(&self) -> Vec<TestPacket> {
        self.positives.iter().chain(&self.negatives).cloned().collect()
    }
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("candidate provider failed: {0}")]
    ProviderFailure(String),
    #[error("labeler failed: {0}")]
    LabelerFailure(String),
    #[error("seed {packet} is labeled {given} but the labeler says {labeler}")]
    SeedMismatch {
        packet: String,
        given: Label,
        labeler: Label,
    },
    #[error("test generation failed: {0}")]
    Generation(String),
}

/// An error together with the log accumulated before it.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RefineFailure {
    pub error: RefineError,
    pub log: Vec<LogRecord>,
}

/// Splits `packets` by label, skipping duplicates of `known` and of each
/// other. A packet the labeler fails on is skipped with a warning.
pub fn label_inputs(
    packets: &[TestPacket],
    labeler: &mut dyn Labeler,
    known: &HashSet<Vec<u8>>,
    warnings: &mut Vec<String>,
) -> (Vec<TestPacket>, Vec<TestPacket>) {
    let mut seen = known.clone();
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for p in packets {
        if !seen.insert(p.bytes.clone()) {
            continue;
        }
        match labeler.label(&p.bytes) {
            Ok(label) => {
                let mut p = p.clone();
                p.label = label;
                match label {
                    Label::Positive => pos.push(p),
                    Label::Negative => neg.push(p),
                }
            }
            Err(e) => warnings.push(format!("packet {} skipped: {e}", hex::encode(&p.bytes))),
        }
    }
    (pos, neg)
}

/// The first labeled packet `spec` disagrees with, as (packet, expected).
pub fn first_inconsistency<'a>(
    spec: &Spec,
    positives: &'a [TestPacket],
    negatives: &'a [TestPacket],
    mode: AcceptMode,
) -> Option<(&'a TestPacket, Label)> {
    positives
        .iter()
        .map(|p| (p, Label::Positive))
        .chain(negatives.iter().map(|p| (p, Label::Negative)))
        .find(|(p, l)| Label::from_accepted(validate(spec, &p.bytes, mode).accepted) != *l)
}

pub fn run_loop(
    provider: &mut dyn CandidateProvider,
    labeler: &mut dyn Labeler,
    seeds: &[TestPacket],
    cfg: &RefineConfig,
    solver: &SolverConfig,
) -> Result<LoopResult, RefineFailure> {
    let mut state = State {
        cfg,
        solver,
        labeler,
        survivors: Vec::new(),
        tested: BTreeSet::new(),
        compared: BTreeSet::new(),
        positives: Vec::new(),
        negatives: Vec::new(),
        known: HashSet::new(),
        log: Vec::new(),
        warnings: Vec::new(),
    };
    if let Err(error) = state.seed(seeds) {
        return Err(RefineFailure { error, log: state.log });
    }
    let mut rounds = 0;
    let mut exhausted = false;
    while !exhausted && rounds < cfg.max_rounds {
        rounds += 1;
        let next = match provider.next_candidate(&state.log) {
            Ok(c) => c,
            Err(e) => {
                return Err(RefineFailure {
                    error: RefineError::ProviderFailure(e),
                    log: state.log,
                })
            }
        };
        match next {
            Some(c) => state.admit(c),
            None => exhausted = true,
        }
        if let Err(error) = state.augment_and_prune() {
            return Err(RefineFailure { error, log: state.log });
        }
    }
    if !exhausted {
        state
            .warnings
            .push(format!("stopped after {rounds} rounds with the provider not exhausted"));
    }
    // Final pass: survivors may have become comparable after later pruning.
    if let Err(error) = state.augment_and_prune() {
        return Err(RefineFailure { error, log: state.log });
    }
    Ok(LoopResult {
        candidates: state.survivors,
        positives: state.positives,
        negatives: state.negatives,
        log: state.log,
        warnings: state.warnings,
        rounds,
    })
}

struct State<'a> {
    cfg: &'a RefineConfig,
    solver: &'a SolverConfig,
    labeler: &'a mut dyn Labeler,
    survivors: Vec<Survivor>,
    /// Candidates whose generated tests are already labeled.
    tested: BTreeSet<String>,
    /// Pairs already compared.
    compared: BTreeSet<(String, String)>,
    positives: Vec<TestPacket>,
    negatives: Vec<TestPacket>,
    known: HashSet<Vec<u8>>,
    log: Vec<LogRecord>,
    warnings: Vec<String>,
}

impl State<'_> {
    fn seed(&mut self, seeds: &[TestPacket]) -> Result<(), RefineError> {
        for s in seeds {
            let label = self.labeler.label(&s.bytes).map_err(RefineError::LabelerFailure)?;
            if label != s.label {
                return Err(RefineError::SeedMismatch {
                    packet: hex::encode(&s.bytes),
                    given: s.label,
                    labeler: label,
                });
            }
            if self.known.insert(s.bytes.clone()) {
                match label {
                    Label::Positive => self.positives.push(s.clone()),
                    Label::Negative => self.negatives.push(s.clone()),
                }
            }
        }
        Ok(())
    }

    fn admit(&mut self, candidate: Candidate) {
        match check(&candidate.text) {
            Ok(spec) => {
                let mut name = candidate.name.clone();
                let mut n = 1;
                while self.survivors.iter().any(|s| s.candidate.name == name) || self.tested.contains(&name) {
                    n += 1;
                    name = format!("{}#{n}", candidate.name);
                }
                self.survivors.push(Survivor {
                    candidate: Candidate { name, ..candidate },
                    spec,
                });
            }
            Err(diags) => self.log.push(LogRecord::SyntaxError {
                candidate: candidate.name,
                diagnostics: diags.iter().map(|d| d.to_string()).collect(),
            }),
        }
    }

    fn augment_and_prune(&mut self) -> Result<(), RefineError> {
        let mut fresh: Vec<TestPacket> = Vec::new();
        for s in &self.survivors {
            if !self.tested.insert(s.candidate.name.clone()) {
                continue;
            }
            let gen = GenConfig {
                mode: self.cfg.mode,
                ..self.cfg.gen.clone()
            };
            let report = gen_tests(&s.spec, &gen, self.solver).map_err(|e| RefineError::Generation(e.to_string()))?;
            if report.incomplete() {
                self.warnings
                    .push(format!("test generation for {} was incomplete", s.candidate.name));
            }
            fresh.extend(report.packets.into_iter().map(|mut p| {
                p.query_kind = format!("{} of {}", p.query_kind, s.candidate.name);
                p
            }));
        }
        for i in 0..self.survivors.len() {
            for j in i + 1..self.survivors.len() {
                let (a, b) = (&self.survivors[i], &self.survivors[j]);
                let key = (a.candidate.name.clone(), b.candidate.name.clone());
                if !self.compared.insert(key) {
                    continue;
                }
                let diff = DiffConfig {
                    mode: self.cfg.mode,
                    ..self.cfg.diff.clone()
                };
                let result = equiv(&a.spec, &b.spec, &diff, self.solver).map_err(|e| RefineError::Generation(e.to_string()))?;
                if let DiffResult::Inconclusive { .. } = result {
                    self.warnings.push(format!(
                        "comparison of {} and {} was inconclusive",
                        a.candidate.name, b.candidate.name
                    ));
                }
                fresh.extend(result.witnesses().into_iter().map(|w| {
                    let mut w = w.clone();
                    w.query_kind = format!("diff of {} and {}", a.candidate.name, b.candidate.name);
                    w
                }));
            }
        }
        let (pos, neg) = label_inputs(&fresh, self.labeler, &self.known, &mut self.warnings);
        for p in pos.iter().chain(&neg) {
            self.known.insert(p.bytes.clone());
        }
        self.positives.extend(pos);
        self.negatives.extend(neg);

        let mode = self.cfg.mode;
        let (positives, negatives) = (&self.positives, &self.negatives);
        let log = &mut self.log;
        self.survivors.retain(|s| match first_inconsistency(&s.spec, positives, negatives, mode) {
            None => true,
            Some((p, expected)) => {
                log.push(LogRecord::FailingTest {
                    candidate: s.candidate.name.clone(),
                    packet: hex::encode(&p.bytes),
                    expected,
                    got: match expected {
                        Label::Positive => Label::Negative,
                        Label::Negative => Label::Positive,
                    },
                });
                false
            }
        });
        Ok(())
    }
}

/// Checks that every survivor accepts every positive and rejects every
/// negative.
pub fn check_postcondition(result: &LoopResult, mode: AcceptMode) -> Result<(), String> {
    for s in &result.candidates {
        if let Some((p, expected)) = first_inconsistency(&s.spec, &result.positives, &result.negatives, mode) {
            return Err(format!(
                "{} disagrees with {} packet {}",
                s.candidate.name,
                expected,
                hex::encode(&p.bytes)
            ));
        }
    }
    Ok(())
}

/// Writes surviving specs, the labeled manifest and the state log to `dir`.
pub fn write_outputs(
    dir: &Path,
    result: &LoopResult,
    spec_sha256: &str,
    seed_note: Option<&str>,
) -> Result<(), crate::corpus::CorpusError> {
    fs::create_dir_all(dir)?;
    let specs = dir.join("candidates");
    fs::create_dir_all(&specs)?;
    for s in &result.candidates {
        fs::write(specs.join(format!("{}.3d", s.candidate.name)), &s.candidate.text)?;
    }
    crate::corpus::write_corpus(&dir.join("corpus"), &result.labeled(), spec_sha256, seed_note)?;
    fs::write(dir.join("state_log.jsonl"), render_log(&result.log))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use std::collections::VecDeque;

    fn cand(name: &str, text: &str) -> Candidate {
        Candidate {
            name: name.into(),
            text: text.into(),
        }
    }

    fn golden(text: &str) -> SpecLabeler {
        SpecLabeler {
            spec: check(text).unwrap(),
            mode: AcceptMode::Strict,
        }
    }

    fn solver() -> SolverConfig {
        SolverConfig::from_env().unwrap()
    }

    fn run(cands: Vec<Candidate>, labeler: &mut dyn Labeler, seeds: &[TestPacket]) -> LoopResult {
        run_loop(
            &mut ListProvider(VecDeque::from(cands)),
            labeler,
            seeds,
            &RefineConfig::default(),
            &solver(),
        )
        .unwrap()
    }

    fn packet(bytes: &[u8], label: Label) -> TestPacket {
        TestPacket::new(bytes.to_vec(), label, vec![], "seed".into())
    }

    #[test]
    fn label_inputs_examples() {
        let mut l = golden(samples::MESSAGE);
        let mut w = Vec::new();
        let (p, n) = label_inputs(
            &[packet(&[0x2B, 0], Label::Negative), packet(&[0x2A, 0], Label::Positive)],
            &mut l,
            &HashSet::new(),
            &mut w,
        );
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].bytes, vec![0x2B, 0]);
        assert_eq!(p[0].label, Label::Positive);
        assert_eq!(n[0].bytes, vec![0x2A, 0]);
        let (p, n) = label_inputs(&[], &mut l, &HashSet::new(), &mut w);
        assert!(p.is_empty() && n.is_empty());
        let known = HashSet::from([vec![0x2B, 0]]);
        let (p, _) = label_inputs(&[packet(&[0x2B, 0], Label::Positive)], &mut l, &known, &mut w);
        assert!(p.is_empty());
        assert!(w.is_empty());
    }

    #[test]
    fn converges_on_the_correct_udp_candidate() {
        let result = run(
            vec![
                cand("loose", samples::UDP_LOOSE),
                cand("correct", samples::UDP),
                cand("strict", samples::UDP_STRICT),
            ],
            &mut golden(samples::UDP),
            &[],
        );
        let names: Vec<_> = result.candidates.iter().map(|s| s.candidate.name.as_str()).collect();
        assert_eq!(names, ["correct"]);
        let failing: Vec<_> = result
            .log
            .iter()
            .filter_map(|r| match r {
                LogRecord::FailingTest { candidate, .. } => Some(candidate.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(failing, ["loose", "strict"]);
        check_postcondition(&result, AcceptMode::Strict).unwrap();
    }

    #[test]
    fn broken_candidate_is_logged() {
        let result = run(vec![cand("broken", "typedef struct { UINT8 x } ;")], &mut golden(samples::MESSAGE), &[]);
        assert!(result.candidates.is_empty());
        assert_eq!(result.log.len(), 1);
        let LogRecord::SyntaxError { candidate, diagnostics } = &result.log[0] else {
            panic!()
        };
        assert_eq!(candidate, "broken");
        assert!(!diagnostics.is_empty());
    }

    #[test]
    fn empty_provider_returns_seeds() {
        let seeds = [packet(&[0x2B, 0], Label::Positive), packet(&[0x2A, 0], Label::Negative)];
        let result = run(vec![], &mut golden(samples::MESSAGE), &seeds);
        assert!(result.candidates.is_empty());
        assert_eq!(result.positives, seeds[..1]);
        assert_eq!(result.negatives, seeds[1..]);
        assert!(result.log.is_empty());
        assert_eq!(result.rounds, 1);
    }

    #[test]
    fn inconsistent_seed_is_rejected() {
        let err = run_loop(
            &mut ListProvider(VecDeque::new()),
            &mut golden(samples::MESSAGE),
            &[packet(&[0x2A, 0], Label::Positive)],
            &RefineConfig::default(),
            &solver(),
        )
        .unwrap_err();
        assert!(matches!(err.error, RefineError::SeedMismatch { .. }));
    }

    #[test]
    fn seeds_prune_and_are_kept() {
        // Without generation, a seed alone rules out the unconstrained message.
        let seeds = [packet(&[0x2A, 0], Label::Negative)];
        let result = run(
            vec![cand("unconstrained", samples::MESSAGE_UNCONSTRAINED), cand("message", samples::MESSAGE)],
            &mut golden(samples::MESSAGE),
            &seeds,
        );
        assert_eq!(result.candidates.len(), 1);
        assert_eq!(result.negatives[0], seeds[0]);
        assert_eq!(
            result.log[0],
            LogRecord::FailingTest {
                candidate: "unconstrained".into(),
                packet: "2a00".into(),
                expected: Label::Negative,
                got: Label::Positive,
            }
        );
    }

    #[test]
    fn log_is_reproducible() {
        let go = || {
            render_log(
                &run(
                    vec![
                        cand("a", samples::MESSAGE_UNCONSTRAINED),
                        cand("b", "garbage"),
                        cand("c", samples::MESSAGE),
                    ],
                    &mut golden(samples::MESSAGE),
                    &[],
                )
                .log,
            )
        };
        let first = go();
        assert_eq!(first.lines().count(), 2);
        assert_eq!(first, go());
    }

    #[test]
    fn max_rounds_bounds_provider_calls() {
        let cfg = RefineConfig {
            max_rounds: 1,
            ..RefineConfig::default()
        };
        let result = run_loop(
            &mut ListProvider(VecDeque::from(vec![cand("a", samples::MESSAGE), cand("b", samples::MESSAGE)])),
            &mut golden(samples::MESSAGE),
            &[],
            &cfg,
            &solver(),
        )
        .unwrap();
        assert_eq!(result.candidates.len(), 1);
        assert_eq!(result.warnings.len(), 1);
    }

    #[test]
    fn command_labeler_uses_exit_status() {
        // Positive iff the packet has exactly two bytes.
        let mut l = CommandLabeler::new("sh -c 'test $(wc -c) -eq 2'").unwrap();
        assert_eq!(l.label(&[1, 2]).unwrap(), Label::Positive);
        assert_eq!(l.label(&[1]).unwrap(), Label::Negative);
        let mut killed = CommandLabeler::new("sh -c 'kill -9 $$'").unwrap();
        assert!(killed.label(&[]).is_err());
    }

    #[test]
    fn command_provider_protocol() {
        let dir = tempfile::tempdir().unwrap();
        let spec = dir.path().join("m.3d");
        fs::write(&spec, samples::MESSAGE).unwrap();
        // Offers the spec once, then reports exhaustion.
        let cmd = format!(
            "sh -c 'cat > /dev/null; if [ \"$TDFORGE_ROUND\" = 1 ]; then cat {}; fi'",
            spec.display()
        );
        let mut p = CommandProvider::new(&cmd).unwrap();
        let c = p.next_candidate(&[]).unwrap().unwrap();
        assert_eq!(c.text, samples::MESSAGE);
        assert!(p.next_candidate(&[]).unwrap().is_none());
        let mut failing = CommandProvider::new("false").unwrap();
        assert!(failing.next_candidate(&[]).is_err());
    }

    #[test]
    fn dir_provider_orders_by_name() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.3d"), "B").unwrap();
        fs::write(dir.path().join("a.3d"), "A").unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let mut p = DirProvider::new(dir.path()).unwrap();
        assert_eq!(p.next_candidate(&[]).unwrap().unwrap().name, "a");
        assert_eq!(p.next_candidate(&[]).unwrap().unwrap().text, "B");
        assert!(p.next_candidate(&[]).unwrap().is_none());
    }

    #[test]
    fn log_records_round_trip() {
        let log = vec![
            LogRecord::SyntaxError {
                candidate: "x".into(),
                diagnostics: vec!["1:1: PAR001 oops".into()],
            },
            LogRecord::FailingTest {
                candidate: "y".into(),
                packet: "00".into(),
                expected: Label::Positive,
                got: Label::Negative,
            },
        ];
        let text = render_log(&log);
        assert!(text.starts_with("{\"record\":\"syntax-error\""));
        let back: Vec<LogRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, log);
    }
}
