//! `tdforge`: check, run, generate tests for and compare `.3d` specs.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success, accepted, equivalent |
//! | 1    | `check` found errors, `run` rejected, `refine` left no survivor |
//! | 2    | usage error |
//! | 3    | I/O error |
//! | 4    | a spec given to another subcommand does not check |
//! | 5    | solver, provider or labeler failure |
//! | 10, 11, 12 | `equiv`: left permissive, right permissive, incomparable; `diff`: 10 when a witness exists |
//! | 20   | some solver query was inconclusive |

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tdforge_core::ast::Spec;
use tdforge_core::corpus::{self, spaced_hex, spec_sha256, stable_sorted, Label, TestPacket};
use tdforge_core::diffcheck::{diff_one_direction, equiv, explain, DiffConfig, DiffResult, Direction};
use tdforge_core::frontend::{check_with_entry, GRAMMAR_VERSION};
use tdforge_core::interp::{validate, AcceptMode};
use tdforge_core::refine::{
    check_postcondition, run_loop, write_outputs, CandidateProvider, CommandLabeler, CommandProvider,
    DirProvider, Labeler, RefineConfig, SpecLabeler,
};
use tdforge_core::smt::{build_query, QueryKind, QuerySpec};
use tdforge_core::solver::SolverConfig;
use tdforge_core::specialize::specialize;
use tdforge_core::testgen::{gen_tests, GenConfig, Polarity};

#[derive(Parser)]
#[command(name = "tdforge", version = long_version(), about = "Format spec checker, interpreter, test generator and differential checker")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

fn long_version() -> &'static str {
    static VERSION: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    VERSION.get_or_init(|| format!("{} (grammar {GRAMMAR_VERSION})", env!("CARGO_PKG_VERSION")))
}

#[derive(Args)]
struct Global {
    /// Whether the entry type must consume the whole input.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Strict)]
    mode: Mode,
    /// Solver command line; defaults to $TDFORGE_SOLVER or `z3 -in`.
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Per-query solver timeout.
    #[arg(long, global = true, default_value_t = 30.0)]
    timeout_secs: f64,
    /// Free-form provenance string recorded in manifests.
    #[arg(long, global = true)]
    seed_note: Option<String>,
    /// Entry type; defaults to the last definition.
    #[arg(long, global = true)]
    entry: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Prefix,
}

impl From<Mode> for AcceptMode {
    fn from(m: Mode) -> AcceptMode {
        match m {
            Mode::Strict => AcceptMode::Strict,
            Mode::Prefix => AcceptMode::Prefix,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and typecheck a spec. Exits 1 on errors.
    Check {
        file: PathBuf,
        /// Print diagnostics as JSON lines on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Run a spec on a packet. Exits 0 if accepted, 1 if rejected.
    Run {
        file: PathBuf,
        /// Packet file, or `-` for standard input.
        #[arg(required_unless_present = "hex")]
        packet: Option<PathBuf>,
        /// Packet bytes as hex instead of a file.
        #[arg(long, conflicts_with = "packet")]
        hex: Option<String>,
    },
    /// Generate a labeled corpus. Exits 20 if some query was inconclusive.
    Gen {
        file: PathBuf,
        /// Longest branch trace prefix explored.
        #[arg(long, default_value_t = 100)]
        depth: usize,
        /// Packets per goal and prefix.
        #[arg(long, default_value_t = 2)]
        quota: usize,
        /// Stop after this many packets.
        #[arg(long, default_value_t = 200)]
        max: usize,
        #[arg(long, value_enum, default_value_t = PolarityArg::Both)]
        polarity: PolarityArg,
        /// Input size bound while harvesting; 0 disables it.
        #[arg(long, default_value_t = 64)]
        size_bound: usize,
        /// Unknown verdicts tolerated before stopping.
        #[arg(long, default_value_t = 10)]
        unknown_budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find packets the first spec accepts and the second rejects.
    /// Exits 0 if none exist, 10 if found, 20 if inconclusive.
    Diff {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_witnesses: usize,
        /// Write witnesses as a corpus here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two specs in both directions. Exits 0 equivalent, 10 left
    /// permissive, 11 right permissive, 12 incomparable, 20 inconclusive.
    Equiv {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_witnesses: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prune candidate specs against labeled packets. Exits 0 if some
    /// candidate survives, 1 otherwise.
    Refine(RefineArgs),
    /// Print the SMT script for a query.
    DumpSmt {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = QueryArg::Positive)]
        query: QueryArg,
        /// Comma-separated branch outcomes to steer along, e.g. `0,2`.
        #[arg(long, value_delimiter = ',')]
        prefix: Option<Vec<u32>>,
        /// Second spec, for `--query diff`.
        #[arg(long, required_if_eq("query", "diff"))]
        against: Option<PathBuf>,
        /// Also print the first-order program.
        #[arg(long)]
        program: bool,
    },
}

#[derive(Args)]
struct RefineArgs {
    /// Directory of `.3d` candidates, taken in file-name order.
    #[arg(long, required_unless_present = "provider_cmd", conflicts_with = "provider_cmd")]
    candidates: Option<PathBuf>,
    /// Command producing one candidate per call.
    #[arg(long)]
    provider_cmd: Option<String>,
    /// Trusted spec used as the labeler.
    #[arg(long, required_unless_present = "labeler_cmd", conflicts_with = "labeler_cmd")]
    labeler_spec: Option<PathBuf>,
    /// Command reading a packet on stdin; exit 0 means positive.
    #[arg(long)]
    labeler_cmd: Option<String>,
    /// Manifest of seed packets.
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    max_rounds: usize,
    #[arg(long, default_value_t = 100)]
    depth: usize,
    #[arg(long, default_value_t = 2)]
    quota: usize,
    /// Generated packets per candidate.
    #[arg(long, default_value_t = 64)]
    max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolarityArg {
    Positive,
    Negative,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueryArg {
    Positive,
    Negative,
    NegativeFailed,
    NegativeTrailing,
    Diff,
}

/// An error carrying its exit code.
struct Fail {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Fail {
    Fail {
        code,
        message: message.into(),
    }
}

type Outcome = Result<u8, Fail>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    let g = &cli.global;
    let mode: AcceptMode = g.mode.into();
    match &cli.command {
        Cmd::Check { file, json } => cmd_check(g, file, *json),
        Cmd::Run { file, packet, hex } => {
            let spec = load_spec(g, file)?;
            let bytes = match (packet, hex) {
                (_, Some(h)) => tdforge_core::corpus::decode_hex(h).map_err(|e| fail(2, e))?,
                (Some(p), None) if p.as_os_str() == "-" => {
                    let mut buf = Vec::new();
                    std::io::stdin()
                        .read_to_end(&mut buf)
                        .map_err(|e| fail(3, format!("stdin: {e}")))?;
                    buf
                }
                (Some(p), None) => read_bytes(p)?,
                (None, None) => return Err(fail(2, "no packet given")),
            };
            let v = validate(&spec, &bytes, mode);
            println!("{}", v.outcome);
            Ok(if v.accepted { 0 } else { 1 })
        }
        Cmd::Gen {
            file,
            depth,
            quota,
            max,
            polarity,
            size_bound,
            unknown_budget,
            out,
        } => {
            let text = read_text(file)?;
            let spec = check_text(g, file, &text)?;
            let cfg = GenConfig {
                branch_depth: *depth,
                quota: *quota,
                max_tests: *max,
                mode,
                polarity: match polarity {
                    PolarityArg::Positive => Polarity::Positive,
                    PolarityArg::Negative => Polarity::Negative,
                    PolarityArg::Both => Polarity::Both,
                },
                unknown_budget: *unknown_budget,
                size_bound: (*size_bound > 0).then_some(*size_bound),
            };
            let report = gen_tests(&spec, &cfg, &solver(g)?).map_err(|e| fail(5, e.to_string()))?;
            let packets = stable_sorted(report.packets.clone());
            for (goal, verdict) in &report.root {
                println!("root {}: {verdict}", goal.name());
            }
            for b in &report.coverage.branches {
                println!(
                    "branch b{} ({}): hit {:?} of {}",
                    b.id, b.label, b.hit, b.arity
                );
            }
            for p in &packets {
                println!("{} {} [{}]", p.label, spaced_hex(&p.bytes), p.query_kind);
            }
            let positives = packets.iter().filter(|p| p.label == Label::Positive).count();
            println!("{positives} positive, {} negative", packets.len() - positives);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if report.truncated {
                eprintln!("warning: stopped at {max} packets");
            }
            if let Some(dir) = out {
                corpus::write_corpus(dir, &packets, &spec_sha256(&text), g.seed_note.as_deref())
                    .map_err(|e| fail(3, e.to_string()))?;
                let coverage = serde_json::json!({
                    "root": report.root.iter().map(|(g, v)| serde_json::json!({"goal": g.name(), "verdict": v})).collect::<Vec<_>>(),
                    "branches": report.coverage.branches,
                    "nodes": report.coverage.nodes,
                    "unknowns": report.unknowns,
                    "budget_exceeded": report.budget_exceeded,
                    "truncated": report.truncated,
                    "warnings": report.warnings,
                });
                write_file(
                    &dir.join("coverage.json"),
                    &(serde_json::to_string_pretty(&coverage).expect("coverage serializes") + "\n"),
                )?;
            }
            if report.incomplete() {
                eprintln!("warning: {} inconclusive queries; the corpus may be partial", report.unknowns);
                return Ok(20);
            }
            Ok(0)
        }
        Cmd::Diff {
            left,
            right,
            max_witnesses,
            out,
        } => {
            let (l, r, lt) = load_pair(g, left, right)?;
            let cfg = DiffConfig {
                mode,
                max_witnesses: *max_witnesses,
                ..DiffConfig::default()
            };
            let d = diff_one_direction(&l, &r, &cfg, &solver(g)?).map_err(|e| fail(5, e.to_string()))?;
            println!("{}", d.name());
            match d {
                Direction::Unsat => Ok(0),
                Direction::Unknown { reason } => {
                    eprintln!("warning: inconclusive: {reason}");
                    Ok(20)
                }
                Direction::Sat { witnesses } => {
                    report_witnesses(&l, &r, &witnesses, mode, "accepted by left, rejected by right");
                    if let Some(dir) = out {
                        write_witnesses(g, dir, &witnesses, &lt)?;
                    }
                    Ok(10)
                }
            }
        }
        Cmd::Equiv {
            left,
            right,
            max_witnesses,
            out,
        } => {
            let (l, r, lt) = load_pair(g, left, right)?;
            let cfg = DiffConfig {
                mode,
                max_witnesses: *max_witnesses,
                ..DiffConfig::default()
            };
            let result = equiv(&l, &r, &cfg, &solver(g)?).map_err(|e| fail(5, e.to_string()))?;
            println!("{}", result.name());
            match &result {
                DiffResult::LeftPermissive { witnesses } => {
                    report_witnesses(&l, &r, witnesses, mode, "accepted by left, rejected by right")
                }
                DiffResult::RightPermissive { witnesses } => {
                    report_witnesses(&r, &l, witnesses, mode, "accepted by right, rejected by left")
                }
                DiffResult::Incomparable { left: a, right: b } => {
                    report_witnesses(&l, &r, a, mode, "accepted by left, rejected by right");
                    report_witnesses(&r, &l, b, mode, "accepted by right, rejected by left");
                }
                DiffResult::Inconclusive { left: a, right: b } => {
                    eprintln!("warning: left-not-right {}, right-not-left {}", a.name(), b.name());
                }
                DiffResult::Equivalent => {}
            }
            if let Some(dir) = out {
                let ws: Vec<TestPacket> = result.witnesses().into_iter().cloned().collect();
                write_witnesses(g, dir, &ws, &lt)?;
            }
            Ok(result.exit_code() as u8)
        }
        Cmd::Refine(args) => cmd_refine(g, args),
        Cmd::DumpSmt {
            file,
            query,
            prefix,
            against,
            program,
        } => {
            let spec = load_spec(g, file)?;
            let p = specialize(&spec);
            let other = match against {
                Some(path) => Some(specialize(&load_spec(g, path)?)),
                None => None,
            };
            let kind = match query {
                QueryArg::Positive => QueryKind::Positive,
                QueryArg::Negative => QueryKind::Negative,
                QueryArg::NegativeFailed => QueryKind::NegativeFailed,
                QueryArg::NegativeTrailing => QueryKind::NegativeTrailing,
                QueryArg::Diff => QueryKind::DiffLeftNotRight(other.as_ref().expect("clap requires --against")),
            };
            let mut q = QuerySpec::new(kind, mode);
            if let Some(prefix) = prefix {
                q = q.with_prefix(prefix);
            }
            if *program {
                for line in p.dump().lines() {
                    println!(";; {line}");
                }
            }
            print!("{}", build_query(&q, &p).render());
            Ok(0)
        }
    }
}

fn cmd_check(g: &Global, file: &Path, json: bool) -> Outcome {
    let text = read_text(file)?;
    let name = file.display().to_string();
    match check_with_entry(&text, g.entry.as_deref()) {
        Ok(spec) => {
            if !json {
                println!("{name}: ok (entry {})", spec.entry_name());
            }
            Ok(0)
        }
        Err(diags) => {
            for d in &diags {
                if json {
                    println!("{}", serde_json::to_string(&d.record(&name)).expect("records serialize"));
                } else {
                    eprintln!("{}", d.render(&name));
                }
            }
            Ok(1)
        }
    }
}

fn cmd_refine(g: &Global, a: &RefineArgs) -> Outcome {
    let mode: AcceptMode = g.mode.into();
    let mut provider: Box<dyn CandidateProvider> = match (&a.candidates, &a.provider_cmd) {
        (Some(dir), _) => Box::new(DirProvider::new(dir).map_err(|e| fail(3, format!("{}: {e}", dir.display())))?),
        (None, Some(cmd)) => Box::new(CommandProvider::new(cmd).map_err(|e| fail(2, e))?),
        (None, None) => return Err(fail(2, "one of --candidates or --provider-cmd is required")),
    };
    let mut golden_text = None;
    let mut labeler: Box<dyn Labeler> = match (&a.labeler_spec, &a.labeler_cmd) {
        (Some(path), _) => {
            let text = read_text(path)?;
            let spec = check_text(g, path, &text)?;
            golden_text = Some(text);
            Box::new(SpecLabeler { spec, mode })
        }
        (None, Some(cmd)) => Box::new(CommandLabeler::new(cmd).map_err(|e| fail(2, e))?),
        (None, None) => return Err(fail(2, "one of --labeler-spec or --labeler-cmd is required")),
    };
    let seeds = match &a.seeds {
        Some(path) => corpus::read_manifest(path)
            .map_err(|e| fail(3, format!("{}: {e}", path.display())))?
            .iter()
            .map(|r| r.to_packet())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| fail(3, e.to_string()))?,
        None => Vec::new(),
    };
    let cfg = RefineConfig {
        mode,
        max_rounds: a.max_rounds,
        gen: GenConfig {
            branch_depth: a.depth,
            quota: a.quota,
            max_tests: a.max,
            ..RefineConfig::default().gen
        },
        ..RefineConfig::default()
    };
    let result = match run_loop(provider.as_mut(), labeler.as_mut(), &seeds, &cfg, &solver(g)?) {
        Ok(r) => r,
        Err(f) => {
            eprint!("{}", tdforge_core::refine::render_log(&f.log));
            return Err(fail(5, f.error.to_string()));
        }
    };
    check_postcondition(&result, mode).map_err(|e| fail(5, format!("postcondition violated: {e}")))?;
    for s in &result.candidates {
        println!("survivor {}", s.candidate.name);
    }
    print!("{}", tdforge_core::refine::render_log(&result.log));
    println!(
        "{} survivors, {} positive and {} negative packets after {} rounds",
        result.candidates.len(),
        result.positives.len(),
        result.negatives.len(),
        result.rounds
    );
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &a.out {
        let sha = golden_text.as_deref().map(spec_sha256).unwrap_or_default();
        write_outputs(dir, &result, &sha, g.seed_note.as_deref()).map_err(|e| fail(3, e.to_string()))?;
    }
    Ok(if result.candidates.is_empty() { 1 } else { 0 })
}

fn report_witnesses(accepting: &Spec, rejecting: &Spec, ws: &[TestPacket], mode: AcceptMode, what: &str) {
    for w in ws {
        let d = explain(accepting, rejecting, &w.bytes, mode);
        println!("witness {} ({what})", spaced_hex(&w.bytes));
        println!("  accepting: {}", d.left);
        println!("  rejecting: {}", d.right);
    }
}

fn write_witnesses(g: &Global, dir: &Path, ws: &[TestPacket], left_text: &str) -> Result<(), Fail> {
    corpus::write_corpus(dir, ws, &spec_sha256(left_text), g.seed_note.as_deref())
        .map(|_| ())
        .map_err(|e| fail(3, e.to_string()))
}

fn solver(g: &Global) -> Result<SolverConfig, Fail> {
    let base = SolverConfig::from_env().map_err(|e| fail(2, e))?;
    let base = match &g.solver {
        Some(cmd) => base.with_command(cmd).map_err(|e| fail(2, e))?,
        None => base,
    };
    if !(g.timeout_secs > 0.0 && g.timeout_secs.is_finite()) {
        return Err(fail(2, "--timeout-secs must be positive"));
    }
    Ok(base.with_timeout(Duration::from_secs_f64(g.timeout_secs)))
}

fn read_text(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Fail> {
    fs::read(path).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn check_text(g: &Global, path: &Path, text: &str) -> Result<Spec, Fail> {
    check_with_entry(text, g.entry.as_deref()).map_err(|diags| {
        let name = path.display().to_string();
        let rendered: Vec<String> = diags.iter().map(|d| d.render(&name)).collect();
        fail(4, format!("{name} does not check:\n{}", rendered.join("\n")))
    })
}

fn load_spec(g: &Global, path: &Path) -> Result<Spec, Fail> {
    check_text(g, path, &read_text(path)?)
}

fn load_pair(g: &Global, left: &Path, right: &Path) -> Result<(Spec, Spec, String), Fail> {
    let lt = read_text(left)?;
    let l = check_text(g, left, &lt)?;
    let r = load_spec(g, right)?;
    Ok((l, r, lt))
}
