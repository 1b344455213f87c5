//! Runs an external SMT-LIB2 solver as a subprocess.
//!
//! Each query gets its own process: the script goes to the solver's stdin,
//! the verdict is read back, and on `sat` the eval plan is issued to pull the
//! packet out of the model. A timeout kills the process. The process is
//! always waited on before returning.
//!
//! Solver options such as a random seed are passed through as part of the
//! command, e.g. `z3 -in smt.random_seed=7`. None are added by default.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::smt::{paren_depth, parse_value, SmtScript};

/// Environment variable overriding the solver command.
pub const SOLVER_ENV: &str = "TDFORGE_SOLVER";
pub const DEFAULT_SOLVER: &str = "z3 -in";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum UnknownReason {
    Timeout,
    SolverSaidUnknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SolverVerdict {
    /// The verdict line followed by one answer per eval-plan command issued.
    Sat(Vec<String>),
    Unsat,
    Unknown(UnknownReason),
    Crash { stderr: String, status: Option<i32> },
}

impl SolverVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            SolverVerdict::Sat(_) => "sat",
            SolverVerdict::Unsat => "unsat",
            SolverVerdict::Unknown(UnknownReason::Timeout) => "unknown (timeout)",
            SolverVerdict::Unknown(UnknownReason::SolverSaidUnknown) => "unknown",
            SolverVerdict::Crash { .. } => "crash",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolverConfig {
    pub command: Vec<String>,
    pub timeout: Duration,
    /// Concurrent solver processes used by [`SolverConfig::run_many`].
    pub workers: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: split_command(DEFAULT_SOLVER).expect("default command parses"),
            timeout: DEFAULT_TIMEOUT,
            workers: thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Splits a command line with shell quoting rules.
pub fn split_command(cmd: &str) -> Result<Vec<String>, String> {
    let words = shell_words::split(cmd).map_err(|e| e.to_string())?;
    if words.is_empty() {
        return Err("empty solver command".into());
    }
    Ok(words)
}

impl SolverConfig {
    /// Defaults, with the command taken from `TDFORGE_SOLVER` when set.
    pub fn from_env() -> Result<SolverConfig, String> {
        let mut cfg = SolverConfig::default();
        if let Ok(cmd) = std::env::var(SOLVER_ENV) {
            cfg.command = split_command(&cmd)?;
        }
        Ok(cfg)
    }

    pub fn with_command(mut self, cmd: &str) -> Result<SolverConfig, String> {
        self.command = split_command(cmd)?;
        Ok(self)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> SolverConfig {
        self.timeout = timeout;
        self
    }

    pub fn run(&self, script: &SmtScript) -> SolverVerdict {
        run_solver(script, self.timeout, &self.command)
    }

    /// Solves independent scripts on up to `workers` processes at a time.
    /// Results are in input order.
    pub fn run_many(&self, scripts: &[SmtScript]) -> Vec<SolverVerdict> {
        let next = AtomicUsize::new(0);
        let mut results: Vec<Option<SolverVerdict>> = vec![None; scripts.len()];
        let (tx, rx) = mpsc::channel();
        thread::scope(|scope| {
            for _ in 0..self.workers.max(1).min(scripts.len()) {
                let tx = tx.clone();
                let next = &next;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(script) = scripts.get(i) else {
                        break;
                    };
                    let _ = tx.send((i, self.run(script)));
                });
            }
            drop(tx);
            for (i, v) in rx {
                results[i] = Some(v);
            }
        });
        results
            .into_iter()
            .map(|v| v.expect("every script is solved"))
            .collect()
    }
}

/// Runs one script. See the module docs for the protocol.
pub fn run_solver(script: &SmtScript, timeout: Duration, command: &[String]) -> SolverVerdict {
    let deadline = Instant::now() + timeout;
    let Some((program, args)) = command.split_first() else {
        return SolverVerdict::Crash {
            stderr: "empty solver command".into(),
            status: None,
        };
    };
    let mut child = match Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => {
            return SolverVerdict::Crash {
                stderr: format!("cannot start `{program}`: {e}"),
                status: None,
            }
        }
    };
    let lines = spawn_line_reader(child.stdout.take().expect("piped stdout"));
    let stderr = spawn_drain(child.stderr.take().expect("piped stderr"));
    let (input, writer) = spawn_writer(child.stdin.take().expect("piped stdin"));
    let mut session = Session {
        child,
        lines,
        deadline,
        input: Some(input),
    };
    let verdict = session.converse(script);
    let status = session.finish(matches!(verdict, Err(Halt::Timeout)));
    let _ = writer.join();
    // A process that forked may leave its stderr open after being reaped.
    let stderr_text = stderr
        .recv_timeout(Duration::from_millis(250))
        .unwrap_or_default();
    match verdict {
        Ok(v) => v,
        Err(Halt::Timeout) => SolverVerdict::Unknown(UnknownReason::Timeout),
        Err(Halt::Crash(msg)) => {
            let mut excerpt = msg;
            if !stderr_text.trim().is_empty() {
                if !excerpt.is_empty() {
                    excerpt.push('\n');
                }
                excerpt.push_str(stderr_text.trim());
            }
            excerpt.truncate(2000);
            SolverVerdict::Crash {
                stderr: excerpt,
                status,
            }
        }
    }
}

enum Halt {
    Timeout,
    Crash(String),
}

struct Session {
    child: Child,
    lines: Receiver<String>,
    deadline: Instant,
    /// Feeds the writer thread; dropping it closes the solver's stdin.
    input: Option<Sender<String>>,
}

impl Session {
    fn send(&mut self, text: &str) {
        if let Some(tx) = &self.input {
            let _ = tx.send(text.to_string());
        }
    }

    /// Reads one complete answer, joining lines until parentheses balance.
    fn answer(&mut self) -> Result<String, Halt> {
        let mut buf = String::new();
        loop {
            let left = self.deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) => {
                    if buf.is_empty() && line.trim().is_empty() {
                        continue;
                    }
                    if buf.is_empty() && line.trim_start().starts_with("(error") {
                        return Err(Halt::Crash(line.trim().to_string()));
                    }
                    buf.push_str(&line);
                    buf.push('\n');
                    if paren_depth(&buf) <= 0 {
                        return Ok(buf.trim().to_string());
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(Halt::Timeout),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Halt::Crash(if buf.is_empty() {
                        "solver exited without an answer".into()
                    } else {
                        format!("solver exited mid-answer: {}", buf.trim())
                    }))
                }
            }
        }
    }

    fn converse(&mut self, script: &SmtScript) -> Result<SolverVerdict, Halt> {
        if Instant::now() >= self.deadline {
            return Err(Halt::Timeout);
        }
        self.send(&script.text);
        let verdict = self.answer()?;
        match verdict.as_str() {
            "sat" => {}
            "unsat" => return Ok(SolverVerdict::Unsat),
            "unknown" => return Ok(SolverVerdict::Unknown(UnknownReason::SolverSaidUnknown)),
            other => return Err(Halt::Crash(format!("unexpected solver output: {other}"))),
        }
        let plan = &script.plan;
        let mut transcript = vec![verdict];
        self.send(&format!("{}\n", plan.size_command()));
        let size_answer = self.answer()?;
        let size = parse_value(&size_answer, plan.dialect).ok();
        transcript.push(size_answer);
        // Out-of-range or malformed sizes are reported by the model parser.
        if let Some(n) = size.filter(|&n| n >= 0 && n <= plan.max_packet as i128) {
            let n = n as usize;
            let mut batch = String::new();
            for i in 0..n {
                batch.push_str(&plan.byte_command(i));
                batch.push('\n');
            }
            self.send(&batch);
            for _ in 0..n {
                transcript.push(self.answer()?);
            }
        }
        Ok(SolverVerdict::Sat(transcript))
    }

    /// Closes the session and reaps the process.
    fn finish(&mut self, kill: bool) -> Option<i32> {
        if kill {
            let _ = self.child.kill();
        } else {
            self.send("(exit)\n");
        }
        self.input = None;
        if !kill {
            // Give a well-behaved solver a moment to exit by itself.
            let grace = Instant::now() + Duration::from_millis(500);
            loop {
                match self.child.try_wait() {
                    Ok(Some(status)) => return status.code(),
                    Ok(None) if Instant::now() < grace => thread::sleep(Duration::from_millis(1)),
                    _ => break,
                }
            }
            let _ = self.child.kill();
        }
        self.child.wait().ok().and_then(|s| s.code())
    }
}

fn spawn_writer(mut stdin: impl Write + Send + 'static) -> (Sender<String>, thread::JoinHandle<()>) {
    let (tx, rx) = mpsc::channel::<String>();
    let handle = thread::spawn(move || {
        for chunk in rx {
            // A write error means the solver exited; the read side reports it.
            if stdin.write_all(chunk.as_bytes()).and_then(|_| stdin.flush()).is_err() {
                break;
            }
        }
    });
    (tx, handle)
}

fn spawn_line_reader(out: impl Read + Send + 'static) -> Receiver<String> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(out).lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

fn spawn_drain(mut err: impl Read + Send + 'static) -> Receiver<String> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = err.read_to_end(&mut buf);
        let _ = tx.send(String::from_utf8_lossy(&buf).into_owned());
    });
    rx
}
