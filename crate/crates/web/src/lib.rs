//! Browser playground. The page calls three operations: check a spec, run
//! it on a packet, and show the SMT query for it. Each returns a JSON
//! string so the page needs no generated type bindings.

use serde::Serialize;

use tdforge_core::corpus::decode_hex;
use tdforge_core::frontend::check;
use tdforge_core::interp::{validate, AcceptMode};
use tdforge_core::samples;
use tdforge_core::smt::{build_query, QueryKind, QuerySpec};
use tdforge_core::specialize::{replay, specialize};

#[derive(Serialize)]
struct Diag {
    line: u32,
    column: u32,
    code: &'static str,
    message: String,
}

#[derive(Serialize)]
struct CheckReply {
    ok: bool,
    entry: Option<String>,
    branches: usize,
    diagnostics: Vec<Diag>,
}

#[derive(Serialize)]
struct RunReply {
    ok: bool,
    accepted: bool,
    outcome: String,
    trace: Vec<u32>,
    error: Option<String>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("replies serialize")
}

fn parse_mode(mode: &str) -> Result<AcceptMode, String> {
    match mode {
        "strict" => Ok(AcceptMode::Strict),
        "prefix" => Ok(AcceptMode::Prefix),
        other => Err(format!("unknown mode `{other}`")),
    }
}

fn diags(text: &str) -> Vec<Diag> {
    match check(text) {
        Ok(_) => Vec::new(),
        Err(ds) => ds
            .iter()
            .map(|d| {
                let r = d.record("spec");
                Diag {
                    line: r.line,
                    column: r.column,
                    code: r.code,
                    message: r.message,
                }
            })
            .collect(),
    }
}

/// Parses and typechecks `text`.
pub fn check_spec(text: &str) -> String {
    let reply = match check(text) {
        Ok(spec) => CheckReply {
            ok: true,
            entry: Some(spec.entry_name().to_string()),
            branches: specialize(&spec).branches.len(),
            diagnostics: Vec::new(),
        },
        Err(_) => CheckReply {
            ok: false,
            entry: None,
            branches: 0,
            diagnostics: diags(text),
        },
    };
    to_json(&reply)
}

/// Runs the spec's entry type on hex-encoded bytes.
pub fn run_packet(text: &str, hex: &str, mode: &str) -> String {
    let failed = |e: String| RunReply {
        ok: false,
        accepted: false,
        outcome: String::new(),
        trace: Vec::new(),
        error: Some(e),
    };
    let reply = (|| {
        let mode = parse_mode(mode)?;
        let spec = check(text).map_err(|_| "the spec has errors; check it first".to_string())?;
        let bytes = decode_hex(hex)?;
        let v = validate(&spec, &bytes, mode);
        let r = replay(&specialize(&spec), &bytes, mode);
        Ok(RunReply {
            ok: true,
            accepted: v.accepted,
            outcome: v.outcome.to_string(),
            trace: r.trace,
            error: None,
        })
    })()
    .unwrap_or_else(failed);
    to_json(&reply)
}

/// The SMT-LIB script asking for a positive or negative packet.
pub fn smt_query(text: &str, query: &str, mode: &str) -> Result<String, String> {
    let mode = parse_mode(mode)?;
    let spec = check(text).map_err(|_| "the spec has errors; check it first".to_string())?;
    let kind = match query {
        "positive" => QueryKind::Positive,
        "negative" => QueryKind::Negative,
        other => return Err(format!("unknown query `{other}`")),
    };
    let program = specialize(&spec);
    Ok(build_query(&QuerySpec::new(kind, mode), &program).render())
}

/// Bundled example specs as a JSON array of `[name, text]` pairs.
pub fn sample_specs() -> String {
    to_json(&samples::ALL)
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn check(text: &str) -> String {
        super::check_spec(text)
    }

    #[wasm_bindgen]
    pub fn run(text: &str, hex: &str, mode: &str) -> String {
        super::run_packet(text, hex, mode)
    }

    #[wasm_bindgen]
    pub fn dump_smt(text: &str, query: &str, mode: &str) -> Result<String, JsValue> {
        super::smt_query(text, query, mode).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen]
    pub fn samples() -> String {
        super::sample_specs()
    }
}
