//! Test packets and the on-disk corpus format.
//!
//! A corpus directory holds one raw file per packet, named
//! `<label>-<id>.bin`, and a `manifest.json` array describing them.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::specialize::BranchTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_accepted(accepted: bool) -> Label {
        if accepted {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

/// First four bytes of the SHA-256 of `bytes`, as lowercase hex.
pub fn packet_id(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..4])
}

/// Full SHA-256 of a spec's source text, as lowercase hex.
pub fn spec_sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Lowercase, space-separated hex for human-readable output.
pub fn spaced_hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses hex with optional whitespace between bytes.
pub fn decode_hex(text: &str) -> Result<Vec<u8>, String> {
    let compact: String = text.split_whitespace().collect();
    hex::decode(&compact).map_err(|e| format!("invalid hex `{text}`: {e}"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPacket {
    pub id: String,
    pub bytes: Vec<u8>,
    pub label: Label,
    pub trace: BranchTrace,
    /// Which query produced the packet.
    pub query_kind: String,
}

impl TestPacket {
    pub fn new(bytes: Vec<u8>, label: Label, trace: BranchTrace, query_kind: String) -> TestPacket {
        TestPacket {
            id: packet_id(&bytes),
            bytes,
            label,
            trace,
            query_kind,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}-{}.bin", self.label, self.id)
    }
}

/// Drops packets whose bytes already appeared, keeping the first.
pub fn dedupe(packets: Vec<TestPacket>) -> Vec<TestPacket> {
    let mut seen = HashSet::new();
    packets
        .into_iter()
        .filter(|p| seen.insert(p.bytes.clone()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub file: String,
    pub label: Label,
    pub hex: String,
    pub trace: BranchTrace,
    pub query_kind: String,
    pub spec_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_note: Option<String>,
}

impl ManifestRecord {
    pub fn from_packet(p: &TestPacket, spec_sha256: &str, seed_note: Option<&str>) -> ManifestRecord {
        ManifestRecord {
            id: p.id.clone(),
            file: p.file_name(),
            label: p.label,
            hex: hex::encode(&p.bytes),
            trace: p.trace.clone(),
            query_kind: p.query_kind.clone(),
            spec_sha256: spec_sha256.to_string(),
            seed_note: seed_note.map(str::to_string),
        }
    }

    pub fn to_packet(&self) -> Result<TestPacket, CorpusError> {
        let bytes = hex::decode(&self.hex).map_err(|e| CorpusError::Format(format!("{}: {e}", self.id)))?;
        if packet_id(&bytes) != self.id {
            return Err(CorpusError::Format(format!(
                "record {} does not match its bytes",
                self.id
            )));
        }
        Ok(TestPacket {
            id: self.id.clone(),
            bytes,
            label: self.label,
            trace: self.trace.clone(),
            query_kind: self.query_kind.clone(),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("malformed manifest: {0}")]
    Format(String),
}

/// Orders packets positives first, keeping generation order within a label.
pub fn stable_sorted(mut packets: Vec<TestPacket>) -> Vec<TestPacket> {
    packets.sort_by_key(|p| p.label);
    packets
}

/// Writes `packets` and their manifest into `dir`, creating it if needed.
pub fn write_corpus(
    dir: &Path,
    packets: &[TestPacket],
    spec_sha256: &str,
    seed_note: Option<&str>,
) -> Result<Vec<ManifestRecord>, CorpusError> {
    fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(packets.len());
    for p in packets {
        fs::write(dir.join(p.file_name()), &p.bytes)?;
        records.push(ManifestRecord::from_packet(p, spec_sha256, seed_note));
    }
    write_manifest(&dir.join("manifest.json"), &records)?;
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(records).map_err(|e| CorpusError::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, CorpusError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Format(e.to_string()))
}
