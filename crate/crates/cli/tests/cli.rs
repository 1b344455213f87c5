mod common;

use common::*;
use tdforge_core::corpus::read_manifest;

#[test]
fn check_reports_ok_and_errors() {
    let ok = tdforge(["check".as_ref(), spec_path("message").as_os_str()]);
    assert_eq!(code(&ok), 0);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.3d");
    std::fs::write(&bad, "typedef struct _m { UINT8 x { y > 1 }; } m;").unwrap();
    let out = tdforge(["check".as_ref(), bad.as_os_str()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bad.3d:1:"), "{}", stderr(&out));
    let json = tdforge(["check".as_ref(), bad.as_os_str(), "--json".as_ref()]);
    let line = stdout(&json);
    let record: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(record["line"], 1);
}

#[test]
fn run_prints_outcome() {
    let m = spec_path("message");
    let out = tdforge(["run".as_ref(), m.as_os_str(), "--hex".as_ref(), "2b00".as_ref()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("Success consumed=2"));
    let dir = tempfile::tempdir().unwrap();
    let pkt = dir.path().join("p.bin");
    std::fs::write(&pkt, [0x2A, 0]).unwrap();
    let out = tdforge(["run".as_ref(), m.as_os_str(), pkt.as_os_str()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("ConstraintViolated(first)"));
    let prefix = tdforge([
        "--mode".as_ref(),
        "prefix".as_ref(),
        "run".as_ref(),
        m.as_os_str(),
        "--hex".as_ref(),
        "2b 00 00".as_ref(),
    ]);
    assert_eq!(code(&prefix), 0);
}

#[test]
fn error_exit_codes() {
    assert_eq!(code(&tdforge(["frobnicate"])), 2);
    assert_eq!(code(&tdforge(["run", "/nonexistent/x.3d", "--hex", "00"])), 3);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.3d");
    std::fs::write(&bad, "nonsense").unwrap();
    assert_eq!(code(&tdforge(["run".as_ref(), bad.as_os_str(), "--hex".as_ref(), "00".as_ref()])), 4);
    let m = spec_path("message");
    assert_eq!(code(&tdforge(["run".as_ref(), m.as_os_str(), "--hex".as_ref(), "zz".as_ref()])), 2);
}

#[test]
fn version_mentions_grammar() {
    let out = tdforge(["--version"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("grammar"));
}

#[test]
fn dump_smt_negative_and_diff() {
    let m = spec_path("message");
    let neg = tdforge(["dump-smt".as_ref(), m.as_os_str(), "--query".as_ref(), "negative-failed".as_ref()]);
    assert_eq!(code(&neg), 0);
    assert!(stdout(&neg).contains("(assert (has-failed (parse-message-"));
    let u = spec_path("message_unconstrained");
    let diff = tdforge([
        "dump-smt".as_ref(),
        m.as_os_str(),
        "--query".as_ref(),
        "diff".as_ref(),
        "--against".as_ref(),
        u.as_os_str(),
    ]);
    assert_eq!(code(&diff), 0);
    assert_eq!(stdout(&diff).matches("(define-fun parse-message-").count(), 2);
    let missing = tdforge(["dump-smt".as_ref(), m.as_os_str(), "--query".as_ref(), "diff".as_ref()]);
    assert_eq!(code(&missing), 2);
    let steered = tdforge(["dump-smt".as_ref(), m.as_os_str(), "--prefix".as_ref(), "1".as_ref()]);
    assert!(stdout(&steered).contains("(assert (= (branch-trace 0) 1))"));
}

#[test]
fn diff_one_direction_codes() {
    let m = spec_path("message");
    let u = spec_path("message_unconstrained");
    let none = tdforge(["diff".as_ref(), m.as_os_str(), u.as_os_str()]);
    assert_eq!(code(&none), 0, "{}", stdout(&none));
    let dir = tempfile::tempdir().unwrap();
    let some = tdforge([
        "diff".as_ref(),
        u.as_os_str(),
        m.as_os_str(),
        "--out".as_ref(),
        dir.path().as_os_str(),
        "--max-witnesses".as_ref(),
        "2".as_ref(),
    ]);
    assert_eq!(code(&some), 10);
    let records = read_manifest(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(records.len(), 2);
}

#[test]
fn equiv_incomparable() {
    let out = tdforge([
        "equiv".as_ref(),
        spec_path("option_narrow").as_os_str(),
        spec_path("message").as_os_str(),
    ]);
    assert_eq!(code(&out), 12, "{}", stdout(&out));
}

#[test]
fn gen_writes_a_stable_corpus() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = spec_path("message");
    for dir in [&a, &b] {
        let out = tdforge([
            "gen".as_ref(),
            m.as_os_str(),
            "--depth".as_ref(),
            "1".as_ref(),
            "--out".as_ref(),
            dir.path().as_os_str(),
            "--seed-note".as_ref(),
            "ci".as_ref(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let ma = std::fs::read_to_string(a.path().join("manifest.json")).unwrap();
    let mb = std::fs::read_to_string(b.path().join("manifest.json")).unwrap();
    assert_eq!(ma, mb);
    let records = read_manifest(&a.path().join("manifest.json")).unwrap();
    assert_eq!(records[0].seed_note.as_deref(), Some("ci"));
    let positives_first = records.iter().skip_while(|r| r.label.to_string() == "positive");
    assert!(positives_first.clone().all(|r| r.label.to_string() == "negative"));
    for r in &records {
        assert_eq!(std::fs::read(a.path().join(&r.file)).unwrap(), hex::decode(&r.hex).unwrap());
    }
}

#[test]
fn refine_reports_syntax_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.3d"), "typedef struct {").unwrap();
    let out = tdforge([
        "refine".as_ref(),
        "--candidates".as_ref(),
        dir.path().as_os_str(),
        "--labeler-spec".as_ref(),
        spec_path("message").as_os_str(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("\"record\":\"syntax-error\""));
}

#[test]
fn refine_requires_a_provider() {
    let out = tdforge(["refine", "--labeler-cmd", "true"]);
    assert_eq!(code(&out), 2);
}
