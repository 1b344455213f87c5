use serde_json::Value;
use tdforge_core::samples;
use tdforge_web::{check_spec, run_packet, sample_specs, smt_query};

fn json(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn check_reports_entry_and_diagnostics() {
    let ok = json(check_spec(samples::OPTION));
    assert_eq!(ok["ok"], true);
    assert_eq!(ok["entry"], "OPTION");
    assert_eq!(ok["branches"], 2);
    let bad = json(check_spec("typedef struct _m {\n  UINT8 x { y > 1 };\n} m;"));
    assert_eq!(bad["ok"], false);
    let d = &bad["diagnostics"][0];
    assert_eq!(d["line"], 2);
    assert!(d["code"].as_str().unwrap().starts_with("TYP"));
}

#[test]
fn run_matches_the_interpreter() {
    let r = json(run_packet(samples::MESSAGE, "2b 00", "strict"));
    assert_eq!(r["accepted"], true);
    assert_eq!(r["trace"], serde_json::json!([0]));
    let r = json(run_packet(samples::MESSAGE, "2a00", "strict"));
    assert_eq!(r["accepted"], false);
    assert_eq!(r["outcome"], "Failure ConstraintViolated(first) at 1");
    assert_eq!(r["trace"], serde_json::json!([1]));
    let r = json(run_packet(samples::MESSAGE, "2b0000", "prefix"));
    assert_eq!(r["accepted"], true);
    let r = json(run_packet(samples::MESSAGE, "2g", "strict"));
    assert_eq!(r["ok"], false);
    let r = json(run_packet(samples::MESSAGE, "2b00", "lenient"));
    assert!(r["error"].as_str().unwrap().contains("mode"));
}

#[test]
fn smt_query_is_the_cli_script() {
    let s = smt_query(samples::MESSAGE, "positive", "strict").unwrap();
    assert!(s.contains("(check-sat)"));
    assert!(s.contains("(> (return-value s1) 42)"));
    let n = smt_query(samples::MESSAGE, "negative", "prefix").unwrap();
    assert!(n.contains("(assert (has-failed (parse-message-"));
    assert!(smt_query(samples::MESSAGE, "sideways", "strict").is_err());
    assert!(smt_query("garbage", "positive", "strict").is_err());
}

#[test]
fn samples_are_listed() {
    let v = json(sample_specs());
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|p| p[0].as_str().unwrap()).collect();
    assert!(names.contains(&"message"));
    assert!(names.contains(&"option"));
}
