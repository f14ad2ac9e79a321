use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn uqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uqc")).args(args).output().expect("binary runs")
}

fn uqc_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uqc")).args(args).env(key, value).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schema").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(name: &str, value: &Value) {
    let validator = schema(name);
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

#[test]
fn bound_inversion_json() {
    let out = uqc(&["bound", "--task", "inversion", "--d", "3", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!((v["numeric_sdp_value"].as_f64().unwrap() - 8.0).abs() < 1e-6);
    assert_eq!(v["refined_bound"]["value"].as_f64(), Some(9.0));
    assert_eq!(v["rounded_queries"].as_u64(), Some(8));
    assert_eq!(v["status"], "consistent");
    assert_eq!(v["schema"], "uqc-bounds-report/1");
}

#[test]
fn prob_curve_transposition_csv() {
    let out = uqc(&["prob-curve", "--task", "transposition", "--d", "2", "--n-max", "4", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("task,d,N,max_p_sdp,closed_form,canonical,trace_norm_path"));
    let closed: Vec<f64> = lines.map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert_eq!(closed, vec![0.25, 0.64, 1.0, 1.0]);
}

#[test]
fn certify_so_inversion() {
    let out = uqc(&["certify", "--task", "so_inversion", "--d", "4", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let c = &json(&out)["certificates"][0];
    assert_eq!(c["valid"], true);
    assert!((c["primal_objective"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    assert!((c["dual_objective"].as_f64().unwrap() - 3.0).abs() < 1e-8);
}

#[test]
fn catalysis_verdicts() {
    let out = uqc(&["catalysis", "--task", "conjugation", "--d", "3", "--format", "json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["verdicts"][0]["verdict"], "catalysis_ruled_out");
    let out = uqc(&["catalysis", "--task", "inversion", "--d", "2", "--known-n", "4", "--format", "csv"]);
    assert!(stdout(&out).lines().nth(1).unwrap().ends_with(",inconclusive"));
    let out = uqc(&["bound", "--task", "conjugation", "--d", "2", "--with-catalysis", "--format", "json"]);
    assert_eq!(json(&out)["catalysis"]["verdict"], "catalysis_ruled_out");
}

#[test]
fn subgroup_flags() {
    let out = uqc(&["bound", "--task", "inversion", "--d", "2", "--subgroup", "tensor:2", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["numeric_sdp_value"].as_f64().unwrap() - 3.0).abs() < 1e-5);
    assert_eq!(v["task"]["subgroup"], "tensor:2");
    let out = uqc(&["bound", "--task", "inversion", "--d", "3", "--subgroup", "so", "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["task"]["name"], "so_inversion");
    assert!((v["numeric_sdp_value"].as_f64().unwrap() - 2.0).abs() < 1e-5);
    assert_eq!(code(&uqc(&["bound", "--task", "so_inversion", "--d", "3", "--subgroup", "diag"])), 2);
}

#[test]
fn expression_and_matrix_file_base_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u0.json");
    uqc::linalg::save_matrix(&path, &uqc::linalg::haar_unitary(3, 11).unwrap()).unwrap();
    let path = path.to_str().unwrap();
    let out = uqc(&["bound", "--f-expr", "conj o inv", "--d", "3", "--u0", path, "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    // conj ∘ inv is transposition.
    assert!((v["numeric_sdp_value"].as_f64().unwrap() - 4.0).abs() < 1e-5);
    assert!(v["closed_form_value"].is_null());
    let out = uqc(&["bound", "--task", "transposition", "--d", "3", "--u0", path, "--format", "json"]);
    assert_eq!(json(&out)["certificate"]["values_match"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&uqc(&["bound", "--task", "cloning", "--d", "2"])), 2);
    assert_eq!(code(&uqc(&["bound", "--task", "inversion", "--d", "9"])), 2);
    assert_eq!(code(&uqc(&["bound", "--task", "inversion"])), 2);
    assert_eq!(code(&uqc(&["bound", "--task", "inversion", "--f-expr", "inv", "--d", "2"])), 2);
    assert_eq!(code(&uqc(&["bound", "--task", "inversion", "--d", "2", "--subgroup", "tensor:5"])), 2);
    assert_eq!(code(&uqc(&["bound", "--f-expr", "inv o", "--d", "2"])), 2);
    assert_eq!(code(&uqc(&["bound", "--task", "inversion", "--d", "2", "--u0", "/nonexistent.json"])), 2);
    assert_eq!(code(&uqc(&["frobnicate"])), 2);
    let out = uqc(&["derivative-check", "--task", "inversion", "--d", "2", "--tolerance", "1e-30"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("above tolerance"));
    assert!(stdout(&out).contains("FAILED"));
    assert_eq!(code(&uqc_env(&["certify", "--task", "inversion", "--d", "2"], "UQC_THREADS", "zero")), 2);
}

#[test]
fn diagnostics_go_to_stderr() {
    let out = uqc(&["prob-curve", "--task", "conjugation", "--d", "4", "--n-max", "2", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("d=4 N=1"));
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn deterministic_output() {
    let args = ["bound", "--task", "conjugation", "--d-range", "2..4", "--u0", "haar:7", "--format", "json"];
    let a = uqc(&args);
    let b = uqc_env(&args, "UQC_THREADS", "1");
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let ds: Vec<u64> = json(&a).as_array().unwrap().iter().map(|r| r["d"].as_u64().unwrap()).collect();
    assert_eq!(ds, vec![2, 3, 4]);
    let args = ["prob-curve", "--task", "inversion", "--d-range", "2..3", "--n-max", "2", "--format", "json"];
    assert_eq!(uqc(&args).stdout, uqc_env(&args, "UQC_THREADS", "2").stdout);
}

#[test]
fn json_matches_schemas() {
    let cases: [(&str, Vec<&str>); 7] = [
        ("bound", vec!["bound", "--task", "inversion", "--d", "2", "--with-catalysis", "--with-prob", "2"]),
        ("bound", vec!["bound", "--task", "transposition", "--d-range", "2..3"]),
        ("bound", vec!["bound", "--f-expr", "pow:2 o T", "--d", "2", "--u0", "haar:1"]),
        ("prob-curve", vec!["prob-curve", "--task", "iteration", "--n", "2", "--d", "2", "--n-max", "3"]),
        ("certify", vec!["certify", "--task", "diag_inversion", "--d-range", "2..3"]),
        ("catalysis", vec!["catalysis", "--task", "iteration", "--n", "3", "--d", "2"]),
        ("derivative-check", vec!["derivative-check", "--f-expr", "conj * inv", "--d", "2"]),
    ];
    for (name, mut args) in cases {
        args.extend(["--format", "json"]);
        let out = uqc(&args);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert_valid(name, &json(&out));
    }
}

#[test]
fn text_output_is_readable() {
    let out = uqc(&["bound", "--task", "inversion", "--d", "2", "--round"]);
    let text = stdout(&out);
    assert!(text.contains("queries >=     3"), "{text}");
    assert!(text.contains("best known     4 [numerical (prior work)]"), "{text}");
}
