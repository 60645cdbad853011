mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use common::{expected_runs, fixtures, report_schema, run_bin, schema_errors};
use pencilph_cli::{emit_problem, parse_problem, process, process_all, Command, Flags, Format, Kind};
use serde_json::Value;

#[test]
fn fixture_corpus_covers_every_kind() {
    let runs = expected_runs();
    let files: BTreeSet<&str> = runs.iter().map(|r| r.1.as_str()).collect();
    assert!(files.len() >= 20, "{}", files.len());
    let mut kinds = BTreeSet::new();
    for f in &files {
        let p = fixtures().join(f);
        if let Ok(prob) = parse_problem(&p, pencilph_cli::problem::detect_format(&p)) {
            kinds.insert(prob.kind);
        }
    }
    assert_eq!(kinds.len(), Kind::ALL.len());
    let cmds: BTreeSet<&str> = runs.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(cmds.len(), Command::ALL.len());
}

#[test]
fn exit_codes_reports_and_schema() {
    let schema = report_schema();
    for (cmd, file, code) in expected_runs() {
        let (got, out) = run_bin(&[&cmd, &file]);
        assert_eq!(got, code, "{cmd} {file}");
        let report: Value = serde_json::from_slice(&out).unwrap();
        let errs = schema_errors(&schema, &report, "$");
        assert!(errs.is_empty(), "{cmd} {file}: {errs:?}");
        assert_eq!(report["exit_code"], code);
    }
}

#[test]
fn json_and_bundle_agree() {
    let a = parse_problem(&fixtures().join("jordan_example.json"), Format::Json).unwrap();
    let b = parse_problem(&fixtures().join("jordan_bundle"), Format::MatrixMarket).unwrap();
    assert_eq!(a.matrices, b.matrices);
    assert_eq!(a.x0, b.x0);
}

#[test]
fn emit_is_idempotent_on_fixtures() {
    for (_, file, code) in expected_runs() {
        if code == 1 {
            continue;
        }
        let p = fixtures().join(&file);
        let Ok(prob) = parse_problem(&p, pencilph_cli::problem::detect_format(&p)) else { continue };
        let once = emit_problem(&prob);
        let again = emit_problem(&pencilph_cli::problem::parse_json_str(&once, "emitted").unwrap());
        assert_eq!(once, again, "{file}");
    }
}

#[test]
fn parallel_batch_matches_serial_and_writes_files() {
    let paths: Vec<PathBuf> = ["jordan_example.json", "decay_scalar.json", "damped_dh.json", "singular.json", "jordan_bundle"]
        .iter()
        .map(|f| fixtures().join(f))
        .collect();
    let flags = Flags::default();
    let par = process_all(Command::Analyze, &paths, None, &flags, None, 4);
    for (p, r) in paths.iter().zip(&par) {
        assert_eq!(r.to_pretty(), process(Command::Analyze, p, None, &flags, None).to_pretty());
    }
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["analyze".to_string()];
    args.extend(paths.iter().map(|p| p.display().to_string()));
    args.extend(["--out".into(), dir.path().display().to_string(), "-j".into(), "3".into()]);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, stdout) = run_bin(&argv);
    assert_eq!(code, 2);
    assert!(stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("jordan_example.analyze.json")).unwrap();
    assert_eq!(written, par[0].to_pretty());
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), paths.len(), "no temporary files left: {names:?}");
}

#[test]
fn tolerance_precedence() {
    let p = fixtures().join("decay_scalar.json");
    let flags = Flags { atol: Some(1e-9), ..Flags::default() };
    let r = process(Command::Analyze, &p, None, &flags, Some(1e-7));
    assert_eq!(r.json["tolerances"]["atol"], 1e-9);
    let r = process(Command::Analyze, &p, None, &Flags::default(), Some(1e-7));
    assert_eq!(r.json["tolerances"]["atol"], 1e-7);
    let bad = Flags { atol: Some(-1.0), ..Flags::default() };
    assert_eq!(process(Command::Analyze, &p, None, &bad, None).exit_code(), 64);
    let (code, _) = run_bin(&["analyze", "decay_scalar.json", "--rtol", "0"]);
    assert_eq!(code, 64);
}

#[test]
fn report_contents_for_worked_examples() {
    let (_, out) = run_bin(&["analyze", "jordan_example.json"]);
    let r: Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(r["verdict"]["regular"], true);
    assert_eq!(r["verdict"]["classification"], "unstable");
    let s = &r["verdict"]["spectrum"][0];
    assert_eq!((s["re"].as_f64(), s["algebraic"].as_u64(), s["geometric"].as_u64()), (Some(0.0), Some(2), Some(1)));

    let (code, out) = run_bin(&["recast-dh", "decay_scalar.json"]);
    let r: Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(code, 0);
    assert_eq!(r["matrices"]["Q"][0][0].as_f64(), Some(0.5));

    let (_, out) = run_bin(&["recast-ph", "scalar_antistable.json"]);
    let r: Value = serde_json::from_slice(&out).unwrap();
    let m = &r["matrices"];
    let get = |k: &str| m[k][0][0].as_f64().unwrap();
    assert_eq!((get("P1"), get("K"), get("Q"), get("R")), (2.0, -2.0, -2.0, 0.5));

    let (_, out) = run_bin(&["simulate", "jordan_example.json", "--horizon", "4", "--samples", "5"]);
    let r: Value = serde_json::from_slice(&out).unwrap();
    let last = &r["matrices"]["states"][4];
    assert_eq!((last[0].as_f64(), last[1].as_f64()), (Some(-3.0), Some(1.0)));
}
