#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// `(command, fixture, exit code)` from the expected table.
pub fn expected_runs() -> Vec<(String, String, i32)> {
    let text = std::fs::read_to_string(fixtures().join("expected_exit_codes.json")).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let mut out = Vec::new();
    for (cmd, files) in doc.as_object().unwrap() {
        for (f, code) in files.as_object().unwrap() {
            out.push((cmd.clone(), f.clone(), code.as_i64().unwrap() as i32));
        }
    }
    out
}

pub fn run_bin(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_pencilph"))
        .args(args)
        .current_dir(fixtures())
        .env_remove("PENCILPH_TOLERANCE")
        .output()
        .unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn type_ok(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

/// Checks `type`, `enum`, `required`, `properties`, `additionalProperties` and `items`.
pub fn schema_errors(schema: &Value, v: &Value, path: &str) -> Vec<String> {
    let mut errs = Vec::new();
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_ok(s, v),
            Value::Array(ts) => ts.iter().any(|s| type_ok(s.as_str().unwrap(), v)),
            _ => true,
        };
        if !ok {
            errs.push(format!("{path}: expected type {t}"));
            return errs;
        }
    }
    if let Some(Value::Array(options)) = schema.get("enum") {
        if !options.contains(v) {
            errs.push(format!("{path}: {v} not in enum"));
        }
    }
    if let Value::Object(obj) = v {
        if let Some(Value::Array(req)) = schema.get("required") {
            for r in req {
                if !obj.contains_key(r.as_str().unwrap()) {
                    errs.push(format!("{path}: missing {r}"));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, val) in obj {
            let sub = format!("{path}.{k}");
            match (props.and_then(|p| p.get(k)), schema.get("additionalProperties")) {
                (Some(s), _) => errs.extend(schema_errors(s, val, &sub)),
                (None, Some(Value::Bool(false))) => errs.push(format!("{sub}: not allowed")),
                (None, Some(s @ Value::Object(_))) => errs.extend(schema_errors(s, val, &sub)),
                _ => {}
            }
        }
    }
    if let (Value::Array(items), Some(s)) = (v, schema.get("items")) {
        for (i, x) in items.iter().enumerate() {
            errs.extend(schema_errors(s, x, &format!("{path}[{i}]")));
        }
    }
    errs
}

pub fn report_schema() -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report-schema.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}
