//! Every JSON report validates against `schema/run_report.schema.json`.
//!
//! The checker below covers the keywords the shipped schema uses (`type`,
//! `required`, `properties`, `additionalProperties: false`, `enum`,
//! `items`) and rejects any other keyword, so a schema change that needs
//! more than this subset fails loudly instead of passing unchecked.

use std::process::Command;

use serde_json::{json, Value};

const SCHEMA: &str = include_str!("../schema/run_report.schema.json");
const ANNOTATIONS: [&str; 2] = ["$schema", "title"];

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        other => panic!("unknown type `{other}` in schema"),
    }
}

fn validate(schema: &Value, v: &Value, path: &str, errors: &mut Vec<String>) {
    let rules = schema.as_object().expect("schema nodes are objects");
    for key in rules.keys() {
        let known = [
            "type",
            "required",
            "properties",
            "additionalProperties",
            "enum",
            "items",
        ];
        assert!(
            known.contains(&key.as_str()) || ANNOTATIONS.contains(&key.as_str()),
            "schema keyword `{key}` is not supported by this checker"
        );
    }
    if let Some(t) = rules.get("type") {
        let ok = match t {
            Value::String(name) => type_matches(name, v),
            Value::Array(names) => names.iter().any(|n| type_matches(n.as_str().unwrap(), v)),
            _ => panic!("bad `type` at {path}"),
        };
        if !ok {
            errors.push(format!("{path}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(allowed) = rules.get("enum") {
        if !allowed.as_array().unwrap().contains(v) {
            errors.push(format!("{path}: {v} not in {allowed}"));
        }
    }
    if let Value::Object(obj) = v {
        if let Some(req) = rules.get("required") {
            for k in req.as_array().unwrap() {
                if !obj.contains_key(k.as_str().unwrap()) {
                    errors.push(format!("{path}: missing `{}`", k.as_str().unwrap()));
                }
            }
        }
        let props = rules.get("properties").and_then(Value::as_object);
        match rules.get("additionalProperties") {
            None | Some(Value::Bool(true)) => {}
            Some(Value::Bool(false)) => {
                for k in obj.keys() {
                    if !props.is_some_and(|p| p.contains_key(k)) {
                        errors.push(format!("{path}: unexpected `{k}`"));
                    }
                }
            }
            Some(other) => panic!("unsupported additionalProperties {other}"),
        }
        if let Some(props) = props {
            for (k, sub) in props {
                if let Some(child) = obj.get(k) {
                    validate(sub, child, &format!("{path}.{k}"), errors);
                }
            }
        }
    }
    if let (Value::Array(items), Some(sub)) = (v, rules.get("items")) {
        for (i, item) in items.iter().enumerate() {
            validate(sub, item, &format!("{path}[{i}]"), errors);
        }
    }
}

fn check(report: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let mut errors = Vec::new();
    validate(&schema, report, "$", &mut errors);
    errors
}

fn assert_valid(text: &str) -> Value {
    let report: Value =
        serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"));
    let errors = check(&report);
    assert!(errors.is_empty(), "{errors:#?}\n{text}");
    report
}

fn hgvm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hgvm"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn steady_and_design_reports() {
    let ok = hgvm(&[
        "steady", "--vin", "12", "--duty", "0.55", "--io", "1.32", "--json",
    ]);
    assert_eq!(
        assert_valid(std::str::from_utf8(&ok.stdout).unwrap())["status"],
        "ok"
    );
    let bad = hgvm(&[
        "steady", "--vin", "12", "--duty", "1.5", "--io", "1.32", "--json",
    ]);
    assert_eq!(
        assert_valid(std::str::from_utf8(&bad.stdout).unwrap())["exit_code"],
        2
    );
    let ok = hgvm(&[
        "design", "--vin", "12", "--vo", "151", "--po", "200", "--fs", "50e3", "--json",
    ]);
    assert_valid(std::str::from_utf8(&ok.stdout).unwrap());
    let bad = hgvm(&[
        "design", "--vin", "12", "--vo", "20", "--po", "200", "--fs", "50e3", "--json",
    ]);
    assert_eq!(
        assert_valid(std::str::from_utf8(&bad.stdout).unwrap())["error"]["category"],
        "design"
    );
}

#[test]
fn simulate_reports() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text, code) in [
        // The 500 ohm load leaves L2 and L3 within 10% of critical, so warnings are populated.
        ("ok.toml", "preset = nominal-r500\n[sim]\nperiods = 5\n", 0),
        ("dcm.toml", "preset = nominal\n[components]\nr_load = 20000\n[sim]\nperiods = 20\nshooting = false\n", 3),
    ] {
        let cfg = dir.path().join(name);
        std::fs::write(&cfg, text).unwrap();
        let json = dir.path().join(format!("{name}.json"));
        let out = hgvm(&["simulate", "--config", cfg.to_str().unwrap(), "--json", json.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(code));
        let report = assert_valid(&std::fs::read_to_string(&json).unwrap());
        assert_eq!(report["exit_code"], code);
        if code == 0 {
            assert!(!report["warnings"].as_array().unwrap().is_empty());
        }
    }
}

#[test]
fn control_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ctl.toml");
    std::fs::write(&cfg, "preset = prototype\n[components]\nr_load = 114.1\n").unwrap();
    let json = dir.path().join("ctl.json");
    let out = hgvm(&[
        "control",
        "--config",
        cfg.to_str().unwrap(),
        "--refs",
        "0:60,0.002:65",
        "--end",
        "0.004",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_valid(&std::fs::read_to_string(&json).unwrap());
}

#[test]
fn checker_rejects_malformed_reports() {
    let good = json!({
        "tool": "hgvm", "version": "0.1.0", "command": "steady", "status": "ok", "exit_code": 0,
        "inputs": {}, "results": {}, "warnings": [{"component": "L1", "message": "m"}], "error": null
    });
    assert!(check(&good).is_empty());
    let mutations: [(&str, Value); 6] = [
        ("status", json!("fine")),
        ("exit_code", json!(1)),
        ("results", json!([1, 2])),
        ("warnings", json!([{"component": "L1"}])),
        ("error", json!({"category": "oops", "message": "m"})),
        ("extra", json!(true)),
    ];
    for (key, value) in mutations {
        let mut bad = good.clone();
        bad[key] = value;
        assert!(!check(&bad).is_empty(), "{key} mutation accepted");
    }
    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("warnings");
    assert!(!check(&missing).is_empty());
}
