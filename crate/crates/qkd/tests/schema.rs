//! Checks emitted run reports against `schemas/run_report.schema.json`
//! with a small hand-rolled validator covering the subset of JSON Schema
//! the file uses (type, required, properties, additionalProperties, enum,
//! minimum/maximum, pattern for the hex fingerprint).

use serde_json::Value;

use qkd::protocol::{Protocol, SessionConfig};
use qkd::report::RunReport;
use qkd::session::run_in_process;

fn type_matches(ty: &str, value: &Value) -> bool {
    match ty {
        "object" => value.is_object(),
        "string" => value.is_string(),
        "integer" => value.as_f64().is_some_and(|f| f.fract() == 0.0),
        "number" => value.is_number(),
        "null" => value.is_null(),
        "boolean" => value.is_boolean(),
        "array" => value.is_array(),
        other => panic!("schema uses unsupported type {other:?}"),
    }
}

fn validate(schema: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => panic!("malformed type at {path}"),
        };
        if !allowed.iter().any(|t| type_matches(t, value)) {
            errors.push(format!("{path}: expected type {allowed:?}, got {value}"));
            return;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errors.push(format!("{path}: {value} not in enum {options:?}"));
        }
    }
    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        if let Some(f) = value.as_f64() {
            if f < min {
                errors.push(format!("{path}: {f} below minimum {min}"));
            }
        }
    }
    if let Some(max) = schema.get("maximum").and_then(Value::as_f64) {
        if let Some(f) = value.as_f64() {
            if f > max {
                errors.push(format!("{path}: {f} above maximum {max}"));
            }
        }
    }
    if let Some(min) = schema.get("exclusiveMinimum").and_then(Value::as_f64) {
        if let Some(f) = value.as_f64() {
            if f <= min {
                errors.push(format!("{path}: {f} not above exclusive minimum {min}"));
            }
        }
    }
    if let Some(max) = schema.get("exclusiveMaximum").and_then(Value::as_f64) {
        if let Some(f) = value.as_f64() {
            if f >= max {
                errors.push(format!("{path}: {f} not below exclusive maximum {max}"));
            }
        }
    }
    if let Some(pattern) = schema.get("pattern").and_then(Value::as_str) {
        // the only pattern in the schema is the 16-hex-digit fingerprint
        assert_eq!(pattern, "^[0-9a-f]{16}$", "unexpected pattern at {path}");
        let ok = value
            .as_str()
            .is_some_and(|s| s.len() == 16 && s.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        if !ok {
            errors.push(format!("{path}: {value} does not match {pattern}"));
        }
    }
    if let Some(obj) = value.as_object() {
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for name in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(name) {
                    errors.push(format!("{path}: missing required field {name:?}"));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
            let known = props.map(|p| p.keys().collect::<Vec<_>>()).unwrap_or_default();
            for key in obj.keys() {
                if !known.contains(&key) {
                    errors.push(format!("{path}: unexpected field {key:?}"));
                }
            }
        }
        if let Some(props) = props {
            for (key, sub) in props {
                if let Some(field) = obj.get(key) {
                    validate(sub, field, &format!("{path}.{key}"), errors);
                }
            }
        }
    }
}

fn assert_valid(schema: &Value, report: &RunReport) {
    let value: Value = serde_json::from_str(&report.to_json()).unwrap();
    let mut errors = Vec::new();
    validate(schema, &value, "$", &mut errors);
    assert!(errors.is_empty(), "schema violations:\n{}", errors.join("\n"));
}

fn load_schema() -> Value {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/schemas/run_report.schema.json"
    ))
    .unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn completed_run_report_matches_schema() {
    let schema = load_schema();
    for protocol in [Protocol::Bb84, Protocol::B92, Protocol::E91] {
        let cfg = SessionConfig::new(protocol, 2_000, 11);
        let (sender, receiver) = run_in_process(&cfg).unwrap();
        assert_valid(&schema, &RunReport::from_session(&cfg, &sender, &receiver, 3.25));
    }
}

#[test]
fn aborted_run_report_matches_schema() {
    let schema = load_schema();
    let mut cfg = SessionConfig::new(Protocol::Bb84, 2_000, 12);
    cfg.eve = qkd::eve::EveStrategy::InterceptResend {
        fraction: 1.0,
        policy: qkd::eve::BasisPolicy::RandomBasis,
    };
    let (sender, receiver) = run_in_process(&cfg).unwrap();
    let report = RunReport::from_session(&cfg, &sender, &receiver, 0.5);
    assert_eq!(report.status, "aborted");
    assert_valid(&schema, &report);
}

#[test]
fn validator_rejects_corrupted_reports() {
    let schema = load_schema();
    let cfg = SessionConfig::new(Protocol::Bb84, 1_000, 13);
    let (sender, receiver) = run_in_process(&cfg).unwrap();
    let report = RunReport::from_session(&cfg, &sender, &receiver, 0.5);
    let mut value: Value = serde_json::from_str(&report.to_json()).unwrap();

    let object = value.as_object_mut().unwrap();
    object.remove("qber");
    object.insert("status".into(), Value::String("done".into()));
    object.insert("surprise".into(), Value::Bool(true));

    let mut errors = Vec::new();
    validate(&schema, &value, "$", &mut errors);
    assert!(errors.iter().any(|e| e.contains("missing required field \"qber\"")));
    assert!(errors.iter().any(|e| e.contains("not in enum")));
    assert!(errors.iter().any(|e| e.contains("unexpected field \"surprise\"")));
}
