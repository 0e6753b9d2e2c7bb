//! Corpus documents and emitted controllers against the shipped schemas.
//! The checker covers the keywords the schemas use except `pattern`,
//! which is left to the parsers.

mod common;

use serde_json::Value;

use common::checks::{games, solved};
use tbsynth::controller::build_controller;
use tbsynth::format::{PlanDocument, SpecDocument};
use tbsynth::solver::{attractor, extract_strategy};

fn schema(name: &str) -> Value {
    let path = common::corpus_dir("schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        other => panic!("unsupported type {other}"),
    }
}

fn check(root: &Value, s: &Value, v: &Value, at: &str, errs: &mut Vec<String>) {
    let s = s.as_object().expect("schema object");
    if let Some(r) = s.get("$ref") {
        let name = r.as_str().unwrap().strip_prefix("#/$defs/").expect("local ref");
        return check(root, &root["$defs"][name], v, at, errs);
    }
    for (key, rule) in s {
        match key.as_str() {
            "$schema" | "$id" | "title" | "$defs" | "pattern" => {}
            "type" => {
                let ok = match rule {
                    Value::String(t) => type_matches(t, v),
                    Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
                    _ => panic!("bad type"),
                };
                if !ok {
                    errs.push(format!("{at}: expected {rule}, found {v}"));
                    return;
                }
            }
            "const" if v != rule => errs.push(format!("{at}: expected {rule}")),
            "enum" if !rule.as_array().unwrap().contains(v) => errs.push(format!("{at}: {v} not in {rule}")),
            "const" | "enum" => {}
            "minimum" => {
                if let (Some(x), Some(m)) = (v.as_i64(), rule.as_i64()) {
                    if x < m {
                        errs.push(format!("{at}: {x} below {m}"));
                    }
                }
            }
            "required" => {
                for k in rule.as_array().unwrap() {
                    if v.get(k.as_str().unwrap()).is_none() {
                        errs.push(format!("{at}: missing {k}"));
                    }
                }
            }
            "properties" => {
                for (k, sub) in rule.as_object().unwrap() {
                    if let Some(x) = v.get(k) {
                        check(root, sub, x, &format!("{at}.{k}"), errs);
                    }
                }
            }
            "additionalProperties" => {
                let known = s.get("properties").and_then(Value::as_object);
                for (k, x) in v.as_object().into_iter().flatten() {
                    if !known.is_some_and(|p| p.contains_key(k)) {
                        check(root, rule, x, &format!("{at}.{k}"), errs);
                    }
                }
            }
            "items" => {
                for (i, x) in v.as_array().into_iter().flatten().enumerate() {
                    check(root, rule, x, &format!("{at}[{i}]"), errs);
                }
            }
            "prefixItems" => {
                for (i, (sub, x)) in rule.as_array().unwrap().iter().zip(v.as_array().into_iter().flatten()).enumerate() {
                    check(root, sub, x, &format!("{at}[{i}]"), errs);
                }
            }
            "minItems" | "maxItems" => {
                let n = v.as_array().map_or(0, Vec::len) as u64;
                let m = rule.as_u64().unwrap();
                if (key == "minItems" && n < m) || (key == "maxItems" && n > m) {
                    errs.push(format!("{at}: {n} items violates {key} {m}"));
                }
            }
            "oneOf" => {
                let hits = rule
                    .as_array()
                    .unwrap()
                    .iter()
                    .filter(|sub| {
                        let mut e = Vec::new();
                        check(root, sub, v, at, &mut e);
                        e.is_empty()
                    })
                    .count();
                if hits != 1 {
                    errs.push(format!("{at}: {hits} alternatives of oneOf match"));
                }
            }
            other => panic!("unsupported keyword {other}"),
        }
    }
}

fn violations(schema: &Value, doc: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    check(schema, schema, doc, "$", &mut errs);
    errs
}

#[test]
fn corpus_specifications_conform() {
    let s = schema("spec");
    let mut seen = 0;
    for kind in ["problems", "games", "worked"] {
        for entry in std::fs::read_dir(common::corpus_dir(kind)).unwrap() {
            let path = entry.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            let doc: Value = serde_json::from_str(&text).unwrap();
            let (schema, parsed) = if path.to_string_lossy().ends_with(".plan.json") {
                (schema("plan"), PlanDocument::parse(&text).is_ok())
            } else {
                (s.clone(), SpecDocument::parse(&text).is_ok())
            };
            assert!(parsed, "{}", path.display());
            let errs = violations(&schema, &doc);
            assert!(errs.is_empty(), "{}: {errs:?}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 15);
}

#[test]
fn emitted_controllers_conform() {
    let s = schema("controller");
    let mut seen = 0;
    for (name, game) in games() {
        let (ctx, _, arena) = solved(&game);
        let attr = attractor(&arena);
        let Ok(ctrl) = build_controller(&arena, &attr, &extract_strategy(&arena, &attr)) else { continue };
        let doc: Value = serde_json::from_str(&ctrl.to_json(&ctx.sig)).unwrap();
        let errs = violations(&s, &doc);
        assert!(errs.is_empty(), "{name}: {errs:?}");
        seen += 1;
    }
    assert_eq!(seen, 3);
}

#[test]
fn checker_rejects_bad_documents() {
    let s = schema("controller");
    let doc = serde_json::json!({"format": "tbsynth-controller/2", "initial": -1, "states": [{"id": 0}]});
    let errs = violations(&s, &doc);
    assert!(errs.iter().any(|e| e.contains("format")));
    assert!(errs.iter().any(|e| e.contains("transitions")));
    assert!(errs.iter().any(|e| e.contains("below")));
    assert!(errs.iter().any(|e| e.contains("missing \"goal\"")));
}
