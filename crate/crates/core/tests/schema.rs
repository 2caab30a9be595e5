//! The published schema file must describe exactly what the parser accepts.

use std::fs;
use std::path::PathBuf;

use magflow_core::scenario::{build_scenario, parse_config};
use serde_json::Value;

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema() -> Value {
    serde_json::from_str(&fs::read_to_string(repo().join("schema/scenario.schema.json")).unwrap()).unwrap()
}

#[test]
fn schema_keys_and_defaults_match_the_parser() {
    let schema = schema();
    let defaults = serde_json::to_value(parse_config("[manifold]\ndim = 2\n").unwrap()).unwrap();
    let top = schema["properties"].as_object().unwrap();
    let parsed = defaults.as_object().unwrap();
    let mut a: Vec<_> = top.keys().collect();
    let mut b: Vec<_> = parsed.keys().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
    for (section, value) in parsed {
        let Some(fields) = value.as_object() else {
            assert_eq!(&top[section]["default"], value, "{section}");
            continue;
        };
        let props = top[section]["properties"].as_object().unwrap_or_else(|| panic!("{section}"));
        let mut a: Vec<_> = props.keys().collect();
        let mut b: Vec<_> = fields.keys().collect();
        a.sort();
        b.sort();
        assert_eq!(a, b, "keys of [{section}]");
        for (key, v) in fields {
            if section == "manifold" && key == "dim" {
                continue;
            }
            let d = props[key].get("default").unwrap_or_else(|| panic!("{section}.{key} has no default"));
            let same = match (d.as_f64(), v.as_f64()) {
                (Some(x), Some(y)) => x == y,
                _ => d == v,
            };
            assert!(same, "{section}.{key}: schema {d} vs parser {v}");
        }
    }
}

#[test]
fn shipped_configs_are_valid() {
    let mut count = 0;
    for entry in fs::read_dir(repo().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            build_scenario(cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
