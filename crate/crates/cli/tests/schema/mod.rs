//! Just enough JSON Schema to check our own output documents: type, const,
//! enum, required, properties, additionalProperties, items, min/max(Items,
//! Length), exclusiveMinimum, oneOf and local `#/$defs/...` refs. Unknown
//! keywords are an error so a schema cannot silently outgrow this.

use serde_json::Value;

const ANNOTATIONS: &[&str] = &["$schema", "$id", "title", "description", "$defs"];

pub fn validate(schema: &Value, doc: &Value) -> Result<(), String> {
    check(schema, schema, doc, "$")
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|f| f.fract() == 0.0),
        other => panic!("unsupported type {other}"),
    }
}

fn resolve<'a>(root: &'a Value, r: &str) -> &'a Value {
    let name = r
        .strip_prefix("#/$defs/")
        .unwrap_or_else(|| panic!("unsupported $ref {r}"));
    &root["$defs"][name]
}

fn check(root: &Value, schema: &Value, v: &Value, at: &str) -> Result<(), String> {
    let s = schema.as_object().expect("schema must be an object");
    for (key, rule) in s {
        match key.as_str() {
            k if ANNOTATIONS.contains(&k) => {}
            "$ref" => check(root, resolve(root, rule.as_str().unwrap()), v, at)?,
            "type" => {
                let ok = match rule {
                    Value::String(t) => type_matches(t, v),
                    Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
                    _ => panic!("bad type rule"),
                };
                if !ok {
                    return Err(format!("{at}: expected {rule}, got {v}"));
                }
            }
            "const" if v != rule => return Err(format!("{at}: expected {rule}, got {v}")),
            "const" => {}
            "enum" => {
                if !rule.as_array().unwrap().contains(v) {
                    return Err(format!("{at}: {v} not in {rule}"));
                }
            }
            "minimum" | "maximum" | "exclusiveMinimum" => {
                let Some(x) = v.as_f64() else { continue };
                let b = rule.as_f64().unwrap();
                let ok = match key.as_str() {
                    "minimum" => x >= b,
                    "maximum" => x <= b,
                    _ => x > b,
                };
                if !ok {
                    return Err(format!("{at}: {x} violates {key} {b}"));
                }
            }
            "minItems" | "maxItems" => {
                let Some(a) = v.as_array() else { continue };
                let b = rule.as_u64().unwrap() as usize;
                if (key == "minItems" && a.len() < b) || (key == "maxItems" && a.len() > b) {
                    return Err(format!("{at}: {} items violates {key} {b}", a.len()));
                }
            }
            "minLength" | "maxLength" => {
                let Some(t) = v.as_str() else { continue };
                let b = rule.as_u64().unwrap() as usize;
                let n = t.chars().count();
                if (key == "minLength" && n < b) || (key == "maxLength" && n > b) {
                    return Err(format!("{at}: length {n} violates {key} {b}"));
                }
            }
            "required" => {
                let Some(o) = v.as_object() else { continue };
                for name in rule.as_array().unwrap() {
                    if !o.contains_key(name.as_str().unwrap()) {
                        return Err(format!("{at}: missing {name}"));
                    }
                }
            }
            "properties" => {
                let Some(o) = v.as_object() else { continue };
                for (name, sub) in rule.as_object().unwrap() {
                    if let Some(child) = o.get(name) {
                        check(root, sub, child, &format!("{at}.{name}"))?;
                    }
                }
            }
            "additionalProperties" => {
                let Some(o) = v.as_object() else { continue };
                let known = s.get("properties").and_then(Value::as_object);
                for (name, child) in o {
                    if known.is_some_and(|k| k.contains_key(name)) {
                        continue;
                    }
                    match rule {
                        Value::Bool(false) => return Err(format!("{at}: unexpected key {name}")),
                        Value::Bool(true) => {}
                        sub => check(root, sub, child, &format!("{at}.{name}"))?,
                    }
                }
            }
            "items" => {
                let Some(a) = v.as_array() else { continue };
                for (i, child) in a.iter().enumerate() {
                    check(root, rule, child, &format!("{at}[{i}]"))?;
                }
            }
            "oneOf" => {
                let hits = rule
                    .as_array()
                    .unwrap()
                    .iter()
                    .filter(|sub| check(root, sub, v, at).is_ok())
                    .count();
                if hits != 1 {
                    return Err(format!("{at}: matches {hits} oneOf branches"));
                }
            }
            other => panic!("unsupported schema keyword {other}"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::validate;
    use serde_json::json;

    #[test]
    fn subset_behaves() {
        let s = json!({
            "type": "object",
            "additionalProperties": false,
            "required": ["a"],
            "properties": {
                "a": { "type": "integer", "minimum": 0 },
                "b": { "$ref": "#/$defs/pair" },
                "c": { "oneOf": [{ "type": "null" }, { "type": "string", "minLength": 2 }] }
            },
            "$defs": { "pair": { "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2 } }
        });
        assert!(validate(&s, &json!({ "a": 1, "b": [0.5, 2], "c": null })).is_ok());
        assert!(validate(&s, &json!({ "a": 1, "c": "xy" })).is_ok());
        assert!(validate(&s, &json!({ "b": [1, 2] })).is_err());
        assert!(validate(&s, &json!({ "a": -1 })).is_err());
        assert!(validate(&s, &json!({ "a": 1.5 })).is_err());
        assert!(validate(&s, &json!({ "a": 1, "b": [1] })).is_err());
        assert!(validate(&s, &json!({ "a": 1, "b": [1, "x"] })).is_err());
        assert!(validate(&s, &json!({ "a": 1, "c": "x" })).is_err());
        assert!(validate(&s, &json!({ "a": 1, "z": 0 })).is_err());
    }
}
