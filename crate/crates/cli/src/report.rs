//! Canonical report JSON: sorted keys, floats at 12 significant digits.

use serde_json::{Map, Value};

pub fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if !x.is_finite() {
                return Value::Null;
            }
            let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        Value::Object(o) => {
            let mut sorted: Vec<(String, Value)> = o.into_iter().collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(sorted.into_iter().map(|(k, v)| (k, canonicalize(v))).collect::<Map<_, _>>())
        }
        other => other,
    }
}

pub fn render(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("report serializes");
    s.push('\n');
    s
}
