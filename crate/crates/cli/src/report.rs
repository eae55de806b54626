//! Report assembly with fixed key order and float formatting.

use serde_json::{Map, Value};

/// Rounds to 6 significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Rounds every float in a JSON tree.
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

/// Float cell for TSV output, formatted like the JSON reports.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&round_sig(x)).expect("finite float serializes")
    } else {
        "NaN".to_string()
    }
}

/// One run's output: a JSON document and its tabular core.
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub table: String,
}

impl Report {
    pub fn new(command: &'static str, config: Value, result: Value, table: String) -> Self {
        Report { command, config, result, table }
    }

    pub fn to_json(&self, runtime_ms: Option<f64>) -> String {
        let mut m = Map::new();
        m.insert("command".into(), Value::String(self.command.into()));
        m.insert("config".into(), self.config.clone());
        m.insert("result".into(), self.result.clone());
        m.insert("runtime_ms".into(), runtime_ms.map_or(Value::Null, |t| serde_json::json!(t)));
        let mut s = serde_json::to_string_pretty(&normalize(Value::Object(m))).expect("report serializes");
        s.push('\n');
        s
    }
}
