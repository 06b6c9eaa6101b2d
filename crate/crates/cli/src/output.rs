//! Report serialization. JSON objects come out with sorted keys and floats
//! rounded to 12 significant digits, so equal inputs give equal bytes.

use serde_json::{Number, Value};

const SIG_DIGITS: usize = 12;

fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in place. Integers are left alone.
pub fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap());
            Number::from_f64(x)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        // serde_json's default map is ordered by key.
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, x)| (k, canonicalize(x))).collect())
        }
        other => other,
    }
}

pub fn to_json_string(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("values serialize");
    s.push('\n');
    s
}

/// CSV table with a header row; numbers are rounded like the JSON output.
pub fn to_csv_string(header: &[&str], rows: &[Vec<Value>]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| match canonicalize(v.clone()) {
            Value::String(s) => s,
            other => other.to_string(),
        }))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
