//! JSON output helpers shared by the report types.

use serde::{Serialize, Serializer};

/// Finite values as JSON numbers, non-finite ones as the strings `inf`, `-inf`, `nan`.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// `skip_serializing_if` predicate for fields that use NaN as "not computed".
pub fn is_nan(x: &f64) -> bool {
    x.is_nan()
}

/// Reads back a number written by [`ser_f64`].
pub fn parse_f64(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report types always serialize");
    out.push('\n');
    out
}
