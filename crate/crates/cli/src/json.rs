//! Deterministic JSON emission: sorted keys, two-space indentation, numbers
//! with 17 significant digits, trailing newline.

use serde_json::{Map, Number, Value};

/// Seventeen significant digits, positional for moderate exponents and
/// scientific otherwise. Non-finite values become `null`.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-7..21).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let point = exp as usize + 1;
        if point >= digits.len() {
            format!("{}{}.0", digits, "0".repeat(point - digits.len()))
        } else {
            format!("{}.{}", &digits[..point], &digits[point..])
        }
    };
    format!("{sign}{body}")
}

fn number(n: &Number) -> String {
    if let Some(i) = n.as_i64() {
        i.to_string()
    } else if let Some(u) = n.as_u64() {
        u.to_string()
    } else {
        format_f64(n.as_f64().unwrap_or(f64::NAN))
    }
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&number(n)),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|i| i.is_number() || i.is_string()) {
                // Bundles, price rows and partition cells stay on one line.
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        Value::Number(n) => number(n),
                        other => other.to_string(),
                    })
                    .collect();
                out.push('[');
                out.push_str(&parts.join(", "));
                out.push(']');
            } else {
                out.push_str("[\n");
                for (j, item) in items.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write(item, indent + 1, out);
                    out.push_str(if j + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
        }
        Value::Object(map) => write_object(map, indent, out),
    }
}

fn write_object(map: &Map<String, Value>, indent: usize, out: &mut String) {
    if map.is_empty() {
        out.push_str("{}");
        return;
    }
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    out.push_str("{\n");
    for (j, k) in keys.iter().enumerate() {
        out.push_str(&"  ".repeat(indent + 1));
        out.push_str(&Value::String((*k).clone()).to_string());
        out.push_str(": ");
        write(&map[*k], indent + 1, out);
        out.push_str(if j + 1 < keys.len() { ",\n" } else { "\n" });
    }
    out.push_str(&"  ".repeat(indent));
    out.push('}');
}

pub fn to_string(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.push('\n');
    out
}

/// A float as a JSON value; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.5), "0.50000000000000000");
        assert_eq!(format_f64(1.5), "1.5000000000000000");
        assert_eq!(format_f64(-2.0), "-2.0000000000000000");
        assert_eq!(format_f64(0.0), "0.0000000000000000");
        assert_eq!(format_f64(123456.0), "123456.00000000000");
        assert_eq!(format_f64(1e-9), "1.0000000000000001e-9");
        assert_eq!(format_f64(1e21), "1.0000000000000000e21");
        assert_eq!(format_f64(f64::NAN), "null");
    }

    #[test]
    fn round_trips_exactly() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02e23, -7.5e-5, 123.456, 0.9486348555371409] {
            let back: f64 = format_f64(x).parse().unwrap();
            assert_eq!(back, x);
            let parsed: f64 = serde_json::from_str(&format_f64(x)).unwrap();
            assert_eq!(parsed, x);
        }
    }

    #[test]
    fn keys_sorted_and_newline_terminated() {
        let v = json!({"b": 1, "a": [0.5, 2.0], "c": {"z": true, "y": null}});
        let s = to_string(&v);
        assert!(s.ends_with("}\n"));
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        let y = s.find("\"y\"").unwrap();
        let z = s.find("\"z\"").unwrap();
        assert!(a < b && y < z);
        assert!(s.contains("[0.50000000000000000, 2.0000000000000000]"));
        let parsed: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["a"][1], json!(2.0));
    }
}
