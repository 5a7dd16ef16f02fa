//! Indented JSON that keeps numeric vectors and matrix rows on one line.

use serde::Serialize;
use serde_json::Value;

pub fn to_string<T: Serialize>(v: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(v)?;
    let mut out = String::new();
    write(&value, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

/// Arrays of scalars, or of arrays of scalars (complex entries), stay inline.
fn inline(v: &Value) -> bool {
    let scalar = |x: &Value| !matches!(x, Value::Array(_) | Value::Object(_));
    match v {
        Value::Array(items) => items.iter().all(|x| scalar(x) || matches!(x, Value::Array(inner) if inner.iter().all(scalar))),
        Value::Object(map) => map.is_empty(),
        _ => true,
    }
}

fn write(v: &Value, depth: usize, out: &mut String) -> serde_json::Result<()> {
    let pad = |d: usize| "  ".repeat(d);
    if inline(v) {
        out.push_str(&serde_json::to_string(v)?);
        return Ok(());
    }
    match v {
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, x) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write(x, depth + 1, out)?;
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, x)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&serde_json::to_string(key)?);
                out.push_str(": ");
                write(x, depth + 1, out)?;
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        _ => unreachable!("scalars are inline"),
    }
    Ok(())
}
