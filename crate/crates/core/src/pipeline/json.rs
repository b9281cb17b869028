//! Minimal deterministic JSON emitter for audit reports.
//!
//! Reports must be byte-identical across runs and platforms, so this
//! emitter gives the pipeline full control over the three things general
//! serializers leave unspecified: key order (insertion order, fixed by
//! the report builder), float formatting (always 17 significant digits,
//! enough to round-trip any f64) and whitespace (two-space indent).

use std::fmt::Write;

/// A JSON value with ordered object keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    UInt(u64),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn object() -> Json {
        Json::Object(Vec::new())
    }

    /// Appends a key; callers build objects in the exact order the
    /// report format documents.
    pub fn push(&mut self, key: &str, value: Json) {
        match self {
            Json::Object(entries) => entries.push((key.to_string(), value)),
            _ => panic!("push on a non-object"),
        }
    }

    /// `Float` for a defined value, `Null` for an undefined one —
    /// undefined rates stay visible in reports instead of defaulting.
    pub fn opt_float(v: Option<f64>) -> Json {
        match v {
            Some(x) => Json::Float(x),
            None => Json::Null,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::UInt(n) => {
                write!(out, "{n}").expect("write to String");
            }
            Json::Int(n) => {
                write!(out, "{n}").expect("write to String");
            }
            Json::Float(x) => out.push_str(&format_float(*x)),
            Json::Str(s) => write_escaped(out, s),
            Json::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Object(entries) => {
                if entries.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (key, value)) in entries.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
}

fn push_indent(out: &mut String, levels: usize) {
    for _ in 0..levels {
        out.push_str("  ");
    }
}

/// 17 significant digits in scientific notation: the shortest fixed
/// format guaranteed to reproduce any finite f64 bit-for-bit on parse.
pub fn format_float(x: f64) -> String {
    debug_assert!(x.is_finite(), "reports never contain non-finite floats");
    format!("{x:.16e}")
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                write!(out, "\\u{:04x}", c as u32).expect("write to String");
            }
            c => out.push(c),
        }
    }
    out.push('"');
}
