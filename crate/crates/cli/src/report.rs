use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Value};

/// Compact JSON with every float written at 17 significant digits.
struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17);
    value.serialize(&mut ser).expect("report serialises");
    String::from_utf8(buf).expect("utf-8 json")
}

pub struct Outcome {
    pub config: Value,
    pub result: Value,
    pub pass: bool,
}

pub fn success(command: &str, out: &Outcome) -> Value {
    json!({
        "schema": 1,
        "tool": "aflib",
        "version": aflib::VERSION,
        "command": command,
        "config": out.config,
        "verdict": if out.pass { "pass" } else { "fail" },
        "result": out.result,
    })
}

pub fn failure(command: &str, err: &aflib::Error) -> Value {
    json!({
        "schema": 1,
        "tool": "aflib",
        "version": aflib::VERSION,
        "command": command,
        "verdict": "error",
        "error": { "kind": err.kind(), "message": err.to_string() },
    })
}

pub fn emit(report: &Value, out: Option<&Path>) -> io::Result<()> {
    let mut text = to_json(report);
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}
