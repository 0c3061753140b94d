use matchbox_core::spec::to_json;
use matchbox_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::Format;

pub struct Context {
    pub format: Format,
    pub seed: u64,
}

pub const DECIDED: u8 = 0;
pub const FAILED: u8 = 1;
pub const INCONCLUSIVE: u8 = 2;

/// What main prints and returns.
pub struct Outcome {
    pub body: Option<String>,
    pub message: Option<String>,
    pub code: u8,
}

impl Outcome {
    pub fn ok(body: String, code: u8) -> Self {
        Outcome { body: Some(body), message: None, code }
    }

    pub fn error(msg: impl std::fmt::Display) -> Self {
        Outcome { body: None, message: Some(format!("error: {msg}")), code: FAILED }
    }
}

pub fn report_schema(command: &str) -> String {
    format!("matchbox.report.{command}/1")
}

/// {"schema", "params", "report"} with the seed folded into params.
pub fn envelope<T: Serialize>(ctx: &Context, command: &str, mut params: Value, report: &T) -> Result<String, Error> {
    if let Value::Object(m) = &mut params {
        m.insert("seed".into(), json!(ctx.seed));
    }
    let v = json!({
        "schema": report_schema(command),
        "params": params,
        "report": serde_json::to_value(report)?,
    });
    to_json(&v)
}

/// Partial output for a run cut short by a resource limit.
pub fn resource(ctx: &Context, command: &str, params: Value, message: &str, partial: Option<Value>) -> Outcome {
    let report = json!({ "complete": false, "message": message, "partial": partial });
    match envelope(ctx, command, params, &report) {
        Ok(body) => Outcome { body: Some(body), message: Some(format!("resource limit: {message}")), code: INCONCLUSIVE },
        Err(e) => Outcome::error(e),
    }
}

/// Maps a library error to an outcome; resource errors keep their partial data.
pub fn from_error(ctx: &Context, command: &str, params: Value, e: Error) -> Outcome {
    match e {
        Error::Resource { message, partial } => resource(ctx, command, params, &message, partial),
        other => Outcome::error(other),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn unsupported(command: &str, format: Format) -> Outcome {
    Outcome::error(format!("{command} does not support --format {format:?}").to_lowercase())
}
