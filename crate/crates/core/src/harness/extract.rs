//! Pulling structured answers out of free-form model output.

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("no JSON object found in response")]
    NoObject,
    #[error("response object has no `{0}` key")]
    MissingKey(&'static str),
    #[error("`{key}` is not a number: {value}")]
    NotNumeric { key: &'static str, value: String },
    #[error("`{key}` must be a string, got {value}")]
    NotText { key: &'static str, value: String },
    #[error("cannot read equation `{0}`")]
    BadEquation(String),
}

/// Finds the first balanced `{...}` that parses as a JSON object.
///
/// Surrounding prose and code fences are skipped. Braces inside string
/// literals are ignored while matching.
pub fn extract_json_payload(raw: &str) -> Result<Map<String, Value>, ExtractError> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(offset) = raw[start..].find('{') {
        let open = start + offset;
        if let Some(close) = matching_brace(bytes, open) {
            if let Ok(Value::Object(map)) = serde_json::from_str(&raw[open..=close]) {
                return Ok(map);
            }
        }
        start = open + 1;
    }
    Err(ExtractError::NoObject)
}

fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Reads a JSON number or a numeric string (`"0.018"`, `" 1e-3 "`, `"100,000"`).
pub fn coerce_number(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let cleaned: String = s.trim().chars().filter(|c| *c != ',' && *c != '_').collect();
            cleaned.parse::<f64>().ok()
        }
        _ => None,
    }
}

fn number_field(map: &Map<String, Value>, key: &'static str) -> Result<f64, ExtractError> {
    let value = map.get(key).ok_or(ExtractError::MissingKey(key))?;
    coerce_number(value).ok_or_else(|| ExtractError::NotNumeric { key, value: value.to_string() })
}

/// The `{"answer": ...}` reply to the direct prompt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectResponse {
    pub answer: f64,
}

impl DirectResponse {
    pub fn from_payload(map: &Map<String, Value>) -> Result<Self, ExtractError> {
        Ok(DirectResponse { answer: number_field(map, "answer")? })
    }

    pub fn parse(raw: &str) -> Result<Self, ExtractError> {
        Self::from_payload(&extract_json_payload(raw)?)
    }
}

/// The `{"equation": ..., "x0": ...}` reply to the formulator prompt.
///
/// `x0` may be non-finite here; the harness rejects that before solving.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulatorResponse {
    pub equation: String,
    pub x0: f64,
}

impl FormulatorResponse {
    pub fn from_payload(map: &Map<String, Value>) -> Result<Self, ExtractError> {
        let equation = match map.get("equation") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => return Err(ExtractError::NotText { key: "equation", value: other.to_string() }),
            None => return Err(ExtractError::MissingKey("equation")),
        };
        Ok(FormulatorResponse { equation, x0: number_field(map, "x0")? })
    }

    pub fn parse(raw: &str) -> Result<Self, ExtractError> {
        Self::from_payload(&extract_json_payload(raw)?)
    }
}

/// Turns the equation text into a bare residual expression.
///
/// Accepts `expr`, `expr = 0`, `f(x) = expr`, `lhs = rhs` (becomes
/// `(lhs) - (rhs)`) and `f(x) = lhs = rhs`.
pub fn normalize_equation(text: &str) -> Result<String, ExtractError> {
    let text = text.trim().trim_end_matches(';').trim();
    if text.contains("==") || text.contains("<=") || text.contains(">=") || text.contains("!=") {
        return Err(ExtractError::BadEquation(text.to_string()));
    }
    let mut parts: Vec<&str> = text.split('=').map(str::trim).collect();
    if parts.len() > 1 && is_label(parts[0]) {
        parts.remove(0);
    }
    match parts.as_slice() {
        [single] if !single.is_empty() => Ok(single.to_string()),
        [lhs, rhs] if !lhs.is_empty() && !rhs.is_empty() => {
            if rhs.parse::<f64>() == Ok(0.0) {
                Ok(lhs.to_string())
            } else {
                Ok(format!("({lhs}) - ({rhs})"))
            }
        }
        _ => Err(ExtractError::BadEquation(text.to_string())),
    }
}

/// `f(x)`, `g(x)`, `F`: a left-hand name rather than part of the equation.
fn is_label(s: &str) -> bool {
    let name = s.strip_suffix("(x)").unwrap_or(s).trim();
    !name.is_empty()
        && name != "x"
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && name.starts_with(|c: char| c.is_ascii_alphabetic())
        && (s.ends_with("(x)") || name.len() == 1)
}
