use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ErrorType, ParseError};

static THREAD_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^Exception in thread "[^"]*" (?P<rest>.*)$"#).unwrap());
static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<class>[A-Za-z_$][A-Za-z0-9_$]*(?:\.[A-Za-z_$][A-Za-z0-9_$]*)*)(?::(?: (?P<detail>.*))?)?$")
        .unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeDiagnostic {
    pub exception_class: String,
    pub detail: Option<String>,
    /// `at ...` frames, trimmed, in order.
    pub frames: Vec<String>,
    pub error_type: ErrorType,
}

/// Parses a Java stack trace. The error identity is the exception class;
/// the detail message is kept but does not take part in identity.
pub fn parse_runtime_trace(raw: &str) -> Result<RuntimeDiagnostic, ParseError> {
    let mut lines = raw.lines().map(|l| l.trim_end_matches('\r'));
    let header = lines
        .by_ref()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(ParseError::EmptyTrace)?;

    let body = THREAD_PREFIX
        .captures(header)
        .map(|c| c.name("rest").unwrap().as_str())
        .unwrap_or(header);
    let caps = HEADER
        .captures(body)
        .ok_or_else(|| ParseError::BadTraceHeader {
            header: header.to_string(),
        })?;

    let exception_class = caps["class"].to_string();
    let detail = caps
        .name("detail")
        .map(|m| m.as_str().to_string())
        .filter(|d| !d.is_empty());
    let frames = lines
        .map(str::trim)
        .filter_map(|l| l.strip_prefix("at "))
        .map(str::to_string)
        .collect();

    Ok(RuntimeDiagnostic {
        error_type: ErrorType::runtime(exception_class.clone()),
        exception_class,
        detail,
        frames,
    })
}
