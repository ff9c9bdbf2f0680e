use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{canonicalize, ErrorType, ParseError};

static STANZA_HEAD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<file>.*?):(?P<line>[0-9]+): (?P<sev>error|warning): (?P<msg>.*)$").unwrap()
});
static ERROR_FOOTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<n>[0-9]+) errors?$").unwrap());
static OTHER_FOOTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([0-9]+ warnings?|Note: .*)$").unwrap());

/// One `file:line: error: message` stanza of javac output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompilerDiagnostic {
    pub file: String,
    pub line: u32,
    /// First-line message, verbatim.
    pub raw_message: String,
    /// Source excerpt, caret and `symbol:`/`location:` lines under the head.
    pub context: Vec<String>,
    pub error_type: ErrorType,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompilerOutput {
    pub diagnostics: Vec<CompilerDiagnostic>,
    /// Footer count as printed by the compiler, when present.
    pub footer_count: Option<usize>,
    pub warnings: Vec<String>,
}

/// Parses one snapshot's compiler output block into diagnostics, in the
/// order they appear.
///
/// Warning stanzas are skipped. When a trailing `N errors` footer disagrees
/// with the number of parsed error stanzas a warning is attached.
pub fn parse_compiler_output(raw: &str) -> Result<CompilerOutput, ParseError> {
    let mut out = CompilerOutput::default();
    // Context lines after a warning head belong to the warning.
    let mut in_error = false;
    let mut in_warning = false;

    for line in raw.lines() {
        let line = line.trim_end_matches('\r');
        if let Some(caps) = STANZA_HEAD.captures(line) {
            in_error = &caps["sev"] == "error";
            in_warning = !in_error;
            if !in_error {
                continue;
            }
            let Ok(line_no) = caps["line"].parse::<u32>() else {
                out.warnings
                    .push(format!("line number out of range in {line:?}"));
                in_error = false;
                continue;
            };
            if line_no == 0 {
                out.warnings.push(format!("line number 0 in {line:?}"));
            }
            let msg = caps["msg"].to_string();
            let canonical = canonicalize(&msg);
            if canonical.empty {
                out.warnings
                    .push(format!("empty message at {}:{}", &caps["file"], line_no));
            }
            out.diagnostics.push(CompilerDiagnostic {
                file: caps["file"].to_string(),
                line: line_no,
                raw_message: msg,
                context: Vec::new(),
                error_type: ErrorType::compiler(canonical.key),
            });
            continue;
        }
        let trimmed = line.trim();
        if let Some(caps) = ERROR_FOOTER.captures(trimmed) {
            out.footer_count = caps["n"].parse().ok();
            in_error = false;
            in_warning = false;
            continue;
        }
        if OTHER_FOOTER.is_match(trimmed) {
            in_error = false;
            in_warning = false;
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        match out.diagnostics.last_mut() {
            Some(diag) if in_error => diag.context.push(line.to_string()),
            _ if in_warning => {}
            Some(_) => {}
            None => out
                .warnings
                .push(format!("unrecognized line before first stanza: {line:?}")),
        }
    }

    if out.diagnostics.is_empty() && !raw.trim().is_empty() && out.footer_count.is_none() {
        // A block of warnings only is not an error, but neither is it parsable
        // compiler error output.
        let prefix: String = raw.trim_start().chars().take(80).collect();
        return Err(ParseError::NoCompilerStanza { prefix });
    }
    if let Some(n) = out.footer_count {
        if n != out.diagnostics.len() {
            out.warnings.push(format!(
                "footer reports {n} error(s) but {} stanza(s) were parsed",
                out.diagnostics.len()
            ));
        }
    }
    Ok(out)
}
