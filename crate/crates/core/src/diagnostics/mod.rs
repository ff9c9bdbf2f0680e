//! Compiler-output and stack-trace parsing, error-type identity, and the
//! three-way snapshot outcome classification.
//!
//! Everything here is a pure function over strings, so the parsers can be
//! called from any number of worker threads.

mod canonical;
mod compiler;
mod runtime;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::SnapshotEvent;

pub use canonical::{canonicalize, Canonical, EMPTY_KEY, ID_PLACEHOLDER};
pub use compiler::{parse_compiler_output, CompilerDiagnostic, CompilerOutput};
pub use runtime::{parse_runtime_trace, RuntimeDiagnostic};

/// Which error stream an error belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Compiler,
    Runtime,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 2] = [ErrorKind::Compiler, ErrorKind::Runtime];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Compiler => "compiler",
            ErrorKind::Runtime => "runtime",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of an error for "same error type" comparisons.
///
/// Two errors are the same type iff both the kind and the canonical key are
/// byte-equal. Compiler keys are normalized message templates, runtime keys
/// are exception class names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ErrorType {
    kind: ErrorKind,
    canonical: String,
}

impl ErrorType {
    /// Builds an error type from an already-canonical key. Empty keys are
    /// replaced by [`EMPTY_KEY`] so the key is never empty.
    pub fn new(kind: ErrorKind, canonical: impl Into<String>) -> Self {
        let canonical = canonical.into();
        let canonical = if canonical.is_empty() {
            EMPTY_KEY.to_string()
        } else {
            canonical
        };
        ErrorType { kind, canonical }
    }

    pub fn compiler(canonical: impl Into<String>) -> Self {
        Self::new(ErrorKind::Compiler, canonical)
    }

    pub fn runtime(canonical: impl Into<String>) -> Self {
        Self::new(ErrorKind::Runtime, canonical)
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.canonical)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no `file:line: error:` stanza found in compiler output starting with {prefix:?}")]
    NoCompilerStanza { prefix: String },
    #[error("stack trace header not recognized: {header:?}")]
    BadTraceHeader { header: String },
    #[error("empty stack trace")]
    EmptyTrace,
}

/// The three mutually exclusive states a valid snapshot can end up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    NoCompile,
    CompiledWithRuntimeErrors,
    Clean,
}

pub fn label_snapshot(event: &SnapshotEvent) -> OutcomeLabel {
    if !event.compile_ok {
        OutcomeLabel::NoCompile
    } else if !event.runtime_traces.is_empty() {
        OutcomeLabel::CompiledWithRuntimeErrors
    } else {
        OutcomeLabel::Clean
    }
}

/// Errors carried by one snapshot in one stream: the identity of the first
/// error and the total number of errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotErrors {
    pub first: ErrorType,
    pub count: usize,
}

fn first_line(raw: &str) -> &str {
    raw.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
}

/// Compiler errors of a snapshot that failed to compile.
///
/// Every diagnostic block is parsed; the error identity is the canonical form
/// of the first parsed diagnostic and the count covers all diagnostics. A
/// block that holds no recognizable stanza counts as one error whose identity
/// is its canonicalized first line.
pub fn compiler_errors(event: &SnapshotEvent) -> Option<SnapshotErrors> {
    if event.compile_ok {
        return None;
    }
    let mut first = None;
    let mut count = 0usize;
    for block in &event.compiler_diagnostics {
        match parse_compiler_output(block) {
            Ok(out) if !out.diagnostics.is_empty() => {
                for w in &out.warnings {
                    log::warn!("snapshot {}: {}", event.snapshot_id, w);
                }
                if first.is_none() {
                    first = Some(out.diagnostics[0].error_type.clone());
                }
                count += out.diagnostics.len();
            }
            Ok(_) | Err(_) => {
                log::warn!(
                    "snapshot {}: unparsable compiler diagnostic, using its first line",
                    event.snapshot_id
                );
                if first.is_none() {
                    let key = canonicalize(first_line(block)).key;
                    first = Some(ErrorType::compiler(key));
                }
                count += 1;
            }
        }
    }
    first.map(|first| SnapshotErrors { first, count })
}

/// Runtime errors of a snapshot that compiled. `None` for clean or
/// non-compiling snapshots.
pub fn runtime_errors(event: &SnapshotEvent) -> Option<SnapshotErrors> {
    if !event.compile_ok || event.runtime_traces.is_empty() {
        return None;
    }
    let first = match parse_runtime_trace(&event.runtime_traces[0]) {
        Ok(diag) => diag.error_type,
        Err(err) => {
            log::warn!(
                "snapshot {}: {err}; using the trace's first line",
                event.snapshot_id
            );
            let key = first_line(&event.runtime_traces[0])
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ");
            ErrorType::runtime(key)
        }
    };
    Some(SnapshotErrors {
        first,
        count: event.runtime_traces.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn event(compile_ok: bool, diags: &[&str], traces: &[&str]) -> SnapshotEvent {
        SnapshotEvent {
            student_id: "s1".into(),
            assignment: 3,
            timestamp: Utc.timestamp_millis_opt(0).unwrap(),
            snapshot_id: "x".into(),
            valid: true,
            compile_ok,
            compiler_diagnostics: diags.iter().map(|s| s.to_string()).collect(),
            runtime_traces: traces.iter().map(|s| s.to_string()).collect(),
            tests_passed: 0,
            tests_failed: 0,
        }
    }

    #[test]
    fn labels_follow_the_three_states() {
        let no_compile = event(
            false,
            &[
                "A.java:1: error: ';' expected",
                "A.java:2: error: ';' expected",
            ],
            &[],
        );
        assert_eq!(label_snapshot(&no_compile), OutcomeLabel::NoCompile);
        let rt = event(true, &[], &["java.lang.NullPointerException"]);
        assert_eq!(label_snapshot(&rt), OutcomeLabel::CompiledWithRuntimeErrors);
        let clean = event(true, &[], &[]);
        assert_eq!(label_snapshot(&clean), OutcomeLabel::Clean);
    }

    #[test]
    fn compiler_errors_count_all_blocks_and_use_first_identity() {
        let ev = event(
            false,
            &[
                "A.java:3: error: cannot find symbol\n  x = 1;\n  ^\n  symbol: variable x\nA.java:4: error: ';' expected\n2 errors",
                "B.java:9: error: variable 'total' might not have been initialized",
            ],
            &[],
        );
        let errs = compiler_errors(&ev).unwrap();
        assert_eq!(errs.count, 3);
        assert_eq!(errs.first, ErrorType::compiler("cannot find symbol"));
    }

    #[test]
    fn unparsable_block_falls_back_to_first_line() {
        let ev = event(false, &["\n  something   went wrong 'here'\n"], &[]);
        let errs = compiler_errors(&ev).unwrap();
        assert_eq!(errs.count, 1);
        assert_eq!(errs.first.canonical(), "something went wrong ⟨id⟩");
    }

    #[test]
    fn runtime_errors_use_class_and_count_traces() {
        let ev = event(
            true,
            &[],
            &[
                "Exception in thread \"main\" java.lang.ArithmeticException: / by zero\n\tat A.main(A.java:3)",
                "java.lang.NullPointerException",
            ],
        );
        let errs = runtime_errors(&ev).unwrap();
        assert_eq!(errs.count, 2);
        assert_eq!(
            errs.first,
            ErrorType::runtime("java.lang.ArithmeticException")
        );
        assert!(runtime_errors(&event(true, &[], &[])).is_none());
    }

    #[test]
    fn error_type_equality_is_kind_and_key() {
        assert_ne!(ErrorType::compiler("x"), ErrorType::runtime("x"));
        assert_eq!(ErrorType::compiler(""), ErrorType::compiler(EMPTY_KEY));
    }
}
