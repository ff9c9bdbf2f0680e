//! Loading snapshot logs and grade books, and assembling them into a
//! [`Cohort`] keyed by (student, assignment).

mod events;
mod grades;
mod session;

use std::path::PathBuf;

pub use events::{
    load_events, read_events, write_events_csv, write_events_jsonl, EventFormat, SnapshotEvent,
};
pub use grades::{
    load_grades, read_grades, write_grades, GradeBook, GradeRecord, SkippedStudent, HW_ASSIGNMENTS,
};
pub use session::{sessionize, Cohort, SessionizeReport, SourceDigest, Timeline, DEFAULT_IDLE_GAP};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: snapshot {snapshot_id}: invariant violated: {invariant}")]
    Invariant {
        line: usize,
        snapshot_id: String,
        invariant: &'static str,
    },
    #[error("line {line}: student {student_id}: {field} = {value} is outside [0, 100]")]
    GradeRange {
        line: usize,
        student_id: String,
        field: String,
        value: f64,
    },
    #[error("line {line}: duplicate student_id {student_id}")]
    DuplicateStudent { line: usize, student_id: String },
    #[error("grades header must be `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
