use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::Duration;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GradeBook, IngestError, SnapshotEvent};

pub const DEFAULT_IDLE_GAP: Duration = Duration::minutes(10);

/// Time-ordered valid snapshots of one student on one assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub events: Vec<SnapshotEvent>,
    /// Indices `i >= 1` at which a new session starts, i.e. the gap between
    /// events `i - 1` and `i` exceeded the idle threshold.
    pub session_starts: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub path: String,
    pub sha256: String,
}

impl SourceDigest {
    pub fn of_file(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(SourceDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Cohort dataset keyed by (student_id, assignment). Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub timelines: BTreeMap<(String, u8), Timeline>,
    pub grade_book: GradeBook,
    pub provenance: Vec<SourceDigest>,
}

impl Cohort {
    pub fn with_grades(mut self, grade_book: GradeBook) -> Self {
        self.grade_book = grade_book;
        self
    }

    pub fn with_provenance(mut self, digest: SourceDigest) -> Self {
        self.provenance.push(digest);
        self
    }

    pub fn timeline(&self, student_id: &str, assignment: u8) -> Option<&Timeline> {
        self.timelines.get(&(student_id.to_string(), assignment))
    }

    /// All events in key order.
    pub fn events(&self) -> impl Iterator<Item = &SnapshotEvent> {
        self.timelines.values().flat_map(|t| t.events.iter())
    }

    pub fn event_count(&self) -> usize {
        self.timelines.values().map(|t| t.events.len()).sum()
    }

    /// Distinct student ids that appear in the event log, sorted.
    pub fn students(&self) -> BTreeSet<&str> {
        self.timelines.keys().map(|(s, _)| s.as_str()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionizeReport {
    pub invalid_dropped: usize,
    /// snapshot_ids whose later copies were dropped.
    pub duplicates_dropped: Vec<String>,
}

/// Filters, deduplicates and orders events into per-(student, assignment)
/// timelines and marks idle-gap session boundaries.
///
/// Invalid snapshots are dropped. Of several events sharing a snapshot_id
/// the one that sorts first (by snapshot_id, timestamp, then content) is
/// kept, so the result does not depend on input order.
pub fn sessionize(events: &[SnapshotEvent], idle_gap: Duration) -> (Cohort, SessionizeReport) {
    let mut report = SessionizeReport::default();

    let mut valid: Vec<&SnapshotEvent> = events
        .iter()
        .filter(|e| {
            if !e.valid {
                report.invalid_dropped += 1;
            }
            e.valid
        })
        .collect();
    valid.sort_by(|a, b| {
        (&a.snapshot_id, a.timestamp, &a.student_id, a.assignment)
            .cmp(&(&b.snapshot_id, b.timestamp, &b.student_id, b.assignment))
            .then_with(|| content_key(a).cmp(&content_key(b)))
    });

    let mut unique: BTreeMap<&str, &SnapshotEvent> = BTreeMap::new();
    for ev in valid {
        match unique.entry(ev.snapshot_id.as_str()) {
            Entry::Vacant(slot) => {
                slot.insert(ev);
            }
            Entry::Occupied(_) => {
                log::warn!("duplicate snapshot_id {} dropped", ev.snapshot_id);
                report.duplicates_dropped.push(ev.snapshot_id.clone());
            }
        }
    }

    let mut timelines: BTreeMap<(String, u8), Timeline> = BTreeMap::new();
    for ev in unique.into_values() {
        timelines
            .entry((ev.student_id.clone(), ev.assignment))
            .or_default()
            .events
            .push(ev.clone());
    }
    for timeline in timelines.values_mut() {
        timeline
            .events
            .sort_by(|a, b| (a.timestamp, &a.snapshot_id).cmp(&(b.timestamp, &b.snapshot_id)));
        timeline.session_starts = timeline
            .events
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].timestamp - w[0].timestamp > idle_gap)
            .map(|(i, _)| i + 1)
            .collect();
    }

    report.duplicates_dropped.sort();
    (
        Cohort {
            timelines,
            ..Cohort::default()
        },
        report,
    )
}

fn content_key(ev: &SnapshotEvent) -> String {
    serde_json::to_string(ev).expect("events serialize")
}
