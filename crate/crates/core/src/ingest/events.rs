use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::IngestError;

/// One autograded code snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEvent {
    pub student_id: String,
    pub assignment: u8,
    #[serde(with = "rfc3339_millis")]
    pub timestamp: DateTime<Utc>,
    pub snapshot_id: String,
    pub valid: bool,
    pub compile_ok: bool,
    pub compiler_diagnostics: Vec<String>,
    pub runtime_traces: Vec<String>,
    pub tests_passed: u32,
    pub tests_failed: u32,
}

mod rfc3339_millis {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}

fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    let ts = DateTime::parse_from_rfc3339(s).map_err(|e| format!("not RFC 3339 ({e})"))?;
    // Millisecond precision.
    let millis = ts.timestamp_millis();
    DateTime::from_timestamp_millis(millis).ok_or_else(|| "timestamp out of range".to_string())
}

impl SnapshotEvent {
    /// Checks the cross-field invariants, naming the first one violated.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.compile_ok && !self.compiler_diagnostics.is_empty() {
            return Err("compile_ok = true requires empty compiler_diagnostics");
        }
        if !self.compile_ok && self.compiler_diagnostics.is_empty() {
            return Err("compile_ok = false requires at least one compiler diagnostic");
        }
        if !self.compile_ok && !self.runtime_traces.is_empty() {
            return Err("compile_ok = false requires empty runtime_traces");
        }
        if !self.compile_ok && (self.tests_passed != 0 || self.tests_failed != 0) {
            return Err("compile_ok = false requires tests_passed = tests_failed = 0");
        }
        if !(3..=8).contains(&self.assignment) {
            return Err("assignment must be in 3..=8");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Jsonl,
    Csv,
}

impl FromStr for EventFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(EventFormat::Jsonl),
            "csv" => Ok(EventFormat::Csv),
            other => Err(format!(
                "unknown event format `{other}` (expected jsonl or csv)"
            )),
        }
    }
}

impl EventFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EventFormat::Csv,
            _ => EventFormat::Jsonl,
        }
    }
}

pub fn load_events(path: &Path, format: EventFormat) -> Result<Vec<SnapshotEvent>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_events(file, format).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_events<R: Read>(
    reader: R,
    format: EventFormat,
) -> Result<Vec<SnapshotEvent>, IngestError> {
    match format {
        EventFormat::Jsonl => read_jsonl(reader),
        EventFormat::Csv => read_csv(reader),
    }
}

fn malformed(line: usize, field: &str, message: impl Into<String>) -> IngestError {
    IngestError::Malformed {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Field-by-field extraction from a JSON object so errors can name the field.
struct Record<'a> {
    line: usize,
    obj: &'a Map<String, Value>,
}

impl Record<'_> {
    fn get(&self, field: &str) -> Result<&Value, IngestError> {
        self.obj
            .get(field)
            .ok_or_else(|| malformed(self.line, field, "missing"))
    }

    fn string(&self, field: &str) -> Result<String, IngestError> {
        match self.get(field)? {
            Value::String(s) => Ok(s.clone()),
            other => Err(malformed(
                self.line,
                field,
                format!("expected string, got {other}"),
            )),
        }
    }

    fn boolean(&self, field: &str) -> Result<bool, IngestError> {
        self.get(field)?
            .as_bool()
            .ok_or_else(|| malformed(self.line, field, "expected boolean"))
    }

    fn count(&self, field: &str) -> Result<u32, IngestError> {
        self.get(field)?
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| malformed(self.line, field, "expected non-negative integer"))
    }

    fn strings(&self, field: &str) -> Result<Vec<String>, IngestError> {
        let Value::Array(items) = self.get(field)? else {
            return Err(malformed(self.line, field, "expected array of strings"));
        };
        items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| malformed(self.line, field, "expected array of strings"))
            })
            .collect()
    }

    fn event(&self) -> Result<SnapshotEvent, IngestError> {
        let assignment = self
            .get("assignment")?
            .as_u64()
            .and_then(|v| u8::try_from(v).ok())
            .ok_or_else(|| {
                malformed(
                    self.line,
                    "assignment",
                    "expected small non-negative integer",
                )
            })?;
        let ts = self.string("timestamp")?;
        let timestamp = parse_timestamp(&ts).map_err(|m| malformed(self.line, "timestamp", m))?;
        let event = SnapshotEvent {
            student_id: self.string("student_id")?,
            assignment,
            timestamp,
            snapshot_id: self.string("snapshot_id")?,
            valid: self.boolean("valid")?,
            compile_ok: self.boolean("compile_ok")?,
            compiler_diagnostics: self.strings("compiler_diagnostics")?,
            runtime_traces: self.strings("runtime_traces")?,
            tests_passed: self.count("tests_passed")?,
            tests_failed: self.count("tests_failed")?,
        };
        event.check().map_err(|invariant| IngestError::Invariant {
            line: self.line,
            snapshot_id: event.snapshot_id.clone(),
            invariant,
        })?;
        Ok(event)
    }
}

fn read_jsonl<R: Read>(reader: R) -> Result<Vec<SnapshotEvent>, IngestError> {
    let mut events = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: Default::default(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| malformed(line_no, "<record>", e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(malformed(line_no, "<record>", "expected a JSON object"));
        };
        events.push(
            Record {
                line: line_no,
                obj: &obj,
            }
            .event()?,
        );
    }
    Ok(events)
}

// The flat CSV export carries the same columns; list-valued columns hold a
// JSON array of strings.
const CSV_COLUMNS: [&str; 10] = [
    "student_id",
    "assignment",
    "timestamp",
    "snapshot_id",
    "valid",
    "compile_ok",
    "compiler_diagnostics",
    "runtime_traces",
    "tests_passed",
    "tests_failed",
];

fn read_csv<R: Read>(reader: R) -> Result<Vec<SnapshotEvent>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| malformed(1, name, "missing column"))
    };
    let idx: Vec<usize> = CSV_COLUMNS
        .iter()
        .map(|c| column(c))
        .collect::<Result<_, _>>()?;

    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        let mut obj = Map::new();
        for (name, &i) in CSV_COLUMNS.iter().zip(&idx) {
            let cell = record.get(i).unwrap_or("");
            let value = match *name {
                "student_id" | "timestamp" | "snapshot_id" => Value::String(cell.to_string()),
                "valid" | "compile_ok" => match cell.trim() {
                    "true" | "1" => Value::Bool(true),
                    "false" | "0" => Value::Bool(false),
                    _ => {
                        return Err(malformed(
                            line_no,
                            name,
                            format!("expected boolean, got {cell:?}"),
                        ))
                    }
                },
                "compiler_diagnostics" | "runtime_traces" if cell.trim().is_empty() => {
                    Value::Array(Vec::new())
                }
                _ => serde_json::from_str(cell)
                    .map_err(|e| malformed(line_no, name, e.to_string()))?,
            };
            obj.insert(name.to_string(), value);
        }
        events.push(
            Record {
                line: line_no,
                obj: &obj,
            }
            .event()?,
        );
    }
    Ok(events)
}

pub fn write_events_jsonl<W: Write>(mut w: W, events: &[SnapshotEvent]) -> std::io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(w: W, events: &[SnapshotEvent]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_COLUMNS)?;
    for ev in events {
        let diags = serde_json::to_string(&ev.compiler_diagnostics).expect("strings serialize");
        let traces = serde_json::to_string(&ev.runtime_traces).expect("strings serialize");
        wtr.write_record([
            ev.student_id.as_str(),
            &ev.assignment.to_string(),
            &ev.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true),
            &ev.snapshot_id,
            &ev.valid.to_string(),
            &ev.compile_ok.to_string(),
            &diags,
            &traces,
            &ev.tests_passed.to_string(),
            &ev.tests_failed.to_string(),
        ])?;
    }
    wtr.flush().map_err(|source| IngestError::Io {
        path: Default::default(),
        source,
    })?;
    Ok(())
}
