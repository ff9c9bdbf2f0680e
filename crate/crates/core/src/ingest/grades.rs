use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Homework assignments that carry snapshot data and grades.
pub const HW_ASSIGNMENTS: [u8; 6] = [3, 4, 5, 6, 7, 8];

const HEADER: [&str; 9] = [
    "student_id",
    "exam1",
    "exam2",
    "hw3",
    "hw4",
    "hw5",
    "hw6",
    "hw7",
    "hw8",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub exam1: f64,
    pub exam2: f64,
    /// Points for hw3..hw8; `None` where the cell was empty.
    pub hw: [Option<f64>; 6],
}

impl GradeRecord {
    pub fn exam(&self, exam: u8) -> f64 {
        match exam {
            1 => self.exam1,
            _ => self.exam2,
        }
    }

    pub fn homework(&self, assignment: u8) -> Option<f64> {
        let idx = HW_ASSIGNMENTS.iter().position(|&a| a == assignment)?;
        self.hw[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedStudent {
    pub student_id: String,
    pub reason: String,
}

/// Students eligible for modeling (both exam grades present), plus a report
/// of the ones left out.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradeBook {
    pub records: BTreeMap<String, GradeRecord>,
    pub skipped: Vec<SkippedStudent>,
}

impl GradeBook {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, student_id: &str) -> Option<&GradeRecord> {
        self.records.get(student_id)
    }

    /// Student ids in the model set, sorted.
    pub fn students(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }
}

pub fn load_grades(path: &Path) -> Result<GradeBook, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_grades(file)
}

fn parse_cell(line: usize, field: &str, cell: &str) -> Result<Option<f64>, IngestError> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| IngestError::Malformed {
        line,
        field: field.to_string(),
        message: format!("expected a number, got {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::Malformed {
            line,
            field: field.to_string(),
            message: "value must be finite".into(),
        });
    }
    Ok(Some(v))
}

pub fn read_grades<R: Read>(reader: R) -> Result<GradeBook, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let found: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != HEADER {
        return Err(IngestError::BadHeader {
            expected: HEADER.join(","),
            found: found.join(","),
        });
    }

    let mut book = GradeBook::default();
    let mut seen = std::collections::BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let student_id = record[0].trim().to_string();
        if student_id.is_empty() {
            return Err(IngestError::Malformed {
                line,
                field: "student_id".into(),
                message: "empty".into(),
            });
        }
        if !seen.insert(student_id.clone()) {
            return Err(IngestError::DuplicateStudent { line, student_id });
        }

        let mut exams = [None; 2];
        for (slot, (field, cell)) in exams
            .iter_mut()
            .zip(HEADER[1..3].iter().zip(record.iter().skip(1)))
        {
            *slot = parse_cell(line, field, cell)?;
            if let Some(v) = *slot {
                if !(0.0..=100.0).contains(&v) {
                    return Err(IngestError::GradeRange {
                        line,
                        student_id,
                        field: field.to_string(),
                        value: v,
                    });
                }
            }
        }
        let mut hw = [None; 6];
        for (slot, (field, cell)) in hw
            .iter_mut()
            .zip(HEADER[3..].iter().zip(record.iter().skip(3)))
        {
            *slot = parse_cell(line, field, cell)?;
            if slot.is_some_and(|v| v < 0.0) {
                return Err(IngestError::Malformed {
                    line,
                    field: field.to_string(),
                    message: "homework points must be non-negative".into(),
                });
            }
        }

        match exams {
            [Some(exam1), Some(exam2)] => {
                book.records
                    .insert(student_id, GradeRecord { exam1, exam2, hw });
            }
            [e1, e2] => {
                let missing: Vec<&str> = [("exam1", e1), ("exam2", e2)]
                    .into_iter()
                    .filter(|(_, v)| v.is_none())
                    .map(|(n, _)| n)
                    .collect();
                book.skipped.push(SkippedStudent {
                    student_id,
                    reason: format!("missing {}", missing.join(" and ")),
                });
            }
        }
    }
    book.skipped.sort_by(|a, b| a.student_id.cmp(&b.student_id));
    Ok(book)
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the model set (skipped students are not written).
pub fn write_grades<W: Write>(w: W, book: &GradeBook) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for (id, rec) in &book.records {
        let mut row = vec![id.clone(), rec.exam1.to_string(), rec.exam2.to_string()];
        row.extend(rec.hw.iter().map(|&v| fmt_cell(v)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| IngestError::Io {
        path: Default::default(),
        source,
    })?;
    Ok(())
}
