use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{compiler_errors, runtime_errors, ErrorKind};
use crate::ingest::{Cohort, Timeline, HW_ASSIGNMENTS};

use super::{
    error_count, error_quotient, repeated_error_density, Measure, MeasureError, MeasureOptions,
    Outcome, OutcomeSequence,
};

/// All six measure values of one (student, assignment) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellMeasures {
    values: [[f64; 2]; 3],
}

fn measure_idx(m: Measure) -> usize {
    match m {
        Measure::EC => 0,
        Measure::EQ => 1,
        Measure::RED => 2,
    }
}

fn kind_idx(k: ErrorKind) -> usize {
    match k {
        ErrorKind::Compiler => 0,
        ErrorKind::Runtime => 1,
    }
}

impl CellMeasures {
    pub fn get(&self, measure: Measure, kind: ErrorKind) -> f64 {
        self.values[measure_idx(measure)][kind_idx(kind)]
    }

    pub fn set(&mut self, measure: Measure, kind: ErrorKind, value: f64) {
        self.values[measure_idx(measure)][kind_idx(kind)] = value;
    }

    fn of_sequence(&mut self, seq: &OutcomeSequence, opts: &MeasureOptions) {
        for mv in [
            error_count(seq),
            error_quotient(seq, opts),
            repeated_error_density(seq, opts),
        ] {
            self.set(mv.measure, mv.kind, mv.value);
        }
    }
}

/// A (student, assignment) cell with no valid snapshots; its values are 0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoverageGap {
    pub student_id: String,
    pub assignment: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudentMeasures {
    pub cells: BTreeMap<(String, u8), CellMeasures>,
    pub coverage_gaps: Vec<CoverageGap>,
    /// Assignments for which at least one student has snapshots.
    pub observed_assignments: BTreeSet<u8>,
}

impl StudentMeasures {
    pub fn get(&self, student_id: &str, assignment: u8) -> Option<&CellMeasures> {
        self.cells.get(&(student_id.to_string(), assignment))
    }
}

/// Splits a timeline into its compiler and runtime outcome sequences.
///
/// The compiler stream covers every snapshot; the runtime stream only the
/// snapshots that compiled. A runtime session boundary is placed before a
/// compiled snapshot whenever any compiler-stream boundary was skipped over.
pub fn build_sequences(timeline: &Timeline) -> (OutcomeSequence, OutcomeSequence) {
    let mut compiler = Vec::with_capacity(timeline.events.len());
    let mut runtime = Vec::new();
    let mut runtime_starts = BTreeSet::new();
    let mut pending_boundary = false;

    for (i, ev) in timeline.events.iter().enumerate() {
        if timeline.session_starts.contains(&i) {
            pending_boundary = true;
        }
        compiler.push(match compiler_errors(ev) {
            Some(errs) => Outcome::Failure {
                first_error: errs.first,
                count: errs.count,
            },
            None => Outcome::Success,
        });
        if ev.compile_ok {
            if pending_boundary && !runtime.is_empty() {
                runtime_starts.insert(runtime.len());
            }
            pending_boundary = false;
            runtime.push(match runtime_errors(ev) {
                Some(errs) => Outcome::Failure {
                    first_error: errs.first,
                    count: errs.count,
                },
                None => Outcome::Success,
            });
        }
    }

    let compiler = OutcomeSequence::new(
        ErrorKind::Compiler,
        compiler,
        timeline.session_starts.clone(),
    )
    .expect("compiler outcomes carry compiler error types");
    let runtime = OutcomeSequence::new(ErrorKind::Runtime, runtime, runtime_starts)
        .expect("runtime outcomes carry runtime error types");
    (compiler, runtime)
}

/// Computes all six measures for every student and homework assignment.
///
/// Students are those in the grade book or in the event log. A student with
/// no snapshots on an assignment gets zeros and a coverage gap entry.
pub fn compute_measures(cohort: &Cohort, opts: &MeasureOptions) -> StudentMeasures {
    let mut students: BTreeSet<&str> = cohort.students();
    students.extend(cohort.grade_book.students());
    let mut assignments: BTreeSet<u8> = HW_ASSIGNMENTS.into_iter().collect();
    assignments.extend(cohort.timelines.keys().map(|(_, a)| *a));

    let keys: Vec<(String, u8)> = students
        .iter()
        .flat_map(|s| assignments.iter().map(move |&a| (s.to_string(), a)))
        .collect();

    let results: Vec<((String, u8), CellMeasures, bool)> = keys
        .into_par_iter()
        .map(|key| {
            let mut cell = CellMeasures::default();
            match cohort.timelines.get(&key) {
                Some(timeline) if !timeline.events.is_empty() => {
                    let (compiler, runtime) = build_sequences(timeline);
                    cell.of_sequence(&compiler, opts);
                    cell.of_sequence(&runtime, opts);
                    (key, cell, false)
                }
                _ => (key, cell, true),
            }
        })
        .collect();

    let mut out = StudentMeasures {
        observed_assignments: cohort
            .timelines
            .iter()
            .filter(|(_, t)| !t.events.is_empty())
            .map(|((_, a), _)| *a)
            .collect(),
        ..Default::default()
    };
    for ((student_id, assignment), cell, gap) in results {
        if gap {
            out.coverage_gaps.push(CoverageGap {
                student_id: student_id.clone(),
                assignment,
            });
        }
        out.cells.insert((student_id, assignment), cell);
    }
    out
}

pub fn write_measures_csv<W: Write>(w: W, measures: &StudentMeasures) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["student_id", "assignment", "measure", "kind", "value"])?;
    for ((student, assignment), cell) in &measures.cells {
        for measure in Measure::ALL {
            for kind in ErrorKind::ALL {
                wtr.write_record([
                    student.as_str(),
                    &assignment.to_string(),
                    measure.as_str(),
                    kind.as_str(),
                    &cell.get(measure, kind).to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_measures_csv<R: Read>(r: R) -> Result<StudentMeasures, MeasureError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = StudentMeasures::default();
    for record in rdr.records() {
        let record = record.map_err(|e| MeasureError::Csv {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| MeasureError::Csv { line, message };
        if record.len() != 5 {
            return Err(err(format!("expected 5 columns, found {}", record.len())));
        }
        let assignment: u8 = record[1]
            .parse()
            .map_err(|_| err(format!("bad assignment {:?}", &record[1])))?;
        let measure: Measure = record[2].parse().map_err(err)?;
        let kind = match &record[3] {
            "compiler" => ErrorKind::Compiler,
            "runtime" => ErrorKind::Runtime,
            other => return Err(err(format!("unknown kind {other:?}"))),
        };
        let value: f64 = record[4]
            .parse()
            .map_err(|_| err(format!("bad value {:?}", &record[4])))?;
        out.observed_assignments.insert(assignment);
        out.cells
            .entry((record[0].to_string(), assignment))
            .or_default()
            .set(measure, kind, value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::ErrorType;
    use crate::ingest::{sessionize, GradeBook, GradeRecord, SnapshotEvent, DEFAULT_IDLE_GAP};
    use chrono::{TimeZone, Utc};

    fn snap(id: &str, minute: i64, diags: &[&str], traces: &[&str]) -> SnapshotEvent {
        SnapshotEvent {
            student_id: "s1".into(),
            assignment: 3,
            timestamp: Utc.timestamp_opt(1_700_000_000 + minute * 60, 0).unwrap(),
            snapshot_id: id.into(),
            valid: true,
            compile_ok: diags.is_empty(),
            compiler_diagnostics: diags.iter().map(|s| s.to_string()).collect(),
            runtime_traces: traces.iter().map(|s| s.to_string()).collect(),
            tests_passed: 0,
            tests_failed: 0,
        }
    }

    const MISSING_SEMI: &str = "A.java:3: error: ';' expected\n1 error";

    #[test]
    fn sequences_follow_the_construction_rule() {
        let (cohort, _) = sessionize(
            &[snap("1", 0, &[MISSING_SEMI], &[]), snap("2", 1, &[], &[])],
            DEFAULT_IDLE_GAP,
        );
        let (c, r) = build_sequences(cohort.timeline("s1", 3).unwrap());
        assert_eq!(
            c.events(),
            &[
                Outcome::failure(ErrorType::compiler("';' expected")),
                Outcome::Success
            ]
        );
        assert_eq!(r.events(), &[Outcome::Success]);
    }

    #[test]
    fn compiled_snapshot_with_trace() {
        let events = [
            snap("1", 0, &[MISSING_SEMI], &[]),
            snap("2", 1, &[MISSING_SEMI], &[]),
            snap(
                "3",
                2,
                &[],
                &["java.lang.NullPointerException\n\tat A.f(A.java:4)"],
            ),
        ];
        let (cohort, _) = sessionize(&events, DEFAULT_IDLE_GAP);
        let m = compute_measures(&cohort, &MeasureOptions::default());
        let cell = m.get("s1", 3).unwrap();
        assert_eq!(cell.get(Measure::EQ, ErrorKind::Compiler), 0.5);
        assert_eq!(cell.get(Measure::EQ, ErrorKind::Runtime), 0.0);
        assert_eq!(cell.get(Measure::EC, ErrorKind::Runtime), 1.0);
        assert_eq!(cell.get(Measure::EC, ErrorKind::Compiler), 2.0);
        assert_eq!(cell.get(Measure::RED, ErrorKind::Compiler), 0.5);
    }

    #[test]
    fn absent_assignment_gets_zeros_and_a_gap() {
        let (cohort, _) = sessionize(&[snap("1", 0, &[MISSING_SEMI], &[])], DEFAULT_IDLE_GAP);
        let mut book = GradeBook::default();
        book.records.insert(
            "s2".into(),
            GradeRecord {
                exam1: 50.0,
                exam2: 60.0,
                hw: [None; 6],
            },
        );
        let m = compute_measures(&cohort.with_grades(book), &MeasureOptions::default());
        let cell = m.get("s1", 7).unwrap();
        for measure in Measure::ALL {
            for kind in ErrorKind::ALL {
                assert_eq!(cell.get(measure, kind), 0.0);
            }
        }
        assert!(m.coverage_gaps.contains(&CoverageGap {
            student_id: "s1".into(),
            assignment: 7
        }));
        assert_eq!(
            m.coverage_gaps
                .iter()
                .filter(|g| g.student_id == "s2")
                .count(),
            6
        );
        assert_eq!(m.observed_assignments, BTreeSet::from([3]));
    }

    #[test]
    fn runtime_boundary_survives_skipped_compile_failures() {
        // compiled, [gap] fail, compiled: the runtime stream still sees the gap.
        let events = [
            snap("1", 0, &[], &[]),
            snap("2", 30, &[MISSING_SEMI], &[]),
            snap("3", 31, &[], &[]),
        ];
        let (cohort, _) = sessionize(&events, DEFAULT_IDLE_GAP);
        let (c, r) = build_sequences(cohort.timeline("s1", 3).unwrap());
        assert_eq!(c.session_starts(), &BTreeSet::from([1]));
        assert_eq!(r.session_starts(), &BTreeSet::from([1]));
    }

    #[test]
    fn csv_round_trip() {
        let (cohort, _) = sessionize(
            &[
                snap("1", 0, &[MISSING_SEMI], &[]),
                snap("2", 1, &[MISSING_SEMI], &[]),
            ],
            DEFAULT_IDLE_GAP,
        );
        let m = compute_measures(&cohort, &MeasureOptions::default());
        let mut buf = Vec::new();
        write_measures_csv(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("student_id,assignment,measure,kind,value\n"));
        assert!(text.contains("s1,3,EQ,compiler,1\n"));
        let back = read_measures_csv(buf.as_slice()).unwrap();
        assert_eq!(back.cells, m.cells);
    }
}
