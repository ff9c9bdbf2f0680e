//! Cohorts whose per-assignment totals match a fixed table of data volumes:
//! student count, snapshot count, compiler and runtime error counts, and
//! failed and passed test counts.

use chrono::Duration;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{GradeBook, GradeRecord, SnapshotEvent, HW_ASSIGNMENTS};

use super::{base_time, compiler_block, runtime_trace, COMPILER_TEMPLATES, RUNTIME_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleTarget {
    pub assignment: u8,
    pub students: usize,
    pub snapshots: usize,
    pub compiler_errors: usize,
    pub runtime_errors: usize,
    pub failed_tests: usize,
    pub passed_tests: usize,
}

const fn row(assignment: u8, v: [usize; 6]) -> ScaleTarget {
    ScaleTarget {
        assignment,
        students: v[0],
        snapshots: v[1],
        compiler_errors: v[2],
        runtime_errors: v[3],
        failed_tests: v[4],
        passed_tests: v[5],
    }
}

/// Per-assignment data volumes of the reference course.
pub const COURSE_VOLUME: [ScaleTarget; 6] = [
    row(3, [295, 5763, 1969, 1511, 28160, 40123]),
    row(4, [281, 2898, 1074, 863, 24057, 26919]),
    row(5, [281, 6778, 1314, 18763, 96933, 132513]),
    row(6, [279, 22450, 2424, 27525, 55523, 765543]),
    row(7, [280, 5192, 1351, 8549, 49897, 71376]),
    row(8, [278, 8014, 2551, 8192, 21999, 204741]),
];

/// Number of students with both exam grades in the reference cohort.
pub const GRADED_STUDENTS: usize = 280;

/// Splits `total` into `slots` near-equal parts, larger parts first.
fn distribute(total: usize, slots: usize) -> Vec<usize> {
    if slots == 0 {
        return Vec::new();
    }
    let (q, r) = (total / slots, total % slots);
    (0..slots).map(|i| q + usize::from(i < r)).collect()
}

/// Builds events matching every target row exactly, plus a grade book in
/// which [`GRADED_STUDENTS`] students have both exams and the rest miss
/// exam 2.
pub fn generate_scale_fixture(
    targets: &[ScaleTarget],
    seed: u64,
) -> (Vec<SnapshotEvent>, GradeBook) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = targets
        .iter()
        .map(|t| t.students)
        .max()
        .unwrap_or(0)
        .max(GRADED_STUDENTS);
    let ids: Vec<String> = (1..=pool).map(|i| format!("s{i:04}")).collect();
    let mut events = Vec::new();

    for t in targets {
        assert!(t.students <= t.snapshots, "every student needs a snapshot");
        let per_student = distribute(t.snapshots, t.students);
        let n = t.snapshots;

        // Mark which snapshots fail to compile: ceil(C/2) of them, each with
        // one or two errors.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let m = t.compiler_errors.div_ceil(2).min(n);
        let mut compile_errors = vec![0usize; n];
        for (slot, k) in order[..m].iter().zip(distribute(t.compiler_errors, m)) {
            compile_errors[*slot] = k;
        }
        let compiled: Vec<usize> = (0..n).filter(|&i| compile_errors[i] == 0).collect();
        let mut runtime_slots = compiled.clone();
        runtime_slots.shuffle(&mut rng);
        let r = t.runtime_errors.div_ceil(2).min(compiled.len());
        let mut traces = vec![0usize; n];
        for (slot, k) in runtime_slots[..r]
            .iter()
            .zip(distribute(t.runtime_errors, r))
        {
            traces[*slot] = k;
        }
        let mut failed = vec![0u32; n];
        let mut passed = vec![0u32; n];
        for (i, (f, p)) in compiled.iter().zip(
            distribute(t.failed_tests, compiled.len())
                .into_iter()
                .zip(distribute(t.passed_tests, compiled.len())),
        ) {
            failed[*i] = f as u32;
            passed[*i] = p as u32;
        }

        let mut idx = 0;
        for (s, count) in per_student.into_iter().enumerate() {
            let student = &ids[s];
            let mut time = base_time()
                + Duration::days(14 * (t.assignment as i64 - 3))
                + Duration::minutes(s as i64);
            for k in 0..count {
                time += Duration::seconds(rng.random_range(20..1200));
                let mut ev = SnapshotEvent {
                    student_id: student.clone(),
                    assignment: t.assignment,
                    timestamp: time,
                    snapshot_id: format!("{student}-hw{}-{k:04}", t.assignment),
                    valid: true,
                    compile_ok: compile_errors[idx] == 0,
                    compiler_diagnostics: Vec::new(),
                    runtime_traces: Vec::new(),
                    tests_passed: passed[idx],
                    tests_failed: failed[idx],
                };
                if !ev.compile_ok {
                    let first = rng.random_range(0..COMPILER_TEMPLATES.len());
                    ev.compiler_diagnostics = vec![compiler_block(
                        &mut rng,
                        first,
                        compile_errors[idx] - 1,
                        COMPILER_TEMPLATES.len(),
                    )];
                }
                for _ in 0..traces[idx] {
                    let class = rng.random_range(0..RUNTIME_CLASSES.len());
                    ev.runtime_traces.push(runtime_trace(&mut rng, class));
                }
                events.push(ev);
                idx += 1;
            }
        }
    }

    let exam = Normal::new(84.0, 10.0).expect("constant parameters");
    let hw = Normal::new(88.0, 8.0).expect("constant parameters");
    let mut book = GradeBook::default();
    for (i, id) in ids.iter().enumerate() {
        let e1 = (exam.sample(&mut rng) as f64).clamp(0.0, 100.0).round();
        let e2 = (exam.sample(&mut rng) as f64).clamp(0.0, 100.0).round();
        let mut grades = [None; 6];
        for g in grades.iter_mut() {
            *g = Some((hw.sample(&mut rng) as f64).clamp(0.0, 100.0).round());
        }
        if i < GRADED_STUDENTS {
            book.records.insert(
                id.clone(),
                GradeRecord {
                    exam1: e1,
                    exam2: e2,
                    hw: grades,
                },
            );
        } else {
            book.skipped.push(crate::ingest::SkippedStudent {
                student_id: id.clone(),
                reason: "missing exam2".into(),
            });
        }
    }
    debug_assert_eq!(HW_ASSIGNMENTS.len(), 6);
    (events, book)
}
