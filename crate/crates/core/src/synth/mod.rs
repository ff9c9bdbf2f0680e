//! Seeded synthetic cohorts with known error behavior and grade models.
//!
//! Randomness comes from `ChaCha8Rng` (rand_chacha 0.9) seeded with
//! `seed_from_u64`; its output stream is specified independently of the
//! platform, so a given seed yields the same cohort everywhere. Draws are
//! made in a fixed order: per student, θ, then per assignment the snapshot
//! count, then per snapshot its fields, then grades.

pub mod oracle;
mod scale;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::ErrorKind;
use crate::ingest::{
    sessionize, Cohort, GradeBook, GradeRecord, SnapshotEvent, DEFAULT_IDLE_GAP, HW_ASSIGNMENTS,
};
use crate::measures::{CellMeasures, Measure, StudentMeasures};

pub use scale::{generate_scale_fixture, ScaleTarget, COURSE_VOLUME};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
}

/// Compiler message templates; `{id}` is replaced by a random identifier.
pub const COMPILER_TEMPLATES: &[&str] = &[
    "';' expected",
    "cannot find symbol",
    "incompatible types: possible lossy conversion from double to int",
    "missing return statement",
    "variable '{id}' might not have been initialized",
    "')' expected",
    "class, interface, enum, or record expected",
    "reached end of file while parsing",
    "'else' without 'if'",
    "unreachable statement",
    "incompatible types: String cannot be converted to int",
    "illegal start of expression",
];

pub const RUNTIME_CLASSES: &[&str] = &[
    "java.lang.NullPointerException",
    "java.lang.ArrayIndexOutOfBoundsException",
    "java.lang.ArithmeticException",
    "java.lang.StringIndexOutOfBoundsException",
    "java.util.NoSuchElementException",
    "java.lang.ClassCastException",
    "java.lang.NumberFormatException",
    "java.lang.IllegalArgumentException",
    "java.util.ConcurrentModificationException",
    "java.lang.StackOverflowError",
];

const IDENTIFIERS: &[&str] = &[
    "count", "total", "i", "result", "sum", "index", "name", "max",
];

/// Generator parameters. Probabilities interpolate linearly in skill θ:
/// `(at θ = 0, at θ = 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_students: usize,
    pub assignments: Vec<u8>,
    /// Inclusive range of snapshots per (student, assignment).
    pub snapshots: (usize, usize),
    pub compile_fail: (f64, f64),
    pub runtime_fail: (f64, f64),
    /// Probability that a failure directly after a failure repeats its type,
    /// ρ(θ) = repeat_max · (1 − θ). Otherwise a different type is drawn.
    pub repeat_max: f64,
    /// Number of distinct error types per stream.
    pub alphabet: usize,
    /// Extra errors per failing snapshot, drawn uniformly from 0..=max.
    pub extra_errors_max: usize,
    pub invalid_rate: f64,
    /// Probability that the gap before a snapshot exceeds the idle threshold.
    pub long_gap_rate: f64,
    /// grade = g0 − g1 · EQ_true + N(0, σ²), clamped to [0, 100].
    pub g0: f64,
    pub g1: f64,
    pub sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_students: 280,
            assignments: HW_ASSIGNMENTS.to_vec(),
            snapshots: (8, 30),
            compile_fail: (0.6, 0.1),
            runtime_fail: (0.5, 0.05),
            repeat_max: 0.8,
            alphabet: 6,
            extra_errors_max: 2,
            invalid_rate: 0.03,
            long_gap_rate: 0.1,
            g0: 95.0,
            g1: 60.0,
            sigma: 2.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.assignments.is_empty() {
            return fail("assignments must not be empty");
        }
        if self.assignments.iter().any(|a| !HW_ASSIGNMENTS.contains(a)) {
            return fail("assignments must be within 3..=8");
        }
        if self.n_students == 0 {
            return fail("n_students must be positive");
        }
        if self.snapshots.0 == 0 || self.snapshots.0 > self.snapshots.1 {
            return fail("snapshots range must be 1 <= min <= max");
        }
        let probs = [
            self.compile_fail.0,
            self.compile_fail.1,
            self.runtime_fail.0,
            self.runtime_fail.1,
            self.repeat_max,
            self.invalid_rate,
            self.long_gap_rate,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return fail("probabilities must lie in [0, 1]");
        }
        if self.alphabet < 2 || self.alphabet > COMPILER_TEMPLATES.len().min(RUNTIME_CLASSES.len())
        {
            return fail("alphabet must be between 2 and the number of available templates");
        }
        if ![self.g0, self.g1, self.sigma].iter().all(|v| v.is_finite())
            || self.g1 < 0.0
            || self.sigma < 0.0
        {
            return fail("grade model needs finite g0, g1 >= 0 and sigma >= 0");
        }
        Ok(())
    }

    fn repeat_prob(&self, theta: f64) -> f64 {
        self.repeat_max * (1.0 - theta)
    }
}

fn lerp((at0, at1): (f64, f64), theta: f64) -> f64 {
    at0 + (at1 - at0) * theta
}

/// Ground truth written during generation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub theta: BTreeMap<String, f64>,
    pub measures: StudentMeasures,
    /// Mean of compiler and runtime EQ over each exam's assignments.
    pub eq_true: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    /// All generated events, including invalid snapshots, in generation order.
    pub events: Vec<SnapshotEvent>,
    pub grade_book: GradeBook,
    pub truth: GroundTruth,
}

impl SynthCohort {
    /// Sessionized cohort with grades attached.
    pub fn cohort(&self) -> Cohort {
        sessionize(&self.events, DEFAULT_IDLE_GAP)
            .0
            .with_grades(self.grade_book.clone())
    }
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 9, 4, 9, 0, 0).unwrap()
}

fn compiler_block(rng: &mut ChaCha8Rng, first: usize, extra: usize, alphabet: usize) -> String {
    let mut out = String::new();
    let total = 1 + extra;
    for k in 0..total {
        let template = if k == 0 {
            first
        } else {
            rng.random_range(0..alphabet)
        };
        let id = IDENTIFIERS[rng.random_range(0..IDENTIFIERS.len())];
        let msg = COMPILER_TEMPLATES[template].replace("{id}", id);
        let line = rng.random_range(1..120);
        let _ = writeln!(out, "Main.java:{line}: error: {msg}");
        let _ = writeln!(out, "        {id} = compute({id});");
        let _ = writeln!(out, "        ^");
        if template == 1 {
            let _ = writeln!(out, "  symbol:   variable {id}\n  location: class Main");
        }
    }
    let _ = write!(out, "{total} error{}", if total == 1 { "" } else { "s" });
    out
}

fn runtime_trace(rng: &mut ChaCha8Rng, class: usize) -> String {
    let line = rng.random_range(1..120);
    let detail = match class {
        1 => format!(": Index {line} out of bounds for length {}", line % 7 + 1),
        2 => ": / by zero".to_string(),
        _ if rng.random_bool(0.5) => format!(": case {line}"),
        _ => String::new(),
    };
    let head = if rng.random_bool(0.3) {
        format!(
            "Exception in thread \"main\" {}{detail}",
            RUNTIME_CLASSES[class]
        )
    } else {
        format!("{}{detail}", RUNTIME_CLASSES[class])
    };
    format!(
        "{head}\n\tat Main.solve(Main.java:{line})\n\tat MainTest.test{line}(MainTest.java:{})",
        line + 3
    )
}

/// Picks the next error type: repeat `prev` with probability ρ, otherwise a
/// uniformly drawn type other than `prev`. Without a preceding failure the
/// draw is uniform over the alphabet.
fn next_type(rng: &mut ChaCha8Rng, prev: Option<usize>, rho: f64, alphabet: usize) -> usize {
    match prev {
        Some(p) if rng.random_bool(rho) => p,
        Some(p) => {
            let k = rng.random_range(0..alphabet - 1);
            if k >= p {
                k + 1
            } else {
                k
            }
        }
        None => rng.random_range(0..alphabet),
    }
}

fn truth_cell(
    compiler: &[Option<(String, usize)>],
    runtime: &[Option<(String, usize)>],
) -> CellMeasures {
    let mut cell = CellMeasures::default();
    for (kind, stream) in [
        (ErrorKind::Compiler, compiler),
        (ErrorKind::Runtime, runtime),
    ] {
        let events: Vec<oracle::Event<'_>> = stream
            .iter()
            .map(|e| e.as_ref().map(|(t, c)| (t.as_str(), *c)))
            .collect();
        cell.set(Measure::EC, kind, oracle::ec(&events) as f64);
        cell.set(Measure::EQ, kind, oracle::eq(&events));
        cell.set(Measure::RED, kind, oracle::red(&events));
    }
    cell
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

pub fn generate_cohort(cfg: &SynthConfig) -> Result<SynthCohort, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.sigma).expect("validated sigma");
    let hw_noise = Normal::new(0.0, 5.0).expect("constant sigma");

    let mut events = Vec::new();
    let mut truth = GroundTruth::default();
    let mut grade_book = GradeBook::default();
    let mut assignments = cfg.assignments.clone();
    assignments.sort_unstable();
    assignments.dedup();

    for s in 0..cfg.n_students {
        let student = format!("s{:04}", s + 1);
        let theta: f64 = rng.random();
        let rho = cfg.repeat_prob(theta);
        let p_compile = lerp(cfg.compile_fail, theta);
        let p_runtime = lerp(cfg.runtime_fail, theta);
        truth.theta.insert(student.clone(), theta);

        for &a in &assignments {
            let count = rng.random_range(cfg.snapshots.0..=cfg.snapshots.1);
            let mut t =
                base_time() + Duration::days(14 * (a as i64 - 3)) + Duration::minutes(s as i64 * 3);
            let mut compiler: Vec<Option<(String, usize)>> = Vec::new();
            let mut runtime: Vec<Option<(String, usize)>> = Vec::new();
            let (mut prev_c, mut prev_r) = (None, None);

            for k in 0..count {
                let gap = if k > 0 && rng.random_bool(cfg.long_gap_rate) {
                    rng.random_range(11 * 60..180 * 60)
                } else {
                    rng.random_range(30..9 * 60)
                };
                t += Duration::seconds(gap) + Duration::milliseconds(rng.random_range(0..1000));
                let snapshot_id = format!("{student}-hw{a}-{k:03}");
                let mut ev = SnapshotEvent {
                    student_id: student.clone(),
                    assignment: a,
                    timestamp: t,
                    snapshot_id,
                    valid: true,
                    compile_ok: true,
                    compiler_diagnostics: Vec::new(),
                    runtime_traces: Vec::new(),
                    tests_passed: 0,
                    tests_failed: 0,
                };
                if rng.random_bool(cfg.invalid_rate) {
                    ev.valid = false;
                    events.push(ev);
                    continue;
                }
                if rng.random_bool(p_compile) {
                    let ty = next_type(&mut rng, prev_c, rho, cfg.alphabet);
                    let extra = rng.random_range(0..=cfg.extra_errors_max);
                    ev.compile_ok = false;
                    ev.compiler_diagnostics =
                        vec![compiler_block(&mut rng, ty, extra, cfg.alphabet)];
                    let key = crate::diagnostics::canonicalize(
                        &COMPILER_TEMPLATES[ty].replace("{id}", "x"),
                    )
                    .key;
                    compiler.push(Some((key, 1 + extra)));
                    prev_c = Some(ty);
                    events.push(ev);
                    continue;
                }
                compiler.push(None);
                prev_c = None;
                let tests = rng.random_range(4..20u32);
                if rng.random_bool(p_runtime) {
                    let ty = next_type(&mut rng, prev_r, rho, cfg.alphabet);
                    let extra = rng.random_range(0..=cfg.extra_errors_max);
                    let mut traces = vec![runtime_trace(&mut rng, ty)];
                    for _ in 0..extra {
                        let other = rng.random_range(0..cfg.alphabet);
                        traces.push(runtime_trace(&mut rng, other));
                    }
                    ev.runtime_traces = traces;
                    runtime.push(Some((RUNTIME_CLASSES[ty].to_string(), 1 + extra)));
                    prev_r = Some(ty);
                    ev.tests_failed = rng.random_range(1..=tests);
                } else {
                    runtime.push(None);
                    prev_r = None;
                    ev.tests_failed = rng.random_range(0..=tests / 4);
                }
                ev.tests_passed = tests - ev.tests_failed;
                events.push(ev);
            }

            let has_valid = !compiler.is_empty();
            let cell = truth_cell(&compiler, &runtime);
            if has_valid {
                truth.measures.observed_assignments.insert(a);
            } else {
                truth
                    .measures
                    .coverage_gaps
                    .push(crate::measures::CoverageGap {
                        student_id: student.clone(),
                        assignment: a,
                    });
            }
            truth.measures.cells.insert((student.clone(), a), cell);
        }

        // Grades: each exam depends on the mean EQ over its assignments and
        // both error streams.
        let mut eq_true = [0.0; 2];
        for (e, exam_hw) in [&[3u8, 4][..], &HW_ASSIGNMENTS[..]].iter().enumerate() {
            let cells: Vec<&CellMeasures> = exam_hw
                .iter()
                .filter_map(|a| truth.measures.cells.get(&(student.clone(), *a)))
                .collect();
            if !cells.is_empty() {
                eq_true[e] = cells
                    .iter()
                    .map(|c| {
                        c.get(Measure::EQ, ErrorKind::Compiler)
                            + c.get(Measure::EQ, ErrorKind::Runtime)
                    })
                    .sum::<f64>()
                    / (2 * cells.len()) as f64;
            }
        }
        let exam = |rng: &mut ChaCha8Rng, eq: f64| {
            round_to(
                (cfg.g0 - cfg.g1 * eq + noise.sample(rng)).clamp(0.0, 100.0),
                0.01,
            )
        };
        let exam1 = exam(&mut rng, eq_true[0]);
        let exam2 = exam(&mut rng, eq_true[1]);
        let mut hw = [None; 6];
        for (slot, a) in hw.iter_mut().zip(HW_ASSIGNMENTS) {
            let eq_c = truth
                .measures
                .cells
                .get(&(student.clone(), a))
                .map_or(0.0, |c| c.get(Measure::EQ, ErrorKind::Compiler));
            let points = 100.0 * (0.6 + 0.4 * theta) - 20.0 * eq_c + hw_noise.sample(&mut rng);
            *slot = Some(round_to(points.clamp(0.0, 100.0), 0.5));
        }
        truth.eq_true.insert(student.clone(), eq_true);
        grade_book
            .records
            .insert(student, GradeRecord { exam1, exam2, hw });
    }

    Ok(SynthCohort {
        events,
        grade_book,
        truth,
    })
}
