//! Error Count (EC), Error Quotient (EQ) and Repeated Error Density (RED)
//! over compiler and runtime outcome sequences.

mod compute;
mod sequence;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::ErrorKind;

pub use compute::{
    build_sequences, compute_measures, read_measures_csv, write_measures_csv, CellMeasures,
    CoverageGap, StudentMeasures,
};
pub use sequence::{Outcome, OutcomeSequence, Run, RunSummary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("event {position}: {found} error in a {expected} sequence")]
    KindMismatch {
        position: usize,
        expected: ErrorKind,
        found: ErrorKind,
    },
    #[error("event {position}: failure with zero errors")]
    ZeroErrorCount { position: usize },
    #[error("session boundary at {position} outside 1..{len}")]
    BadBoundary { position: usize, len: usize },
    #[error("EQ weights must be non-negative with a positive sum, got {both_fail},{same_type}")]
    BadWeights { both_fail: f64, same_type: f64 },
    #[error("measures csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    EC,
    EQ,
    RED,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::EC, Measure::EQ, Measure::RED];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::EC => "EC",
            Measure::EQ => "EQ",
            Measure::RED => "RED",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EC" => Ok(Measure::EC),
            "EQ" => Ok(Measure::EQ),
            "RED" => Ok(Measure::RED),
            other => Err(format!("unknown measure `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub measure: Measure,
    pub kind: ErrorKind,
    pub value: f64,
}

/// Pair weights of the Error Quotient.
///
/// A pair of consecutive failures scores `both_fail`, plus `same_type` when
/// both failures share an error type. Each pair is normalized by the
/// maximum `both_fail + same_type`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqWeights {
    both_fail: f64,
    same_type: f64,
}

impl EqWeights {
    pub fn new(both_fail: f64, same_type: f64) -> Result<Self, MeasureError> {
        let ok =
            both_fail.is_finite() && same_type.is_finite() && both_fail >= 0.0 && same_type >= 0.0;
        if !ok || both_fail + same_type <= 0.0 {
            return Err(MeasureError::BadWeights {
                both_fail,
                same_type,
            });
        }
        Ok(EqWeights {
            both_fail,
            same_type,
        })
    }

    pub fn both_fail(&self) -> f64 {
        self.both_fail
    }

    pub fn same_type(&self) -> f64 {
        self.same_type
    }

    pub fn pair_max(&self) -> f64 {
        self.both_fail + self.same_type
    }
}

impl Default for EqWeights {
    fn default() -> Self {
        EqWeights {
            both_fail: 8.0,
            same_type: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub eq_weights: EqWeights,
    /// Score each session separately: pairs straddling a session boundary
    /// are not counted and repeated-error runs end at boundaries.
    pub reset_per_session: bool,
}

/// Total number of errors over all failing events.
pub fn error_count(seq: &OutcomeSequence) -> MeasureValue {
    let total: usize = seq.events().iter().map(Outcome::error_count).sum();
    MeasureValue {
        measure: Measure::EC,
        kind: seq.kind(),
        value: total as f64,
    }
}

/// Error Quotient: mean normalized score over consecutive event pairs.
/// Sequences without any scored pair have EQ = 0.
pub fn error_quotient(seq: &OutcomeSequence, opts: &MeasureOptions) -> MeasureValue {
    let w = opts.eq_weights;
    let mut score = 0.0;
    let mut pairs = 0usize;
    for (i, pair) in seq.events().windows(2).enumerate() {
        if opts.reset_per_session && seq.crosses_boundary(i + 1) {
            continue;
        }
        pairs += 1;
        if let (Some(a), Some(b)) = (pair[0].first_error(), pair[1].first_error()) {
            score += w.both_fail;
            if a == b {
                score += w.same_type;
            }
        }
    }
    let value = if pairs == 0 {
        0.0
    } else {
        score / (w.pair_max() * pairs as f64)
    };
    MeasureValue {
        measure: Measure::EQ,
        kind: seq.kind(),
        value,
    }
}

/// Repeated Error Density: sum of r² / (r + 1) over repeated-error runs,
/// with r the number of repetitions in the run.
pub fn repeated_error_density(seq: &OutcomeSequence, opts: &MeasureOptions) -> MeasureValue {
    let value = RunSummary::of(seq, opts.reset_per_session)
        .runs
        .iter()
        .map(|run| {
            let r = run.repeats() as f64;
            r * r / (r + 1.0)
        })
        .sum();
    MeasureValue {
        measure: Measure::RED,
        kind: seq.kind(),
        value,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::diagnostics::ErrorType;

    fn f(c: &str) -> Outcome {
        Outcome::failure(ErrorType::compiler(c))
    }

    fn s() -> Outcome {
        Outcome::Success
    }

    fn seq(events: Vec<Outcome>) -> OutcomeSequence {
        OutcomeSequence::continuous(ErrorKind::Compiler, events).unwrap()
    }

    fn eq(events: Vec<Outcome>) -> f64 {
        error_quotient(&seq(events), &MeasureOptions::default()).value
    }

    fn red(events: Vec<Outcome>) -> f64 {
        repeated_error_density(&seq(events), &MeasureOptions::default()).value
    }

    #[test]
    fn ec_sums_error_multiplicity() {
        assert_eq!(error_count(&seq(vec![])).value, 0.0);
        let events = vec![
            s(),
            Outcome::Failure {
                first_error: ErrorType::compiler("a"),
                count: 2,
            },
            f("b"),
        ];
        assert_eq!(error_count(&seq(events)).value, 3.0);
    }

    #[test]
    fn eq_examples() {
        assert_eq!(eq(vec![s(), s(), s()]), 0.0);
        assert_eq!(eq(vec![f("a"), f("a")]), 1.0);
        assert_eq!(eq(vec![f("a"), f("a"), f("a")]), 1.0);
        assert!((eq(vec![f("a"), f("b")]) - 8.0 / 11.0).abs() < 1e-15);
        assert_eq!(eq(vec![f("a"), s(), f("a")]), 0.0);
        assert_eq!(eq(vec![f("a")]), 0.0);
        assert_eq!(eq(vec![]), 0.0);
    }

    #[test]
    fn red_examples() {
        assert_eq!(red(vec![f("a"), f("a")]), 0.5);
        assert_eq!(red(vec![f("a"), f("a"), s(), f("a"), f("a")]), 1.0);
        assert!((red(vec![f("a"), f("a"), f("a")]) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(red(vec![s(), f("a"), f("b"), s()]), 0.0);
        // Five identical consecutive errors: r = 4, 16/5.
        assert!((red(vec![f("a"); 5]) - 3.2).abs() < 1e-15);
    }

    #[test]
    fn reset_per_session_scores_sessions_separately() {
        let events = vec![f("a"), f("a"), s(), f("a"), f("a")];
        let split =
            OutcomeSequence::new(ErrorKind::Compiler, events.clone(), BTreeSet::from([2, 3]))
                .unwrap();
        let reset = MeasureOptions {
            reset_per_session: true,
            ..Default::default()
        };
        assert_eq!(error_quotient(&split, &reset).value, 1.0);
        assert!(error_quotient(&split, &MeasureOptions::default()).value < 1.0);
        assert_eq!(repeated_error_density(&split, &reset).value, 1.0);

        let joined =
            OutcomeSequence::new(ErrorKind::Compiler, vec![f("a"); 4], BTreeSet::from([2]))
                .unwrap();
        assert_eq!(repeated_error_density(&joined, &reset).value, 1.0);
        assert_eq!(
            repeated_error_density(&joined, &MeasureOptions::default()).value,
            9.0 / 4.0
        );
    }

    #[test]
    fn custom_weights() {
        let opts = MeasureOptions {
            eq_weights: EqWeights::new(1.0, 1.0).unwrap(),
            ..Default::default()
        };
        assert_eq!(error_quotient(&seq(vec![f("a"), f("b")]), &opts).value, 0.5);
        assert!(EqWeights::new(0.0, 0.0).is_err());
        assert!(EqWeights::new(-1.0, 3.0).is_err());
    }
}
