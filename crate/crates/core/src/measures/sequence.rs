use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ErrorKind, ErrorType};

use super::MeasureError;

/// One event of an outcome sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Failure {
        first_error: ErrorType,
        count: usize,
    },
}

impl Outcome {
    pub fn failure(first_error: ErrorType) -> Self {
        Outcome::Failure {
            first_error,
            count: 1,
        }
    }

    pub fn first_error(&self) -> Option<&ErrorType> {
        match self {
            Outcome::Success => None,
            Outcome::Failure { first_error, .. } => Some(first_error),
        }
    }

    pub fn error_count(&self) -> usize {
        match self {
            Outcome::Success => 0,
            Outcome::Failure { count, .. } => *count,
        }
    }
}

/// Time-ordered success/failure events of one error stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSequence {
    kind: ErrorKind,
    events: Vec<Outcome>,
    session_starts: BTreeSet<usize>,
}

impl OutcomeSequence {
    pub fn new(
        kind: ErrorKind,
        events: Vec<Outcome>,
        session_starts: BTreeSet<usize>,
    ) -> Result<Self, MeasureError> {
        for (position, ev) in events.iter().enumerate() {
            if let Outcome::Failure { first_error, count } = ev {
                if first_error.kind() != kind {
                    return Err(MeasureError::KindMismatch {
                        position,
                        expected: kind,
                        found: first_error.kind(),
                    });
                }
                if *count == 0 {
                    return Err(MeasureError::ZeroErrorCount { position });
                }
            }
        }
        if let Some(&bad) = session_starts
            .iter()
            .find(|&&i| i == 0 || i >= events.len())
        {
            return Err(MeasureError::BadBoundary {
                position: bad,
                len: events.len(),
            });
        }
        Ok(OutcomeSequence {
            kind,
            events,
            session_starts,
        })
    }

    /// A sequence without session boundaries.
    pub fn continuous(kind: ErrorKind, events: Vec<Outcome>) -> Result<Self, MeasureError> {
        Self::new(kind, events, BTreeSet::new())
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    pub fn events(&self) -> &[Outcome] {
        &self.events
    }

    pub fn session_starts(&self) -> &BTreeSet<usize> {
        &self.session_starts
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Whether events `i - 1` and `i` lie in different sessions.
    pub fn crosses_boundary(&self, i: usize) -> bool {
        self.session_starts.contains(&i)
    }
}

/// A maximal block of consecutive failures sharing one error type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub error_type: ErrorType,
    /// Number of failures in the block, at least 2.
    pub length: usize,
    pub start: usize,
}

impl Run {
    /// Number of repetitions after the first occurrence.
    pub fn repeats(&self) -> usize {
        self.length - 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: Vec<Run>,
}

impl RunSummary {
    /// Collects repeated-error runs. With `split_at_sessions`, a session
    /// boundary ends a run.
    pub fn of(seq: &OutcomeSequence, split_at_sessions: bool) -> Self {
        let mut runs = Vec::new();
        let mut current: Option<Run> = None;
        for (i, ev) in seq.events().iter().enumerate() {
            let continues = match (&current, ev.first_error()) {
                (Some(run), Some(err)) => {
                    run.error_type == *err && !(split_at_sessions && seq.crosses_boundary(i))
                }
                _ => false,
            };
            if continues {
                current.as_mut().unwrap().length += 1;
                continue;
            }
            if let Some(run) = current.take() {
                if run.length >= 2 {
                    runs.push(run);
                }
            }
            current = ev.first_error().map(|err| Run {
                error_type: err.clone(),
                length: 1,
                start: i,
            });
        }
        if let Some(run) = current {
            if run.length >= 2 {
                runs.push(run);
            }
        }
        RunSummary { runs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(c: &str) -> Outcome {
        Outcome::failure(ErrorType::compiler(c))
    }

    #[test]
    fn rejects_kind_mismatch_and_zero_counts() {
        let bad = OutcomeSequence::continuous(
            ErrorKind::Compiler,
            vec![Outcome::failure(ErrorType::runtime("E"))],
        );
        assert!(matches!(
            bad,
            Err(MeasureError::KindMismatch { position: 0, .. })
        ));
        let zero = OutcomeSequence::continuous(
            ErrorKind::Compiler,
            vec![Outcome::Failure {
                first_error: ErrorType::compiler("a"),
                count: 0,
            }],
        );
        assert!(matches!(
            zero,
            Err(MeasureError::ZeroErrorCount { position: 0 })
        ));
        let boundary = OutcomeSequence::new(ErrorKind::Compiler, vec![f("a")], BTreeSet::from([1]));
        assert!(matches!(boundary, Err(MeasureError::BadBoundary { .. })));
    }

    #[test]
    fn runs_are_maximal_and_ordered() {
        let seq = OutcomeSequence::continuous(
            ErrorKind::Compiler,
            vec![
                f("a"),
                f("a"),
                f("a"),
                f("b"),
                Outcome::Success,
                f("b"),
                f("b"),
                f("c"),
            ],
        )
        .unwrap();
        let runs = RunSummary::of(&seq, false).runs;
        assert_eq!(runs.len(), 2);
        assert_eq!(
            (runs[0].start, runs[0].length, runs[0].repeats()),
            (0, 3, 2)
        );
        assert_eq!((runs[1].start, runs[1].length), (5, 2));
    }

    #[test]
    fn sessions_split_runs_only_when_asked() {
        let seq = OutcomeSequence::new(
            ErrorKind::Compiler,
            vec![f("a"), f("a"), f("a"), f("a")],
            BTreeSet::from([2]),
        )
        .unwrap();
        assert_eq!(RunSummary::of(&seq, false).runs.len(), 1);
        assert_eq!(RunSummary::of(&seq, true).runs.len(), 2);
    }
}
