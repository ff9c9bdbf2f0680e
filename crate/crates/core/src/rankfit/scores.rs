use super::FitError;

const SQRT_12: f64 = 3.464_101_615_137_754_6;

/// Wilcoxon score at a (possibly fractional) rank among `n` observations.
#[inline]
pub fn wilcoxon_score(rank: f64, n: usize) -> f64 {
    SQRT_12 * (rank / (n as f64 + 1.0) - 0.5)
}

/// Centered, strictly increasing scores a(1), ..., a(n).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
}

impl ScoreVector {
    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }

    /// Score of rank `i` (1-based).
    pub fn get(&self, i: usize) -> f64 {
        self.scores[i - 1]
    }
}

pub fn wilcoxon_scores(n: usize) -> Result<ScoreVector, FitError> {
    if n < 2 {
        return Err(FitError::TooFewObservations { n, p: 0 });
    }
    Ok(ScoreVector {
        scores: (1..=n).map(|i| wilcoxon_score(i as f64, n)).collect(),
    })
}
