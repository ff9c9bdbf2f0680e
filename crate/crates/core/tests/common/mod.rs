//! Reference implementations and generators shared by the integration
//! tests. Nothing here calls into the measure or fit code it checks.

#![allow(dead_code)]

use std::collections::BTreeSet;

use errql_core::diagnostics::{ErrorKind, ErrorType};
use errql_core::measures::{Outcome, OutcomeSequence};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `None` is a success; `Some((t, c))` a failure of type `t` with `c` errors.
pub type Ev = Option<(u8, usize)>;

pub fn type_name(t: u8) -> String {
    format!("type-{t}")
}

pub fn to_sequence(events: &[Ev], starts: &BTreeSet<usize>) -> OutcomeSequence {
    let outcomes = events
        .iter()
        .map(|e| match e {
            None => Outcome::Success,
            Some((t, c)) => Outcome::Failure {
                first_error: ErrorType::compiler(type_name(*t)),
                count: *c,
            },
        })
        .collect();
    OutcomeSequence::new(ErrorKind::Compiler, outcomes, starts.clone()).expect("valid sequence")
}

pub fn random_events(rng: &mut ChaCha8Rng, max_len: usize, types: u8) -> Vec<Ev> {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.35) {
                None
            } else {
                Some((rng.random_range(0..types), rng.random_range(1..=4)))
            }
        })
        .collect()
}

pub fn random_starts(rng: &mut ChaCha8Rng, len: usize) -> BTreeSet<usize> {
    (1..len).filter(|_| rng.random_bool(0.15)).collect()
}

/// Splits into sessions; without reset the whole sequence is one session.
fn sessions<'a>(events: &'a [Ev], starts: &BTreeSet<usize>, reset: bool) -> Vec<&'a [Ev]> {
    if !reset {
        return vec![events];
    }
    let mut cuts: Vec<usize> = vec![0];
    cuts.extend(
        starts
            .iter()
            .copied()
            .filter(|&s| s > 0 && s < events.len()),
    );
    cuts.push(events.len());
    cuts.windows(2).map(|w| &events[w[0]..w[1]]).collect()
}

pub fn oracle_ec(events: &[Ev]) -> usize {
    events.iter().map(|e| e.map_or(0, |(_, c)| c)).sum()
}

/// EQ with explicit integer weights as an exact (numerator, denominator).
pub fn oracle_eq_fraction(
    events: &[Ev],
    starts: &BTreeSet<usize>,
    reset: bool,
    w: (u64, u64),
) -> (u64, u64) {
    let mut num = 0;
    let mut pairs = 0;
    for s in sessions(events, starts, reset) {
        for k in 1..s.len() {
            pairs += 1;
            match (s[k - 1], s[k]) {
                (Some((a, _)), Some((b, _))) if a == b => num += w.0 + w.1,
                (Some(_), Some(_)) => num += w.0,
                _ => {}
            }
        }
    }
    (num, pairs * (w.0 + w.1))
}

pub fn oracle_eq(events: &[Ev], starts: &BTreeSet<usize>, reset: bool) -> f64 {
    let (n, d) = oracle_eq_fraction(events, starts, reset, (8, 3));
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// RED by counting, for each maximal same-type block, its repetitions.
/// Blocks are found by checking every interval for maximality.
pub fn oracle_red(events: &[Ev], starts: &BTreeSet<usize>, reset: bool) -> f64 {
    let mut total = 0.0;
    for s in sessions(events, starts, reset) {
        let n = s.len();
        let uniform = |i: usize, j: usize| match s[i] {
            Some((t, _)) => s[i..=j]
                .iter()
                .all(|e| matches!(e, Some((u, _)) if *u == t)),
            None => false,
        };
        for i in 0..n {
            for j in i + 1..n {
                let maximal = uniform(i, j)
                    && (i == 0 || !uniform(i - 1, j))
                    && (j + 1 == n || !uniform(i, j + 1));
                if maximal {
                    let r = (j - i) as f64;
                    total += r * r / (r + 1.0);
                }
            }
        }
    }
    total
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, kept local so the oracle does not share a sampler with
    // the code under test.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Least squares with intercept via SVD; returns (intercept, slopes).
pub fn ols_oracle(y: &DVector<f64>, x: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let (n, p) = x.shape();
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let coef = a.svd(true, true).solve(y, 1e-12).expect("full rank");
    (coef[0], coef.iter().skip(1).copied().collect())
}

/// D(β) from its pairwise form: √12/(2(n+1)) · Σ_{i<j} |e_i − e_j|.
pub fn oracle_dispersion(y: &DVector<f64>, x: &DMatrix<f64>, beta: &[f64]) -> f64 {
    let n = y.len();
    let e: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..beta.len()).map(|j| x[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (e[i] - e[j]).abs();
        }
    }
    12f64.sqrt() / (2.0 * (n as f64 + 1.0)) * s
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn design(y: DVector<f64>, x: DMatrix<f64>) -> errql_core::features::DesignMatrix {
    let spec = errql_core::features::enumerate_models()[0];
    let labels = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    errql_core::features::DesignMatrix::from_parts(spec, y, x, labels)
}

/// y = 2 + Σ_j (j+1)·(−1)^j·x_j + scale·noise with Gaussian x.
pub fn linear_data(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: usize,
    noise: impl Fn(&mut ChaCha8Rng) -> f64,
) -> (DVector<f64>, DMatrix<f64>, Vec<f64>) {
    let beta: Vec<f64> = (0..p)
        .map(|j| (j as f64 + 1.0) * if j % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let x = DMatrix::from_fn(n, p, |_, _| gauss(rng));
    let y = DVector::from_fn(n, |i, _| {
        2.0 + (0..p).map(|j| beta[j] * x[(i, j)]).sum::<f64>() + noise(rng)
    });
    (y, x, beta)
}
