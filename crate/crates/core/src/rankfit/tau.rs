//! Estimation of the Wilcoxon scale parameter τ = 1 / (√12 ∫ f²).
//!
//! ∫ f² is the density at zero of the difference of two independent errors,
//! estimated with a uniform window over the absolute pairwise residual
//! differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FitError;

const SQRT_12: f64 = 3.464_101_615_137_754_6;
/// Quantile of |eᵢ − eⱼ| that sets the scale of the window.
const SCALE_QUANTILE: f64 = 0.8;
/// Window half-width = BANDWIDTH_FACTOR · scale · n^(−1/5).
const BANDWIDTH_FACTOR: f64 = 0.5;
/// Lower bound on any τ̂, in units of the data scale supplied by the caller.
pub const TAU_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TauMethod {
    #[default]
    Window,
    /// Mean of window estimates over bootstrap resamples of the residuals.
    Bootstrap { resamples: usize, seed: u64 },
}

pub fn estimate_tau(residuals: &[f64], p: usize, method: TauMethod) -> Result<f64, FitError> {
    let n = residuals.len();
    if n < p + 2 {
        return Err(FitError::TooFewObservations { n, p });
    }
    let first = residuals[0];
    if residuals.iter().all(|&e| e == first) {
        return Err(FitError::DegenerateScale);
    }
    let df_correction = (n as f64 / (n - p - 1) as f64).sqrt();
    let raw = match method {
        TauMethod::Window => {
            let mut gaps = pairwise_gaps(
                residuals.len(),
                |i, j| (residuals[i] - residuals[j]).abs(),
                |_, _| true,
            );
            window_tau(&mut gaps, n)?
        }
        TauMethod::Bootstrap { resamples, seed } => {
            bootstrap_tau(residuals, resamples.max(1), seed)?
        }
    };
    Ok((raw * df_correction).max(f64::MIN_POSITIVE))
}

fn pairwise_gaps(
    n: usize,
    gap: impl Fn(usize, usize) -> f64,
    keep: impl Fn(usize, usize) -> bool,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            if keep(i, j) {
                out.push(gap(i, j));
            }
        }
    }
    out
}

fn window_tau(gaps: &mut [f64], n: usize) -> Result<f64, FitError> {
    if gaps.is_empty() {
        return Err(FitError::DegenerateScale);
    }
    let k = ((gaps.len() as f64 * SCALE_QUANTILE).ceil() as usize).clamp(1, gaps.len()) - 1;
    let (_, &mut scale, _) = gaps.select_nth_unstable_by(k, f64::total_cmp);
    if !(scale > 0.0) {
        return Err(FitError::DegenerateScale);
    }
    let h = BANDWIDTH_FACTOR * scale * (n as f64).powf(-0.2);
    let inside = gaps.iter().filter(|&&g| g <= h).count();
    if inside == 0 {
        return Err(FitError::DegenerateScale);
    }
    let density_at_zero = inside as f64 / (gaps.len() as f64 * 2.0 * h);
    Ok(1.0 / (SQRT_12 * density_at_zero))
}

fn bootstrap_tau(residuals: &[f64], resamples: usize, seed: u64) -> Result<f64, FitError> {
    let n = residuals.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut used = 0usize;
    for _ in 0..resamples {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        // Pairs drawn from the same observation are exact zeros, not
        // information about the density.
        let mut gaps = pairwise_gaps(
            n,
            |i, j| (residuals[idx[i]] - residuals[idx[j]]).abs(),
            |i, j| idx[i] != idx[j],
        );
        if let Ok(t) = window_tau(&mut gaps, n) {
            total += t;
            used += 1;
        }
    }
    if used == 0 {
        return Err(FitError::DegenerateScale);
    }
    Ok(total / used as f64)
}
