use nalgebra::{DMatrix, DVector};

use super::scores::wilcoxon_score;

/// Ranks 1..=n of `values`, ties receiving the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mid;
        }
        start = end;
    }
    ranks
}

/// Jaeckel's dispersion of a residual vector with Wilcoxon scores.
pub fn dispersion_of_residuals(residuals: &[f64]) -> f64 {
    let n = residuals.len();
    if n < 2 {
        return 0.0;
    }
    let ranks = midranks(residuals);
    let d: f64 = ranks
        .iter()
        .zip(residuals)
        .map(|(&r, &e)| wilcoxon_score(r, n) * e)
        .sum();
    // Non-negative in exact arithmetic; clip rounding noise.
    d.max(0.0)
}

pub fn residuals(y: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    if x.ncols() == 0 {
        return y.clone();
    }
    y - x * beta
}

/// D(β) = Σ a(R(eᵢ)) eᵢ with eᵢ = yᵢ − xᵢᵀβ.
pub fn dispersion(y: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
    dispersion_of_residuals(residuals(y, x, beta).as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(midranks(&[5.0, 1.0, 5.0, 0.0]), vec![3.5, 2.0, 3.5, 1.0]);
    }

    #[test]
    fn constant_residuals_have_zero_dispersion() {
        assert_eq!(dispersion_of_residuals(&[2.5; 7]), 0.0);
    }

    #[test]
    fn three_point_hand_value() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = DMatrix::<f64>::zeros(3, 0);
        let beta = DVector::<f64>::zeros(0);
        let d = dispersion(&y, &x, &beta);
        assert!((d - 12f64.sqrt() * 0.5).abs() < 1e-12);
        assert!((d - 1.7321).abs() < 1e-4);
    }

    #[test]
    fn shift_invariant() {
        let e = [0.3, -1.2, 4.0, 2.2, 2.2, -0.7];
        let shifted: Vec<f64> = e.iter().map(|v| v + 17.5).collect();
        assert!((dispersion_of_residuals(&e) - dispersion_of_residuals(&shifted)).abs() < 1e-12);
    }

    #[test]
    fn equals_scaled_sum_of_pairwise_gaps() {
        let e: [f64; 7] = [0.3, -1.2, 4.0, 2.2, 2.2, -0.7, 9.1];
        let n = e.len();
        let mut gaps = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                gaps += (e[i] - e[j]).abs();
            }
        }
        let expected = 12f64.sqrt() / (2.0 * (n as f64 + 1.0)) * gaps;
        assert!((dispersion_of_residuals(&e) - expected).abs() < 1e-12);
    }
}
