//! Rank-based linear regression: Jaeckel's dispersion with Wilcoxon scores,
//! drop-in-dispersion model test, robust R², coefficient inference and BIC′,
//! with a least-squares baseline.

mod bic;
mod dispersion;
mod ols;
mod optimize;
mod scores;
mod tau;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::features::{DesignMatrix, ModelSpec};

pub use bic::{bic_prime, LogBase};
pub use dispersion::{dispersion, dispersion_of_residuals, midranks, residuals};
pub use ols::{check_full_rank, fit_ols_baseline, OlsFit};
pub use optimize::{minimize_dispersion, Minimum, OptimizerOptions};
pub use scores::{wilcoxon_score, wilcoxon_scores, ScoreVector};
pub use tau::{estimate_tau, TauMethod, TAU_FLOOR};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need n > p + 1 observations, got n = {n}, p = {p}")]
    TooFewObservations { n: usize, p: usize },
    #[error("design matrix is rank deficient; dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("centered Gram matrix is not invertible")]
    SingularGram,
    #[error("residual scale is degenerate (all residuals equal)")]
    DegenerateScale,
    #[error("BIC' undefined for n = {n}, R² = {r2}")]
    BicDomain { n: usize, r2: f64 },
    #[error("fit did not converge")]
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub tau: TauMethod,
    pub bic_base: LogBase,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tau: TauMethod::Window,
            bic_base: LogBase::Ten,
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

/// Significance marker from a p-value: `***` < 0.001 < `**` < 0.01 < `*` < 0.05.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefTest {
    pub label: String,
    pub est: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub coef_tests: Vec<CoefTest>,
}

impl InferenceReport {
    /// Coefficients significant at 0.05, in column order.
    pub fn significant(&self) -> impl Iterator<Item = &CoefTest> {
        self.coef_tests.iter().filter(|c| !c.stars.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelF {
    pub stat: f64,
    pub df1: usize,
    pub df2: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFit {
    pub spec: ModelSpec,
    pub n: usize,
    pub labels: Vec<String>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub dispersion_at_fit: f64,
    pub dispersion_null: f64,
    pub tau_hat: f64,
    pub robust_r2: f64,
    pub model_f: ModelF,
    pub coef_tests: Vec<CoefTest>,
    /// `None` when R² is 1 (BIC′ diverges).
    pub bic_prime: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl RankFit {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn reduction_in_dispersion(&self) -> f64 {
        (self.dispersion_null - self.dispersion_at_fit).max(0.0)
    }

    /// The export document for this fit.
    pub fn to_json(&self) -> serde_json::Value {
        let beta: IndexMap<&str, f64> = self
            .labels
            .iter()
            .map(String::as_str)
            .zip(self.beta.iter().copied())
            .collect();
        serde_json::json!({
            "spec": {
                "id": self.spec.id(),
                "exam": self.spec.exam,
                "family": self.spec.family,
                "kinds": self.spec.kinds,
                "predicted_by": self.spec.predicted_by(),
                "n": self.n,
                "p": self.p(),
            },
            "beta": beta,
            "intercept": self.intercept,
            "tau_hat": self.tau_hat,
            "r2": self.robust_r2,
            "f": self.model_f,
            "bic_prime": self.bic_prime,
            "coef_tests": self.coef_tests,
            "converged": self.converged,
            "iterations": self.iterations,
            "dispersion": { "fit": self.dispersion_at_fit, "null": self.dispersion_null },
        })
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn response_scale(y: &DVector<f64>) -> f64 {
    let n = y.len().max(1) as f64;
    let mean = y.mean();
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

/// Fits the rank-based regression of `dm.y` on `dm.x` and computes all
/// model statistics.
pub fn fit_rank_regression(dm: &DesignMatrix, opts: &FitOptions) -> Result<RankFit, FitError> {
    let (n, p) = (dm.n(), dm.p());
    if n <= p + 1 {
        return Err(FitError::TooFewObservations { n, p });
    }
    check_full_rank(&dm.x, &dm.labels)?;

    let minimum = minimize_dispersion(
        &dm.y,
        &dm.x,
        &OptimizerOptions {
            tolerance: opts.tolerance,
            max_iterations: opts.max_iterations,
        },
    )?;
    let mut e: Vec<f64> = residuals(&dm.y, &dm.x, &minimum.beta)
        .iter()
        .copied()
        .collect();
    let dispersion_at_fit = dispersion_of_residuals(&e);
    let dispersion_null = dispersion_of_residuals(dm.y.as_slice());

    let floor = TAU_FLOOR * response_scale(&dm.y);
    let tau_hat = match estimate_tau(&e, p, opts.tau) {
        Ok(t) => t.max(floor),
        Err(FitError::DegenerateScale) => floor,
        Err(other) => return Err(other),
    };
    let intercept = median(&mut e);

    let mut fit = RankFit {
        spec: dm.spec,
        n,
        labels: dm.labels.clone(),
        beta: minimum.beta.iter().copied().collect(),
        intercept,
        dispersion_at_fit: dispersion_at_fit.min(dispersion_null),
        dispersion_null,
        tau_hat,
        robust_r2: 0.0,
        model_f: ModelF {
            stat: 0.0,
            df1: p,
            df2: n - p - 1,
            p: 1.0,
        },
        coef_tests: Vec::new(),
        bic_prime: None,
        converged: minimum.converged,
        iterations: minimum.iterations,
    };
    if !fit.converged {
        log::warn!("{}: dispersion minimization did not converge", dm.spec);
    }
    fit.robust_r2 = r_squared(&fit);
    fit.model_f = model_f(&fit)?;
    fit.coef_tests = coef_tests(&fit, dm)?.coef_tests;
    fit.bic_prime = bic_prime(n, fit.robust_r2, p, opts.bic_base).ok();
    Ok(fit)
}

fn r_squared(fit: &RankFit) -> f64 {
    let rd = fit.reduction_in_dispersion();
    if rd == 0.0 {
        return 0.0;
    }
    let df2 = (fit.n - fit.p() - 1) as f64;
    (rd / (rd + df2 * fit.tau_hat / 2.0)).clamp(0.0, 1.0)
}

fn model_f(fit: &RankFit) -> Result<ModelF, FitError> {
    if !(fit.tau_hat > 0.0) {
        return Err(FitError::DegenerateScale);
    }
    let p = fit.p();
    let df2 = fit.n - p - 1;
    if p == 0 {
        return Ok(ModelF {
            stat: 0.0,
            df1: 0,
            df2,
            p: 1.0,
        });
    }
    let stat = (fit.reduction_in_dispersion() / p as f64) / (fit.tau_hat / 2.0);
    let dist = FisherSnedecor::new(p as f64, df2 as f64).expect("positive degrees of freedom");
    Ok(ModelF {
        stat,
        df1: p,
        df2,
        p: dist.sf(stat),
    })
}

fn coef_tests(fit: &RankFit, dm: &DesignMatrix) -> Result<InferenceReport, FitError> {
    let p = fit.p();
    if p == 0 {
        return Ok(InferenceReport {
            coef_tests: Vec::new(),
        });
    }
    let (xc, _) = ols::center_columns(&dm.x);
    let gram: DMatrix<f64> = xc.transpose() * &xc;
    let inv = gram.cholesky().ok_or(FitError::SingularGram)?.inverse();
    let df = (fit.n - p - 1) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let coef_tests = (0..p)
        .map(|j| {
            let est = fit.beta[j];
            let se = fit.tau_hat * inv[(j, j)].sqrt();
            let t = est / se;
            let p_value = (2.0 * t_dist.sf(t.abs())).min(1.0);
            CoefTest {
                label: fit.labels[j].clone(),
                est,
                se,
                t,
                p: p_value,
                stars: stars(p_value).to_string(),
            }
        })
        .collect();
    Ok(InferenceReport { coef_tests })
}

fn require_converged(fit: &RankFit) -> Result<(), FitError> {
    if fit.converged {
        Ok(())
    } else {
        Err(FitError::NotConverged)
    }
}

/// t-tests of each slope with standard errors τ̂·√diag((X_cᵀX_c)⁻¹).
pub fn coefficient_tests(fit: &RankFit, dm: &DesignMatrix) -> Result<InferenceReport, FitError> {
    require_converged(fit)?;
    coef_tests(fit, dm)
}

/// F = (RD / p) / (τ̂ / 2) on (p, n − p − 1) degrees of freedom, where RD is
/// the drop in dispersion from the zero-slope model.
pub fn drop_in_dispersion_test(fit: &RankFit) -> Result<ModelF, FitError> {
    require_converged(fit)?;
    model_f(fit)
}

/// RD / (RD + (n − p − 1)·τ̂ / 2), clamped to [0, 1].
pub fn robust_r_squared(fit: &RankFit) -> Result<f64, FitError> {
    require_converged(fit)?;
    Ok(r_squared(fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::enumerate_models;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn dm(x: DMatrix<f64>, y: DVector<f64>) -> DesignMatrix {
        let labels = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
        DesignMatrix::from_parts(enumerate_models()[0], y, x, labels)
    }

    #[test]
    fn stars_follow_thresholds() {
        assert_eq!(stars(0.0009), "***");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.009), "**");
        assert_eq!(stars(0.04), "*");
        assert_eq!(stars(0.05), "");
    }

    #[test]
    fn noiseless_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let x = DMatrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |i, _| 4.0 + 1.5 * x[(i, 0)] - 0.25 * x[(i, 1)]);
        let fit = fit_rank_regression(&dm(x, y), &FitOptions::default()).unwrap();
        assert!((fit.beta[0] - 1.5).abs() < 1e-6);
        assert!((fit.beta[1] + 0.25).abs() < 1e-6);
        assert!((fit.intercept - 4.0).abs() < 1e-6);
        assert!(fit.dispersion_at_fit < 1e-9);
        assert!(fit.robust_r2 > 1.0 - 1e-3);
    }

    #[test]
    fn strong_negative_signal_is_starred() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 280;
        let x = DMatrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
        let noise = Normal::new(0.0, 1.0).unwrap();
        let y = DVector::from_fn(n, |i, _| -5.0 * x[(i, 0)] + noise.sample(&mut rng));
        let fit = fit_rank_regression(&dm(x, y), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.coef_tests[0].stars, "***");
        assert!(fit.coef_tests[0].est < 0.0);
        assert!(fit.model_f.p < 0.001);
        assert!(fit.dispersion_at_fit <= fit.dispersion_null);
    }

    #[test]
    fn null_model_has_zero_f() {
        // Symmetric design where zero slope is optimal.
        let x = DMatrix::from_column_slice(6, 1, &[-1.0, 1.0, -1.0, 1.0, -2.0, 2.0]);
        let y = DVector::from_column_slice(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let fit = fit_rank_regression(&dm(x, y), &FitOptions::default()).unwrap();
        assert!(fit.beta[0].abs() < 1e-9);
        assert!(fit.model_f.stat.abs() < 1e-9);
        assert_eq!(robust_r_squared(&fit).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_column_slice(&[1.0, 2.0]);
        assert!(matches!(
            fit_rank_regression(&dm(x, y), &FitOptions::default()),
            Err(FitError::TooFewObservations { .. })
        ));
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0, 5.0, 10.0]);
        let y = DVector::from_column_slice(&[1.0, 3.0, 2.0, 5.0, 4.0]);
        assert!(matches!(
            fit_rank_regression(&dm(x, y), &FitOptions::default()),
            Err(FitError::RankDeficient { ref columns }) if columns == &["x2".to_string()]
        ));
    }

    #[test]
    fn unconverged_fits_are_refused_by_inference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(30, 1, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(30, |i, _| {
            x[(i, 0)] + Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        let d = dm(x, y);
        let mut fit = fit_rank_regression(&d, &FitOptions::default()).unwrap();
        fit.converged = false;
        assert_eq!(drop_in_dispersion_test(&fit), Err(FitError::NotConverged));
        assert_eq!(coefficient_tests(&fit, &d), Err(FitError::NotConverged));
    }

    #[test]
    fn json_export_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(40, 2, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(40, |i, _| {
            x[(i, 1)] + Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        let fit = fit_rank_regression(&dm(x, y), &FitOptions::default()).unwrap();
        let v = fit.to_json();
        for key in [
            "spec",
            "beta",
            "intercept",
            "tau_hat",
            "r2",
            "f",
            "bic_prime",
            "coef_tests",
            "converged",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let labels: Vec<&String> = v["beta"].as_object().unwrap().keys().collect();
        assert_eq!(labels, ["x1", "x2"]);
        assert!(v["f"]["df2"].as_u64() == Some(37));
        assert!(v["coef_tests"][0]["stars"].is_string());
    }
}
