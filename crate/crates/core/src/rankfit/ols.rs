use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FitError;
use crate::features::DesignMatrix;

/// Relative residual norm under which a column counts as dependent.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub r2: f64,
}

/// Subtracts each column's mean; returns the centered matrix and the means.
pub(crate) fn center_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.nrows().max(1) as f64;
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    (xc, means)
}

/// Fails with the labels of columns that are (numerically) linear
/// combinations of the intercept and earlier columns.
pub fn check_full_rank(x: &DMatrix<f64>, labels: &[String]) -> Result<(), FitError> {
    let (xc, _) = center_columns(x);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in xc.column_iter().enumerate() {
        let mut v: DVector<f64> = col.into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= RANK_TOL * norm0 {
            dependent.push(labels.get(j).cloned().unwrap_or_else(|| format!("x{j}")));
        } else {
            basis.push(v / norm);
        }
    }
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(FitError::RankDeficient { columns: dependent })
    }
}

/// Least-squares slopes of centered data via the normal equations.
pub(crate) fn ols_slopes(xc: &DMatrix<f64>, yc: &DVector<f64>) -> Result<DVector<f64>, FitError> {
    if xc.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let gram = xc.transpose() * xc;
    let rhs = xc.transpose() * yc;
    let chol = gram.cholesky().ok_or(FitError::SingularGram)?;
    Ok(chol.solve(&rhs))
}

/// Ordinary least squares with intercept and the classical R².
pub fn fit_ols_baseline(dm: &DesignMatrix) -> Result<OlsFit, FitError> {
    let (n, p) = (dm.n(), dm.p());
    if n < p + 1 || n == 0 {
        return Err(FitError::TooFewObservations { n, p });
    }
    check_full_rank(&dm.x, &dm.labels)?;
    let (xc, means) = center_columns(&dm.x);
    let ybar = dm.y.mean();
    let yc = dm.y.add_scalar(-ybar);
    let beta = ols_slopes(&xc, &yc)?;
    let intercept = ybar - means.dot(&beta);
    let fitted_c = if p == 0 {
        DVector::zeros(n)
    } else {
        &xc * &beta
    };
    let sse = (&yc - fitted_c).norm_squared();
    let sst = yc.norm_squared();
    let r2 = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(OlsFit {
        intercept,
        beta: beta.iter().copied().collect(),
        r2,
    })
}
