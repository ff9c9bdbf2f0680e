//! Minimization of Jaeckel's dispersion.
//!
//! The problem is solved in standardized coordinates (centered columns with
//! unit standard deviation, response scaled to unit standard deviation), so
//! rescaling the response or any column gives the same internal problem and
//! the estimate transforms exactly.
//!
//! With Wilcoxon scores D(β) is proportional to Σ_{i<j} |eᵢ − eⱼ|, an L1
//! regression on pairwise differences. Three stages:
//!
//! 1. iteratively reweighted least squares on the pairwise form, a
//!    majorize-minimize scheme started from least squares;
//! 2. Nelder–Mead polish around the best point, restarted from shrinking
//!    simplices until a restart no longer improves D;
//! 3. an exact finish: D is piecewise linear and its minimum sits at a
//!    vertex where p independent pairwise residuals vanish. From the vertex
//!    nearest the polished point, edges are followed with exact line
//!    searches until no edge descends, which certifies the minimum.

use nalgebra::{DMatrix, DVector};

use super::dispersion::dispersion_of_residuals;
use super::ols::{center_columns, ols_slopes};
use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Relative improvement in D below which a stage has converged.
    pub tolerance: f64,
    /// Iteration cap per stage run.
    pub max_iterations: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub beta: DVector<f64>,
    pub dispersion: f64,
    pub converged: bool,
    pub iterations: usize,
}

struct Standardized {
    z: DMatrix<f64>,
    y: DVector<f64>,
    col_scale: DVector<f64>,
    y_scale: f64,
}

fn sd(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    (v.map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn standardize(y: &DVector<f64>, x: &DMatrix<f64>) -> Standardized {
    let (mut z, _) = center_columns(x);
    let col_scale =
        DVector::from_iterator(z.ncols(), z.column_iter().map(|c| sd(c.iter().copied())));
    for (j, mut col) in z.column_iter_mut().enumerate() {
        if col_scale[j] > 0.0 {
            col /= col_scale[j];
        }
    }
    let y_sd = sd(y.iter().copied());
    let y_scale = if y_sd > 0.0 { y_sd } else { 1.0 };
    let mean = y.mean();
    let y = y.map(|v| (v - mean) / y_scale);
    Standardized {
        z,
        y,
        col_scale,
        y_scale,
    }
}

impl Standardized {
    fn dispersion(&self, gamma: &DVector<f64>) -> f64 {
        let e = &self.y - &self.z * gamma;
        dispersion_of_residuals(e.as_slice())
    }

    fn to_original(&self, gamma: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            gamma.len(),
            gamma
                .iter()
                .zip(self.col_scale.iter())
                .map(|(g, s)| g * self.y_scale / s),
        )
    }
}

fn relative_gain(old: f64, new: f64) -> f64 {
    if old <= 0.0 {
        0.0
    } else {
        (old - new) / old
    }
}

/// Minimizes D(β) for the given response and (uncentered) predictors.
/// The caller is responsible for checking the rank of `x`.
pub fn minimize_dispersion(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    opts: &OptimizerOptions,
) -> Result<Minimum, FitError> {
    let p = x.ncols();
    let std = standardize(y, x);
    if p == 0 {
        return Ok(Minimum {
            beta: DVector::zeros(0),
            dispersion: std.dispersion(&DVector::zeros(0)) * std.y_scale,
            converged: true,
            iterations: 0,
        });
    }

    let start = ols_slopes(&std.z, &std.y)?;
    let mut best_d = std.dispersion(&start);
    let mut best = start;
    let mut iterations = 0;

    if best_d == 0.0 {
        return Ok(Minimum {
            beta: std.to_original(&best),
            dispersion: 0.0,
            converged: true,
            iterations,
        });
    }

    let (gamma, d, irls_iters, irls_converged) = irls(&std, best.clone(), best_d, opts);
    iterations += irls_iters;
    if d < best_d {
        best = gamma;
        best_d = d;
    }

    let mut converged = irls_converged;
    let mut step = 0.05;
    for _restart in 0..6 {
        if best_d == 0.0 {
            converged = true;
            break;
        }
        let (gamma, d, nm_iters) = nelder_mead(&std, &best, step, opts);
        iterations += nm_iters;
        let gain = relative_gain(best_d, d);
        if d < best_d {
            best = gamma;
            best_d = d;
        }
        if gain < opts.tolerance {
            converged = true;
            break;
        }
        converged = false;
        step *= 0.2;
    }

    if best_d > 0.0 {
        if let Some((gamma, pivots)) =
            PairTable::new(&std).and_then(|t| t.descend(&best, opts.max_iterations))
        {
            iterations += pivots;
            let d = std.dispersion(&gamma);
            if d <= best_d {
                best = gamma;
                best_d = d;
                converged = pivots < opts.max_iterations;
            }
        }
    }

    Ok(Minimum {
        beta: std.to_original(&best),
        dispersion: best_d * std.y_scale,
        converged,
        iterations,
    })
}

/// Pairwise differences of the standardized problem, row-major.
struct PairTable {
    p: usize,
    g: Vec<f64>,
    d: Vec<f64>,
}

/// Largest pair table (pairs × columns) built for the exact stage.
const PAIR_TABLE_LIMIT: usize = 8_000_000;

impl PairTable {
    fn new(std: &Standardized) -> Option<Self> {
        let n = std.y.len();
        let p = std.z.ncols();
        let m = n * n.saturating_sub(1) / 2;
        if m * p > PAIR_TABLE_LIMIT || m < p {
            return None;
        }
        let mut g = Vec::with_capacity(m * p);
        let mut d = Vec::with_capacity(m);
        for i in 0..n {
            for j in i + 1..n {
                g.extend((0..p).map(|k| std.z[(i, k)] - std.z[(j, k)]));
                d.push(std.y[i] - std.y[j]);
            }
        }
        Some(PairTable { p, g, d })
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.g[k * self.p..(k + 1) * self.p]
    }

    fn residuals(&self, gamma: &DVector<f64>) -> Vec<f64> {
        self.d
            .iter()
            .enumerate()
            .map(|(k, d)| {
                d - self
                    .row(k)
                    .iter()
                    .zip(gamma.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    /// The p pairs with the smallest |residual| whose difference rows are
    /// linearly independent.
    fn smallest_independent(&self, r: &[f64]) -> Option<Vec<usize>> {
        let mut order: Vec<usize> = (0..r.len()).collect();
        order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(self.p);
        let mut chosen = Vec::with_capacity(self.p);
        for k in order {
            let g = DVector::from_column_slice(self.row(k));
            let norm = g.norm();
            if norm == 0.0 {
                continue;
            }
            let mut v = g;
            for b in &basis {
                v -= b * b.dot(&v);
            }
            if v.norm() <= 1e-8 * norm {
                continue;
            }
            basis.push(v.normalize());
            chosen.push(k);
            if chosen.len() == self.p {
                return Some(chosen);
            }
        }
        None
    }

    fn active_matrix(&self, active: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |a, b| self.row(active[a])[b])
    }

    /// Moves to the vertex defined by the pairs nearest zero at `start`,
    /// then walks vertex to vertex along edges with an exact line search
    /// (a weighted median of the breakpoints) while Σ|rᵢⱼ| decreases.
    fn descend(&self, start: &DVector<f64>, max_pivots: usize) -> Option<(DVector<f64>, usize)> {
        let p = self.p;
        let mut active = self.smallest_independent(&self.residuals(start))?;
        let rhs = DVector::from_iterator(p, active.iter().map(|&k| self.d[k]));
        let mut gamma = self.active_matrix(&active).lu().solve(&rhs)?;
        let mut r = self.residuals(&gamma);
        let mut total: f64 = r.iter().map(|v| v.abs()).sum();
        let mut pivots = 0;
        let mut breaks: Vec<(f64, f64, usize)> = Vec::with_capacity(r.len());

        'outer: while pivots < max_pivots {
            let lu = self.active_matrix(&active).lu();
            for k in 0..p {
                let mut e = DVector::zeros(p);
                e[k] = 1.0;
                let Some(dir) = lu.solve(&e) else {
                    return Some((gamma, pivots));
                };
                breaks.clear();
                let mut weight = 0.0;
                for (idx, rk) in r.iter().enumerate() {
                    let a: f64 = self
                        .row(idx)
                        .iter()
                        .zip(dir.iter())
                        .map(|(g, d)| g * d)
                        .sum();
                    if a.abs() > 1e-14 {
                        breaks.push((rk / a, a.abs(), idx));
                        weight += a.abs();
                    }
                }
                breaks.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
                let mut acc = 0.0;
                let Some(&(t, _, entering)) = breaks.iter().find(|b| {
                    acc += b.1;
                    acc >= 0.5 * weight
                }) else {
                    continue;
                };
                if t == 0.0 {
                    continue;
                }
                let candidate = &gamma + &dir * t;
                let cand_r = self.residuals(&candidate);
                let cand_total: f64 = cand_r.iter().map(|v| v.abs()).sum();
                if cand_total < total * (1.0 - 1e-15) {
                    gamma = candidate;
                    r = cand_r;
                    total = cand_total;
                    active[k] = entering;
                    pivots += 1;
                    continue 'outer;
                }
            }
            break;
        }
        Some((gamma, pivots))
    }
}

/// Pairwise reweighted least squares. Returns the best point seen, its
/// dispersion, the iteration count and whether the tolerance was met.
fn irls(
    std: &Standardized,
    start: DVector<f64>,
    start_d: f64,
    opts: &OptimizerOptions,
) -> (DVector<f64>, f64, usize, bool) {
    let n = std.y.len();
    let p = std.z.ncols();
    // Residual floor for the weights, in standardized units.
    const FLOOR: f64 = 1e-10;

    let mut gamma = start.clone();
    let mut best = start;
    let mut best_d = start_d;
    let mut prev_d = start_d;
    let mut stalled = 0;

    for iter in 1..=opts.max_iterations {
        let e = &std.y - &std.z * &gamma;
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut g = vec![0.0; p];
        for i in 0..n {
            let zi = std.z.row(i);
            for j in i + 1..n {
                let r = e[i] - e[j];
                let w = 1.0 / r.abs().max(FLOOR);
                let zj = std.z.row(j);
                for k in 0..p {
                    g[k] = zi[k] - zj[k];
                }
                let d = std.y[i] - std.y[j];
                for a in 0..p {
                    let wga = w * g[a];
                    rhs[a] += wga * d;
                    for b in 0..=a {
                        gram[(a, b)] += wga * g[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let next = match gram.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => match gram.lu().solve(&rhs) {
                Some(s) => s,
                None => return (best, best_d, iter, false),
            },
        };
        if next.iter().any(|v| !v.is_finite()) {
            return (best, best_d, iter, false);
        }
        gamma = next;
        let d = std.dispersion(&gamma);
        if d < best_d {
            best_d = d;
            best = gamma.clone();
        }
        if best_d == 0.0 {
            return (best, best_d, iter, true);
        }
        let gain = relative_gain(prev_d, d).abs();
        prev_d = d;
        if gain < opts.tolerance {
            stalled += 1;
            if stalled >= 2 {
                return (best, best_d, iter, true);
            }
        } else {
            stalled = 0;
        }
    }
    (best, best_d, opts.max_iterations, false)
}

/// Nelder–Mead from an axis-aligned simplex of edge `step` around `start`.
fn nelder_mead(
    std: &Standardized,
    start: &DVector<f64>,
    step: f64,
    opts: &OptimizerOptions,
) -> (DVector<f64>, f64, usize) {
    let p = start.len();
    let f = |v: &DVector<f64>| std.dispersion(v);
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(p + 1);
    simplex.push((start.clone(), f(start)));
    for k in 0..p {
        let mut v = start.clone();
        v[k] += step * (1.0 + start[k].abs());
        let fv = f(&v);
        simplex.push((v, fv));
    }

    let mut iters = 0;
    while iters < opts.max_iterations {
        iters += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (f_best, f_worst) = (simplex[0].1, simplex[p].1);
        if f_worst - f_best <= opts.tolerance * f_best.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let centroid = simplex[..p]
            .iter()
            .fold(DVector::zeros(p), |acc, (v, _)| acc + v)
            / p as f64;
        let worst = simplex[p].0.clone();
        let reflected = &centroid + (&centroid - &worst);
        let f_r = f(&reflected);

        if f_r < f_best {
            let expanded = &centroid + (&reflected - &centroid) * 2.0;
            let f_e = f(&expanded);
            simplex[p] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < simplex[p - 1].1 {
            simplex[p] = (reflected, f_r);
        } else {
            let (toward, f_toward) = if f_r < f_worst {
                (reflected, f_r)
            } else {
                (worst, f_worst)
            };
            let contracted = &centroid + (&toward - &centroid) * 0.5;
            let f_c = f(&contracted);
            if f_c < f_toward {
                simplex[p] = (contracted, f_c);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v = &anchor + (&vertex.0 - &anchor) * 0.5;
                    let fv = f(&v);
                    *vertex = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (v, fv) = simplex.swap_remove(0);
    (v, fv, iters)
}
