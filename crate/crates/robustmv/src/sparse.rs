//! Sparse penalized regression: lasso and elastic net by coordinate descent,
//! and the trimmed (sparse LTS) variant fit by subsampling with
//! concentration steps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::regress::{RegressMethod, RegressionFit, RegressionProblem};
use crate::rng;
use crate::scale::trimmed_squares_scale;

const CD_KKT_TOL: f64 = 1e-8;
const CD_MAX_PASSES: usize = 100_000;
const CONCENTRATION_MAX_STEPS: usize = 50;
const DEFAULT_SPARSE_LTS_STARTS: usize = 500;
/// Elemental start size for the trimmed fit; the penalty makes tiny
/// subsets well-posed.
const ELEMENTAL_SIZE: usize = 3;

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalized columns and centered response; the intercept column (if any)
/// is removed and recovered from the means afterwards.
struct CenteredProblem {
    xc: DMatrix<f64>,
    yc: DVector<f64>,
    x_means: DVector<f64>,
    y_mean: f64,
    intercept: bool,
}

fn center_rows(x: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> CenteredProblem {
    let n = x.nrows();
    if !intercept {
        return CenteredProblem {
            xc: x.clone(),
            yc: y.clone(),
            x_means: DVector::zeros(x.ncols()),
            y_mean: 0.0,
            intercept,
        };
    }
    let p = x.ncols() - 1;
    let mut x_means = DVector::zeros(p);
    for j in 0..p {
        x_means[j] = x.column(j + 1).mean();
    }
    let y_mean = y.mean();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j + 1)] - x_means[j]);
    let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
    CenteredProblem {
        xc,
        yc,
        x_means,
        y_mean,
        intercept,
    }
}

impl CenteredProblem {
    /// Map the penalized coefficients back, prepending the intercept.
    fn full_beta(&self, beta: &DVector<f64>) -> DVector<f64> {
        if !self.intercept {
            return beta.clone();
        }
        let mut full = DVector::zeros(beta.len() + 1);
        full[0] = self.y_mean - self.x_means.dot(beta);
        for j in 0..beta.len() {
            full[j + 1] = beta[j];
        }
        full
    }
}

/// Coordinate descent for 0.5-free objective sum(r^2) + lambda |beta|_1 +
/// mu |beta|_2^2 on unpenalized-intercept-free data. Columns are rescaled
/// to unit variance internally as an exact preconditioner; the objective is
/// unchanged.
fn coordinate_descent(
    xc: &DMatrix<f64>,
    yc: &DVector<f64>,
    lambda: f64,
    mu: f64,
) -> Result<(DVector<f64>, usize)> {
    let (n, p) = (xc.nrows(), xc.ncols());
    let mut scale = DVector::from_element(p, 1.0);
    for j in 0..p {
        let col = xc.column(j);
        let m = col.mean();
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        if var > 0.0 {
            scale[j] = var.sqrt();
        }
    }
    let xs = DMatrix::from_fn(n, p, |i, j| xc[(i, j)] / scale[j]);
    let norms: Vec<f64> = (0..p).map(|j| xs.column(j).norm_squared()).collect();
    let mut beta_s = DVector::zeros(p);
    let mut r = yc.clone();
    let grad_scale = (0..p)
        .map(|j| (xs.column(j).dot(yc)).abs())
        .fold(1.0, f64::max);
    for pass in 1..=CD_MAX_PASSES {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let old = beta_s[j];
            let z = xs.column(j).dot(&r) + norms[j] * old;
            let new = soft(z, 0.5 * lambda / scale[j]) / (norms[j] + mu / (scale[j] * scale[j]));
            if new != old {
                r -= (new - old) * xs.column(j);
                beta_s[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        if max_delta < 1e-12 {
            // Verify stationarity of the original-scale objective.
            let mut kkt_ok = true;
            for j in 0..p {
                if norms[j] == 0.0 {
                    continue;
                }
                let g = -2.0 * xs.column(j).dot(&r) + 2.0 * (mu / (scale[j] * scale[j])) * beta_s[j];
                let lam_j = lambda / scale[j];
                let viol = if beta_s[j] != 0.0 {
                    (g + lam_j * beta_s[j].signum()).abs()
                } else {
                    (g.abs() - lam_j).max(0.0)
                };
                if viol > CD_KKT_TOL * grad_scale.max(1.0) {
                    kkt_ok = false;
                    break;
                }
            }
            if kkt_ok {
                let beta = DVector::from_fn(p, |j, _| beta_s[j] / scale[j]);
                return Ok((beta, pass));
            }
        }
    }
    Err(Error::Convergence {
        iterations: CD_MAX_PASSES,
        last_change: f64::NAN,
    })
}

fn penalized_fit(
    problem: &RegressionProblem,
    lambda: f64,
    mu: f64,
    method: RegressMethod,
) -> Result<RegressionFit> {
    if lambda < 0.0 || mu < 0.0 {
        return Err(Error::invalid("penalty weights must be nonnegative"));
    }
    let c = center_rows(&problem.x, &problem.y, problem.intercept);
    let (beta_core, passes) = coordinate_descent(&c.xc, &c.yc, lambda, mu)?;
    let beta = c.full_beta(&beta_core);
    let r = problem.residuals(&beta);
    let sigma = trimmed_squares_scale(r.as_slice(), r.len())?;
    let mut fit = RegressionFit::plain(problem, beta, sigma, method, passes);
    fit.residuals = r;
    Ok(fit)
}

/// L1-penalized least squares: minimizes sum(r^2) + lambda |beta|_1 with an
/// unpenalized intercept.
pub fn lasso_fit(problem: &RegressionProblem, lambda: f64) -> Result<RegressionFit> {
    penalized_fit(problem, lambda, 0.0, RegressMethod::Lasso { lambda })
}

/// Elastic net: sum(r^2) + lambda |beta|_1 + mu |beta|_2^2.
pub fn enet_fit(problem: &RegressionProblem, lambda: f64, mu: f64) -> Result<RegressionFit> {
    penalized_fit(problem, lambda, mu, RegressMethod::ElasticNet { lambda, mu })
}

/// Trimmed penalized objective: sum of the h smallest squared residuals
/// plus h * lambda |beta|_1 (intercept excluded).
pub fn sparse_lts_objective(
    problem: &RegressionProblem,
    beta: &DVector<f64>,
    lambda: f64,
    h: usize,
) -> f64 {
    let r = problem.residuals(beta);
    let mut sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let trimmed: f64 = sq[..h].iter().sum();
    let skip = if problem.intercept { 1 } else { 0 };
    let l1: f64 = beta.iter().skip(skip).map(|v| v.abs()).sum();
    trimmed + h as f64 * lambda * l1
}

fn h_smallest_subset(problem: &RegressionProblem, beta: &DVector<f64>, h: usize) -> Vec<usize> {
    let r = problem.residuals(beta);
    let mut idx: Vec<usize> = (0..problem.n()).collect();
    idx.sort_by(|&a, &b| {
        (r[a] * r[a])
            .partial_cmp(&(r[b] * r[b]))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut subset = idx[..h].to_vec();
    subset.sort_unstable();
    subset
}

fn subset_problem(problem: &RegressionProblem, rows: &[usize]) -> RegressionProblem {
    let x = DMatrix::from_fn(rows.len(), problem.p(), |i, j| problem.x[(rows[i], j)]);
    let y = DVector::from_fn(rows.len(), |i, _| problem.y[rows[i]]);
    RegressionProblem {
        x,
        y,
        intercept: problem.intercept,
    }
}

/// One concentration step: rank residuals, keep the h best rows, refit the
/// penalized regression there with total penalty h * lambda.
pub(crate) fn sparse_concentration_step(
    problem: &RegressionProblem,
    beta: &DVector<f64>,
    lambda: f64,
    h: usize,
) -> Result<(DVector<f64>, Vec<usize>)> {
    let subset = h_smallest_subset(problem, beta, h);
    let sub = subset_problem(problem, &subset);
    let fit = lasso_fit(&sub, h as f64 * lambda)?;
    Ok((fit.beta, subset))
}

fn sparse_lts_start(
    problem: &RegressionProblem,
    lambda: f64,
    h: usize,
    seed: u64,
    task: u64,
) -> Result<Option<(DVector<f64>, Vec<usize>, f64, usize)>> {
    let n = problem.n();
    // Without a penalty the start must support a unique least-squares fit.
    let m = if lambda > 0.0 {
        ELEMENTAL_SIZE.min(h)
    } else {
        (problem.p() + 1).min(h)
    };
    let mut r = rng::stream(seed, task);
    let mut rows: Vec<usize> = Vec::with_capacity(m);
    while rows.len() < m {
        let i = rand::Rng::gen_range(&mut r, 0..n);
        if !rows.contains(&i) {
            rows.push(i);
        }
    }
    rows.sort_unstable();
    let sub = subset_problem(problem, &rows);
    // Penalty proportional to subset size keeps lambda comparable.
    let mut beta = match lasso_fit(&sub, rows.len() as f64 * lambda) {
        Ok(fit) => fit.beta,
        Err(Error::Convergence { .. }) | Err(Error::Singular(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut subset: Vec<usize> = Vec::new();
    let mut steps = 0;
    for _ in 0..CONCENTRATION_MAX_STEPS {
        steps += 1;
        let (b, s) = match sparse_concentration_step(problem, &beta, lambda, h) {
            Ok(r) => r,
            Err(Error::Convergence { .. }) | Err(Error::Singular(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let done = s == subset;
        beta = b;
        subset = s;
        if done {
            break;
        }
    }
    let obj = sparse_lts_objective(problem, &beta, lambda, h);
    Ok(Some((beta, subset, obj, steps)))
}

/// Sparse least trimmed squares by random elemental starts and
/// concentration, deterministic for a given seed and independent of the
/// number of worker threads.
pub fn sparse_lts_fit(
    problem: &RegressionProblem,
    lambda: f64,
    h: usize,
    n_starts: Option<usize>,
    seed: u64,
) -> Result<RegressionFit> {
    let n = problem.n();
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    if h == 0 || h > n {
        return Err(Error::invalid(format!("h={h} out of range 1..={n}")));
    }
    let n_starts = n_starts.unwrap_or(DEFAULT_SPARSE_LTS_STARTS);
    let results: Vec<_> = (0..n_starts as u64)
        .into_par_iter()
        .map(|task| sparse_lts_start(problem, lambda, h, seed, task))
        .collect();
    let mut best: Option<(DVector<f64>, Vec<usize>, f64, usize)> = None;
    let mut skipped = 0;
    for r in results {
        let cand = match r? {
            Some(c) => c,
            None => {
                skipped += 1;
                continue;
            }
        };
        let better = match &best {
            None => true,
            Some(b) => cand.2 < b.2 || (cand.2 == b.2 && cand.1 < b.1),
        };
        if better {
            best = Some(cand);
        }
    }
    let Some((beta, subset, _, steps)) = best else {
        return Err(Error::Degenerate("every subsampling start failed".into()));
    };
    let residuals = problem.residuals(&beta);
    let sigma = trimmed_squares_scale(residuals.as_slice(), h)?;
    let mut case_weights = DVector::zeros(n);
    for &i in &subset {
        case_weights[i] = 1.0;
    }
    Ok(RegressionFit {
        beta,
        sigma,
        residuals,
        case_weights,
        method: RegressMethod::SparseLts { lambda, h },
        iterations: steps,
        converged: true,
        candidates: n_starts,
        skipped_subsamples: skipped,
    })
}
