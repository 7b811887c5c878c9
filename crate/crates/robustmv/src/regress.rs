//! Robust linear regression: least squares, L1, M-estimators by IRWLS,
//! scale-minimizing estimators (LMS/LTS/S) by p-subset subsampling, and
//! MM-estimators with tunable normal-model efficiency.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{solve, weighted_ls};
use crate::rng;
use crate::scale::{
    m_scale, mad, quantile_scale, trimmed_squares_scale, RhoFamily, ScaleEstimate, ScaleMethod,
    BISQUARE1_CONSTANT, ZERO_RESIDUAL_GUARD,
};

/// A linear regression data set. The design matrix carries the intercept as
/// an explicit first column of ones when requested; nothing is centered
/// implicitly.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub intercept: bool,
}

impl RegressionProblem {
    /// Problem without an intercept column.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::build(x, y, false)
    }

    /// Prepend a column of ones to the given predictors.
    pub fn with_intercept(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = x.nrows();
        let design = DMatrix::from_fn(n, x.ncols() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                x[(i, j - 1)]
            }
        });
        Self::build(design, y, true)
    }

    fn build(x: DMatrix<f64>, y: DVector<f64>, intercept: bool) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("empty regression problem"));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite entries in regression data"));
        }
        Ok(RegressionProblem { x, y, intercept })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * beta
    }
}

/// Residual scale minimized by `scale_min_fit`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSpec {
    /// h-th smallest absolute residual (LMS-type).
    Quantile { h: usize },
    /// Root of the mean of the h smallest squared residuals (LTS-type).
    Trimmed { h: usize },
    /// M-scale of the residuals (S-type, refined by IRWLS).
    MScale { family: RhoFamily, delta: f64 },
}

/// Subset size giving the maximum breakdown point: floor((n + p + 1) / 2).
pub fn default_h(n: usize, p: usize) -> usize {
    (n + p + 1) / 2
}

/// Which estimator produced a `RegressionFit`.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressMethod {
    Ols,
    L1,
    M { family: RhoFamily },
    ScaleMin { spec: ScaleSpec },
    Mm { efficiency: f64, k: f64 },
    Lasso { lambda: f64 },
    ElasticNet { lambda: f64, mu: f64 },
    SparseLts { lambda: f64, h: usize },
}

/// Fitted coefficients with residual scale, residuals and case weights.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub beta: DVector<f64>,
    pub sigma: ScaleEstimate,
    pub residuals: DVector<f64>,
    /// Final per-case weights in [0, 1]; all ones for unweighted methods.
    pub case_weights: DVector<f64>,
    pub method: RegressMethod,
    pub iterations: usize,
    pub converged: bool,
    /// Subsampling candidates drawn / skipped as singular (0 when unused).
    pub candidates: usize,
    pub skipped_subsamples: usize,
}

impl RegressionFit {
    pub(crate) fn plain(
        problem: &RegressionProblem,
        beta: DVector<f64>,
        sigma: ScaleEstimate,
        method: RegressMethod,
        iterations: usize,
    ) -> Self {
        let residuals = problem.residuals(&beta);
        let n = problem.n();
        RegressionFit {
            beta,
            sigma,
            residuals,
            case_weights: DVector::from_element(n, 1.0),
            method,
            iterations,
            converged: true,
            candidates: 0,
            skipped_subsamples: 0,
        }
    }
}

/// Least squares via the normal equations. Rank-deficient designs are an
/// error rather than a pseudo-inverse.
pub fn ols_fit(problem: &RegressionProblem) -> Result<RegressionFit> {
    let xtx = problem.x.transpose() * &problem.x;
    let xty = problem.x.transpose() * &problem.y;
    let beta = solve(&xtx, &xty)?;
    let r = problem.residuals(&beta);
    let sigma = trimmed_squares_scale(r.as_slice(), r.len())?;
    Ok(RegressionFit::plain(
        problem,
        beta,
        sigma,
        RegressMethod::Ols,
        1,
    ))
}

const IRWLS_TOL: f64 = 1e-10;
const IRWLS_MAX_ITER: usize = 500;

fn beta_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    (new - old).norm() / old.norm().max(1.0)
}

/// Least absolute residuals by iteratively reweighted least squares with
/// weights 1 / max(|r|, 1e-8), started from least squares.
pub fn l1_fit(problem: &RegressionProblem) -> Result<RegressionFit> {
    let mut beta = ols_fit(problem)?.beta;
    let n = problem.n();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..IRWLS_MAX_ITER {
        iterations += 1;
        let r = problem.residuals(&beta);
        let w: Vec<f64> = (0..n)
            .map(|i| 1.0 / r[i].abs().max(ZERO_RESIDUAL_GUARD))
            .collect();
        let next = weighted_ls(&problem.x, &problem.y, &w)?;
        let change = beta_change(&next, &beta);
        beta = next;
        if change <= IRWLS_TOL {
            converged = true;
            break;
        }
    }
    let r = problem.residuals(&beta);
    let sigma = mad(r.as_slice(), true)?;
    let mut fit = RegressionFit::plain(problem, beta, sigma, RegressMethod::L1, iterations);
    fit.converged = converged;
    Ok(fit)
}

/// M-estimator of regression by IRWLS.
///
/// `sigma` defaults to the consistent MAD of the L1 residuals; `beta0`
/// defaults to the L1 fit for monotone psi and must be supplied for bounded
/// rho (the objective then has local minima and needs a robust start).
pub fn m_fit(
    problem: &RegressionProblem,
    family: RhoFamily,
    sigma: Option<f64>,
    beta0: Option<DVector<f64>>,
) -> Result<RegressionFit> {
    let start = match beta0 {
        Some(b) => {
            if b.len() != problem.p() {
                return Err(Error::DimensionMismatch("beta0 length != p".into()));
            }
            b
        }
        None => {
            if !family.is_monotone() {
                return Err(Error::invalid(
                    "bounded rho families need an explicit robust starting beta0",
                ));
            }
            l1_fit(problem)?.beta
        }
    };
    let sigma_value = match sigma {
        Some(s) => {
            if !(s > 0.0) {
                return Err(Error::invalid("sigma must be positive"));
            }
            s
        }
        None => {
            let r0 = problem.residuals(&start);
            let s = mad(r0.as_slice(), true)?.value;
            let exact_floor = 1e-12 * problem.y.amax().max(1.0);
            if s <= exact_floor {
                // Exact fit from the start: nothing to reweight.
                let sigma = ScaleEstimate {
                    value: 0.0,
                    consistency_factor: 1.0,
                    method: ScaleMethod::Mad { consistent: true },
                    degenerate: true,
                };
                return Ok(RegressionFit::plain(
                    problem,
                    start,
                    sigma,
                    RegressMethod::M { family },
                    1,
                ));
            }
            s
        }
    };
    let r0 = problem.residuals(&start);
    if sigma_value == 0.0 {
        if r0.iter().any(|v| *v != 0.0) {
            return Err(Error::Degenerate(
                "zero residual scale with nonzero residuals".into(),
            ));
        }
    }
    let n = problem.n();
    let mut beta = start;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let w0 = family.weight(0.0);
    for _ in 0..IRWLS_MAX_ITER {
        iterations += 1;
        let r = problem.residuals(&beta);
        let w: Vec<f64> = (0..n).map(|i| family.weight(r[i] / sigma_value)).collect();
        let next = weighted_ls(&problem.x, &problem.y, &w)?;
        last_change = beta_change(&next, &beta);
        beta = next;
        if last_change <= IRWLS_TOL {
            let r = problem.residuals(&beta);
            let weights =
                DVector::from_iterator(n, (0..n).map(|i| family.weight(r[i] / sigma_value) / w0));
            let sigma = ScaleEstimate {
                value: sigma_value,
                consistency_factor: 1.0,
                method: ScaleMethod::Mad { consistent: true },
                degenerate: false,
            };
            let mut fit = RegressionFit {
                beta,
                sigma,
                residuals: r,
                case_weights: weights,
                method: RegressMethod::M { family },
                iterations,
                converged: true,
                candidates: 0,
                skipped_subsamples: 0,
            };
            fit.case_weights.iter_mut().for_each(|w| *w = w.clamp(0.0, 1.0));
            return Ok(fit);
        }
    }
    Err(Error::Convergence {
        iterations,
        last_change,
    })
}

/// Smallest number of random p-subsets giving probability at least 1 - gamma
/// of one all-clean draw under contamination fraction eps.
pub fn required_subsamples(p: usize, eps: f64, gamma: f64) -> Result<usize> {
    if p == 0 {
        return Err(Error::invalid("p must be at least 1"));
    }
    if !(0.0..1.0).contains(&eps) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("need 0 <= eps < 1 and 0 < gamma < 1"));
    }
    if eps == 0.0 {
        return Ok(1);
    }
    let clean = (1.0 - eps).powi(p as i32);
    let n = (gamma.ln().abs() / (1.0 - clean).ln().abs()).ceil();
    Ok((n as usize).max(1))
}

fn scale_objective(r: &[f64], spec: &ScaleSpec) -> Result<ScaleEstimate> {
    match spec {
        ScaleSpec::Quantile { h } => quantile_scale(r, *h),
        ScaleSpec::Trimmed { h } => trimmed_squares_scale(r, *h),
        ScaleSpec::MScale { family, delta } => m_scale(r, *family, *delta),
    }
}

const SUBSAMPLE_RETRIES: usize = 100;

/// One candidate: indices of an exact-fit p-subset, its beta, and the scale
/// objective of the full-sample residuals.
struct Candidate {
    indices: Vec<usize>,
    beta: DVector<f64>,
    objective: f64,
    skipped: usize,
}

fn draw_candidate(
    problem: &RegressionProblem,
    spec: &ScaleSpec,
    seed: u64,
    task: u64,
) -> Option<Candidate> {
    let n = problem.n();
    let p = problem.p();
    let mut rng = rng::stream(seed, task);
    let mut skipped = 0;
    for _ in 0..SUBSAMPLE_RETRIES {
        let mut idx = rand::seq::index::sample(&mut rng, n, p).into_vec();
        idx.sort_unstable();
        let xs = DMatrix::from_fn(p, p, |a, b| problem.x[(idx[a], b)]);
        let ys = DVector::from_iterator(p, idx.iter().map(|&i| problem.y[i]));
        match solve(&xs, &ys) {
            Ok(beta) => {
                let r = problem.residuals(&beta);
                let obj = match scale_objective(r.as_slice(), spec) {
                    Ok(s) => s.value,
                    Err(_) => {
                        skipped += 1;
                        continue;
                    }
                };
                return Some(Candidate {
                    indices: idx,
                    beta,
                    objective: obj,
                    skipped,
                });
            }
            Err(_) => skipped += 1,
        }
    }
    None
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    a.objective < b.objective || (a.objective == b.objective && a.indices < b.indices)
}

const CONCENTRATION_MAX_STEPS: usize = 50;
const S_REFINE_TOL: f64 = 1e-8;
const S_REFINE_MAX_ITER: usize = 100;

/// Scale-minimizing regression over random exact-fit p-subsets.
///
/// The trimmed variant is improved by concentration steps (refit on the h
/// cases with smallest squared residuals until that subset repeats); the
/// M-scale variant is refined by IRWLS with the scale re-solved each
/// iteration. Results are deterministic given the seed and independent of
/// the number of worker threads.
pub fn scale_min_fit(
    problem: &RegressionProblem,
    spec: ScaleSpec,
    n_subsamples: Option<usize>,
    seed: u64,
) -> Result<RegressionFit> {
    let n = problem.n();
    let p = problem.p();
    if n <= p {
        return Err(Error::invalid("subsampling estimators need n > p"));
    }
    match &spec {
        ScaleSpec::Quantile { h } | ScaleSpec::Trimmed { h } => {
            if *h == 0 || *h > n {
                return Err(Error::invalid(format!("h={h} out of range 1..={n}")));
            }
        }
        ScaleSpec::MScale { family, delta } => {
            if !(*delta > 0.0 && *delta < family.rho_sup()) {
                return Err(Error::invalid("delta out of range for the rho family"));
            }
        }
    }
    let n_cand = match n_subsamples {
        Some(v) => v.max(1),
        None => required_subsamples(p, 0.5, 0.01)?,
    };
    let candidates: Vec<Option<Candidate>> = (0..n_cand as u64)
        .into_par_iter()
        .map(|c| draw_candidate(problem, &spec, seed, c))
        .collect();
    let skipped: usize = candidates
        .iter()
        .map(|c| c.as_ref().map_or(SUBSAMPLE_RETRIES, |c| c.skipped))
        .sum();
    let best = candidates
        .into_iter()
        .flatten()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .ok_or_else(|| Error::Degenerate("all subsamples were singular".into()))?;

    let (beta, sigma, case_weights, iterations, converged) = match &spec {
        ScaleSpec::Quantile { h } => {
            let sigma = quantile_scale(problem.residuals(&best.beta).as_slice(), *h)?;
            (
                best.beta.clone(),
                sigma,
                DVector::from_element(n, 1.0),
                1,
                true,
            )
        }
        ScaleSpec::Trimmed { h } => {
            let (beta, subset, steps) = concentrate(problem, best.beta.clone(), *h)?;
            let sigma = trimmed_squares_scale(problem.residuals(&beta).as_slice(), *h)?;
            let mut w = DVector::zeros(n);
            for &i in &subset {
                w[i] = 1.0;
            }
            (beta, sigma, w, steps, true)
        }
        ScaleSpec::MScale { family, delta } => {
            let (beta, sigma, iters, conv) = s_refine(problem, best.beta.clone(), *family, *delta)?;
            let w0 = family.weight(0.0);
            let r = problem.residuals(&beta);
            let w = if sigma.value > 0.0 {
                DVector::from_iterator(
                    n,
                    (0..n).map(|i| (family.weight(r[i] / sigma.value) / w0).clamp(0.0, 1.0)),
                )
            } else {
                DVector::from_element(n, 1.0)
            };
            (beta, sigma, w, iters, conv)
        }
    };
    Ok(RegressionFit {
        residuals: problem.residuals(&beta),
        beta,
        sigma,
        case_weights,
        method: RegressMethod::ScaleMin { spec },
        iterations,
        converged,
        candidates: n_cand,
        skipped_subsamples: skipped,
    })
}

/// Concentration steps: refit by least squares on the h smallest squared
/// residuals until the subset repeats.
fn concentrate(
    problem: &RegressionProblem,
    mut beta: DVector<f64>,
    h: usize,
) -> Result<(DVector<f64>, Vec<usize>, usize)> {
    let n = problem.n();
    let mut prev: Option<Vec<usize>> = None;
    let mut steps = 0;
    loop {
        let r = problem.residuals(&beta);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            (r[a] * r[a])
                .partial_cmp(&(r[b] * r[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut subset: Vec<usize> = order[..h].to_vec();
        subset.sort_unstable();
        if prev.as_ref() == Some(&subset) || steps >= CONCENTRATION_MAX_STEPS {
            return Ok((beta, subset, steps.max(1)));
        }
        let w: Vec<f64> = (0..n)
            .map(|i| if subset.contains(&i) { 1.0 } else { 0.0 })
            .collect();
        beta = weighted_ls(&problem.x, &problem.y, &w)?;
        prev = Some(subset);
        steps += 1;
    }
}

/// IRWLS refinement of an S-candidate with the residual M-scale re-solved at
/// every iteration.
fn s_refine(
    problem: &RegressionProblem,
    start: DVector<f64>,
    family: RhoFamily,
    delta: f64,
) -> Result<(DVector<f64>, ScaleEstimate, usize, bool)> {
    let n = problem.n();
    let mut beta = start;
    let mut iterations = 0;
    for _ in 0..S_REFINE_MAX_ITER {
        iterations += 1;
        let r = problem.residuals(&beta);
        let sigma = m_scale(r.as_slice(), family, delta)?;
        if sigma.value == 0.0 {
            return Ok((beta, sigma, iterations, true));
        }
        let w: Vec<f64> = (0..n).map(|i| family.weight(r[i] / sigma.value)).collect();
        let next = weighted_ls(&problem.x, &problem.y, &w)?;
        let change = beta_change(&next, &beta);
        beta = next;
        if change <= S_REFINE_TOL {
            let sigma = m_scale(problem.residuals(&beta).as_slice(), family, delta)?;
            return Ok((beta, sigma, iterations, true));
        }
    }
    let sigma = m_scale(problem.residuals(&beta).as_slice(), family, delta)?;
    Ok((beta, sigma, iterations, false))
}

/// Bisquare tuning constant for 85% normal-model efficiency.
pub const BISQUARE_K_EFF_085: f64 = 3.44;

/// Normal-model efficiency of the bisquare(k) regression M-estimator,
/// (E psi')^2 / E psi^2 under the standard normal, by Simpson quadrature.
pub fn bisquare_efficiency(k: f64) -> f64 {
    let psi_prime = |r: f64| {
        if r.abs() <= k {
            let u = (r / k) * (r / k);
            6.0 / (k * k) * (1.0 - u) * (1.0 - 5.0 * u)
        } else {
            0.0
        }
    };
    let fam = RhoFamily::bisquare(k);
    let (lo, hi) = (-k, k);
    let m = 4000;
    let step = (hi - lo) / m as f64;
    let phi = |z: f64| (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut e_dpsi = 0.0;
    let mut e_psi2 = 0.0;
    for i in 0..=m {
        let z = lo + i as f64 * step;
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        e_dpsi += w * psi_prime(z) * phi(z);
        let psi = fam.psi(z);
        e_psi2 += w * psi * psi * phi(z);
    }
    e_dpsi *= step / 3.0;
    e_psi2 *= step / 3.0;
    e_dpsi * e_dpsi / e_psi2
}

/// Bisquare tuning constant achieving the requested normal-model efficiency.
pub fn efficiency_to_k(efficiency: f64) -> Result<f64> {
    if efficiency == 0.85 {
        return Ok(BISQUARE_K_EFF_085);
    }
    if !(efficiency > 0.0 && efficiency < 1.0) {
        return Err(Error::invalid("efficiency must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (0.1, 60.0);
    if bisquare_efficiency(hi) < efficiency {
        return Err(Error::invalid("efficiency too close to 1 for bisquare"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bisquare_efficiency(mid) < efficiency {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// MM-estimator: bisquare S-fit, residual M-scale with the k=1 bisquare at
/// delta = 0.5 divided by its consistency constant, then IRWLS with the
/// bisquare tuned to the requested efficiency.
pub fn mm_fit(problem: &RegressionProblem, efficiency: f64, seed: u64) -> Result<RegressionFit> {
    let s_fit = scale_min_fit(
        problem,
        ScaleSpec::MScale {
            family: RhoFamily::bisquare(1.0),
            delta: 0.5,
        },
        None,
        seed,
    )?;
    let sigma_hat = m_scale(s_fit.residuals.as_slice(), RhoFamily::bisquare(1.0), 0.5)?;
    let k = efficiency_to_k(efficiency)?;
    if sigma_hat.value == 0.0 {
        let mut fit = s_fit;
        fit.method = RegressMethod::Mm { efficiency, k };
        return Ok(fit);
    }
    let sigma_tilde = sigma_hat.value / BISQUARE1_CONSTANT;
    let mut fit = m_fit(
        problem,
        RhoFamily::bisquare(k),
        Some(sigma_tilde),
        Some(s_fit.beta),
    )?;
    fit.method = RegressMethod::Mm { efficiency, k };
    fit.candidates = s_fit.candidates;
    fit.skipped_subsamples = s_fit.skipped_subsamples;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn line_problem() -> RegressionProblem {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let y = DVector::from_column_slice(&[0.0, 1.0, 2.0]);
        RegressionProblem::with_intercept(x, y).unwrap()
    }

    fn random_problem(n: usize, p: usize, seed: u64) -> RegressionProblem {
        let mut r = rng::stream(seed, 0);
        let x = DMatrix::from_fn(n, p, |_, _| r.gen_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| r.gen_range(-2.0..2.0));
        RegressionProblem::new(x, y).unwrap()
    }

    #[test]
    fn ols_simple_line() {
        let fit = ols_fit(&line_problem()).unwrap();
        assert_relative_eq!(fit.beta[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[1], 1.0, epsilon = 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn ols_orthogonality() {
        let problem = random_problem(20, 3, 11);
        let fit = ols_fit(&problem).unwrap();
        let g = problem.x.transpose() * &fit.residuals;
        let bound = 1e-8 * problem.x.norm() * problem.y.norm();
        assert!(g.amax() < bound);
    }

    #[test]
    fn ols_rejects_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let problem = RegressionProblem::new(x, y).unwrap();
        assert!(ols_fit(&problem).is_err());
    }

    #[test]
    fn l1_is_median_for_intercept_only() {
        let x = DMatrix::from_element(5, 1, 1.0);
        let y = DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        let problem = RegressionProblem::new(x, y).unwrap();
        let fit = l1_fit(&problem).unwrap();
        assert_relative_eq!(fit.beta[0], 3.0, epsilon = 1e-6);
    }

    #[test]
    fn l1_resists_one_vertical_outlier() {
        // y = 2x + 1 except case 3.
        let x = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut y = DVector::from_fn(6, |i, _| 2.0 * x[(i, 0)] + 1.0);
        y[3] = 50.0;
        let problem = RegressionProblem::with_intercept(x, y).unwrap();
        let fit = l1_fit(&problem).unwrap();
        assert_relative_eq!(fit.beta[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(fit.beta[1], 2.0, epsilon = 1e-4);
    }

    #[test]
    fn m_fit_huber_limit_is_ols() {
        let problem = random_problem(25, 3, 5);
        let ols = ols_fit(&problem).unwrap();
        let m = m_fit(&problem, RhoFamily::huber(1e6), None, None).unwrap();
        assert!((&m.beta - &ols.beta).amax() < 1e-6);
    }

    #[test]
    fn m_fit_exact_data_short_circuits() {
        let fit = m_fit(&line_problem(), RhoFamily::huber(1.345), None, None).unwrap();
        assert_relative_eq!(fit.beta[1], 1.0, epsilon = 1e-10);
        assert_eq!(fit.iterations, 1);
        assert!(fit.sigma.degenerate);
    }

    #[test]
    fn m_fit_bounded_requires_start() {
        let problem = random_problem(15, 2, 3);
        assert!(m_fit(&problem, RhoFamily::bisquare(3.44), None, None).is_err());
    }

    #[test]
    fn required_subsamples_values() {
        // |ln 0.01| / |ln(1 - 0.8^5)| = 4.6052 / 0.3969 rounds up to 12.
        assert_eq!(required_subsamples(5, 0.2, 0.01).unwrap(), 12);
        assert_eq!(required_subsamples(3, 0.0, 0.01).unwrap(), 1);
        assert_eq!(required_subsamples(2, 0.5, 0.999999).unwrap(), 1);
    }

    #[test]
    fn required_subsamples_brute_force_oracle() {
        // P(no clean draw in N) <= gamma checked directly.
        for (p, eps, gamma) in [(2, 0.3, 0.05), (5, 0.2, 0.01), (4, 0.4, 0.1)] {
            let n = required_subsamples(p, eps, gamma).unwrap();
            let miss = 1.0 - (1.0 - eps).powi(p as i32);
            assert!(miss.powi(n as i32) <= gamma);
            if n > 1 {
                assert!(miss.powi(n as i32 - 1) > gamma);
            }
        }
    }

    #[test]
    fn default_h_formula() {
        assert_eq!(default_h(10, 2), 6);
        assert_eq!(default_h(100, 5), 53);
    }

    #[test]
    fn scale_min_clean_exact_line() {
        let x = DMatrix::from_column_slice(10, 1, &(0..10).map(|v| v as f64).collect::<Vec<_>>());
        let y = DVector::from_fn(10, |i, _| 3.0 * x[(i, 0)] - 1.0);
        let problem = RegressionProblem::with_intercept(x, y).unwrap();
        for spec in [
            ScaleSpec::Quantile { h: default_h(10, 2) },
            ScaleSpec::Trimmed { h: default_h(10, 2) },
            ScaleSpec::MScale {
                family: RhoFamily::bisquare(1.0),
                delta: 0.5,
            },
        ] {
            let fit = scale_min_fit(&problem, spec, None, 7).unwrap();
            assert_relative_eq!(fit.beta[0], -1.0, epsilon = 1e-8);
            assert_relative_eq!(fit.beta[1], 3.0, epsilon = 1e-8);
            assert!(fit.sigma.value < 1e-10);
        }
    }

    #[test]
    fn lts_matches_exhaustive_oracle() {
        // 9 points on a line plus 3 gross vertical outliers; compare against
        // every exact 2-subset fit followed by concentration.
        let xs: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let x = DMatrix::from_column_slice(12, 1, &xs);
        let mut y = DVector::from_fn(12, |i, _| 0.5 * xs[i] + 2.0 + 0.01 * (i as f64 % 3.0));
        y[2] = 80.0;
        y[7] = -60.0;
        y[11] = 120.0;
        let problem = RegressionProblem::with_intercept(x, y).unwrap();
        let h = default_h(12, 2);
        let fit = scale_min_fit(&problem, ScaleSpec::Trimmed { h }, Some(400), 42).unwrap();

        let mut best = f64::INFINITY;
        for a in 0..12 {
            for b in (a + 1)..12 {
                let xs2 = DMatrix::from_row_slice(
                    2,
                    2,
                    &[1.0, problem.x[(a, 1)], 1.0, problem.x[(b, 1)]],
                );
                let ys2 = DVector::from_column_slice(&[problem.y[a], problem.y[b]]);
                let Ok(beta) = solve(&xs2, &ys2) else { continue };
                let (beta, _, _) = concentrate(&problem, beta, h).unwrap();
                let obj = trimmed_squares_scale(problem.residuals(&beta).as_slice(), h)
                    .unwrap()
                    .value;
                best = best.min(obj);
            }
        }
        assert_relative_eq!(fit.sigma.value, best, max_relative = 1e-8);
    }

    #[test]
    fn irwls_objective_nonincreasing() {
        // Track the Huber objective across manual IRWLS iterations.
        let mut problem = random_problem(30, 3, 9);
        problem.y[0] += 20.0;
        problem.y[5] -= 15.0;
        let fam = RhoFamily::huber(1.345);
        let start = l1_fit(&problem).unwrap().beta;
        let sigma = mad(problem.residuals(&start).as_slice(), true).unwrap().value;
        let objective = |beta: &DVector<f64>| {
            problem
                .residuals(beta)
                .iter()
                .map(|r| fam.rho(r / sigma))
                .sum::<f64>()
        };
        let mut beta = start;
        let mut prev = objective(&beta);
        for _ in 0..30 {
            let r = problem.residuals(&beta);
            let w: Vec<f64> = r.iter().map(|ri| fam.weight(ri / sigma)).collect();
            beta = weighted_ls(&problem.x, &problem.y, &w).unwrap();
            let cur = objective(&beta);
            assert!(cur <= prev + 1e-10);
            prev = cur;
        }
    }

    #[test]
    fn mm_records_tuning_constant() {
        let problem = random_problem(40, 3, 21);
        let fit = mm_fit(&problem, 0.85, 1).unwrap();
        match fit.method {
            RegressMethod::Mm { efficiency, k } => {
                assert_eq!(efficiency, 0.85);
                assert_eq!(k, 3.44);
            }
            _ => panic!("wrong method tag"),
        }
    }

    #[test]
    fn efficiency_map_roundtrip() {
        assert!((bisquare_efficiency(3.44) - 0.85).abs() < 0.005);
        let k = efficiency_to_k(0.95).unwrap();
        assert!((bisquare_efficiency(k) - 0.95).abs() < 1e-6);
    }

    #[test]
    fn regression_and_affine_equivariance() {
        let problem = random_problem(30, 3, 13);
        let t = -2.5;
        let scaled = RegressionProblem::new(problem.x.clone(), t * &problem.y).unwrap();
        let seed = 3;
        let pairs: Vec<(DVector<f64>, DVector<f64>)> = vec![
            (l1_fit(&problem).unwrap().beta, l1_fit(&scaled).unwrap().beta),
            (
                mm_fit(&problem, 0.85, seed).unwrap().beta,
                mm_fit(&scaled, 0.85, seed).unwrap().beta,
            ),
            (
                scale_min_fit(&problem, ScaleSpec::Trimmed { h: 17 }, Some(200), seed)
                    .unwrap()
                    .beta,
                scale_min_fit(&scaled, ScaleSpec::Trimmed { h: 17 }, Some(200), seed)
                    .unwrap()
                    .beta,
            ),
        ];
        for (base, s) in pairs {
            assert!((&s - t * &base).amax() < 1e-6 * base.amax().max(1.0));
        }

        // X -> XA maps beta to A^{-1} beta.
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.0, 1.5, -1.0, 0.3, 0.0, 1.0]);
        let xa = &problem.x * &a;
        let transformed = RegressionProblem::new(xa, problem.y.clone()).unwrap();
        let b1 = ols_fit(&problem).unwrap().beta;
        let b2 = ols_fit(&transformed).unwrap().beta;
        assert!((&a * &b2 - &b1).amax() < 1e-6);
        let m1 = mm_fit(&problem, 0.85, 5).unwrap().beta;
        let m2 = mm_fit(&transformed, 0.85, 5).unwrap().beta;
        assert!((&a * &m2 - &m1).amax() < 1e-6);
    }

    #[test]
    fn seed_determinism() {
        let mut problem = random_problem(40, 3, 17);
        problem.y[0] += 50.0;
        let f1 = mm_fit(&problem, 0.85, 99).unwrap();
        let f2 = mm_fit(&problem, 0.85, 99).unwrap();
        assert_eq!(f1.beta, f2.beta);
        assert_eq!(f1.sigma.value, f2.sigma.value);
    }
}
