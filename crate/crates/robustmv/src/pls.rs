//! Partial least squares and robust variants: spatial-sign preprocessing,
//! iteratively reweighted partial M regression, and sparse (soft-threshold)
//! weighting directions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{column_means, column_medians, median};
use crate::loccov::{default_n_dirs, outlyingness, outlyingness_directions, spatial_signs};
use crate::scale::mad;

#[derive(Debug, Clone, PartialEq)]
pub enum PlsMethod {
    Pls,
    SpatialSign,
    Prm { c: f64, iterations: usize },
    Snipls,
    Sprm { c: f64, iterations: usize },
}

/// A fitted PLS regression model.
///
/// `weights` holds directions V with T = X_centered V and T^T T diagonal;
/// predictions use the direct coefficient matrix.
#[derive(Debug, Clone)]
pub struct PlsModel {
    pub x_center: DVector<f64>,
    pub x_scale: DVector<f64>,
    pub y_center: DVector<f64>,
    /// p x k weighting directions.
    pub weights: DMatrix<f64>,
    /// n x k training scores.
    pub scores: DMatrix<f64>,
    /// p x q regression coefficients on centered data.
    pub coefficients: DMatrix<f64>,
    pub case_weights: DVector<f64>,
    pub n_components: usize,
    pub eta: f64,
    pub method: PlsMethod,
}

fn check_xy(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch("X and Y row counts differ".into()));
    }
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::invalid("empty data"));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entries"));
    }
    Ok(())
}

fn centered_rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let cut = 1e-10 * sv.iter().cloned().fold(0.0, f64::max).max(1e-300);
    sv.iter().filter(|s| **s > cut).count()
}

fn center_columns(x: &DMatrix<f64>, center: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            c[(i, j)] -= center[j];
        }
    }
    c
}

/// Soft-threshold then normalize a weighting direction; `eta` is relative to
/// the largest absolute entry.
fn threshold_direction(w: &mut DVector<f64>, eta: f64) -> Result<()> {
    if eta == 0.0 {
        return Ok(());
    }
    let cut = eta * w.amax();
    for v in w.iter_mut() {
        let a = v.abs();
        *v = if a > cut { v.signum() * (a - cut) } else { 0.0 };
    }
    if w.amax() == 0.0 {
        return Err(Error::Sparsity(
            "sparsity level removed every variable from a component".into(),
        ));
    }
    Ok(())
}

/// NIPALS with X-deflation on already-centered data. Returns directions V
/// (with T = Xc V), scores T, and coefficients B.
fn nipals(
    xc: &DMatrix<f64>,
    yc: &DMatrix<f64>,
    k: usize,
    eta: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (n, p) = (xc.nrows(), xc.ncols());
    let q = yc.ncols();
    if eta > 0.0 && q != 1 {
        return Err(Error::Unsupported(
            "sparse weighting directions need a univariate response".into(),
        ));
    }
    let mut e = xc.clone();
    let mut v = DMatrix::zeros(p, k);
    let mut t = DMatrix::zeros(n, k);
    let mut p_load = DMatrix::zeros(p, k);
    for h in 0..k {
        let mut w: DVector<f64> = if q == 1 {
            e.transpose() * yc.column(0)
        } else {
            let m = e.transpose() * yc;
            let svd = m.svd(true, false);
            let u = svd.u.as_ref().unwrap();
            u.column(0).clone_owned()
        };
        threshold_direction(&mut w, eta)?;
        let norm = w.norm();
        if norm <= 1e-300 {
            return Err(Error::Degenerate(format!(
                "no covariance left for component {}",
                h + 1
            )));
        }
        w /= norm;
        let th = &e * &w;
        let tt = th.norm_squared();
        if tt <= 1e-300 {
            return Err(Error::Degenerate(format!(
                "zero score variance at component {}",
                h + 1
            )));
        }
        let ph = e.transpose() * &th / tt;
        // Map the deflated-space direction back to original coordinates so
        // scores remain Xc v_h.
        let mut r = w.clone();
        for j in 0..h {
            let c = p_load.column(j).dot(&w);
            r -= c * v.column(j).clone_owned();
        }
        v.set_column(h, &r);
        t.set_column(h, &th);
        p_load.set_column(h, &ph);
        e -= &th * ph.transpose();
    }
    // B = V diag(1/t_h^T t_h) T^T Y.
    let mut b = DMatrix::zeros(p, q);
    for h in 0..k {
        let th = t.column(h);
        let tt = th.norm_squared();
        let coef = th.transpose() * yc / tt;
        b += v.column(h) * coef;
    }
    Ok((v, t, b))
}

/// Classical PLS regression with mean centering.
pub fn pls_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize) -> Result<PlsModel> {
    check_xy(x, y)?;
    let x_center = column_means(x);
    let xc = center_columns(x, &x_center);
    let rank = centered_rank(&xc);
    if k == 0 || k > rank {
        return Err(Error::invalid(format!(
            "k={k} out of range 1..={rank} (rank of centered X)"
        )));
    }
    let y_center = column_means(y);
    let yc = center_columns(y, &y_center);
    let (v, t, b) = nipals(&xc, &yc, k, 0.0)?;
    Ok(PlsModel {
        x_scale: DVector::from_element(x.ncols(), 1.0),
        x_center,
        y_center,
        weights: v,
        scores: t,
        coefficients: b,
        case_weights: DVector::from_element(x.nrows(), 1.0),
        n_components: k,
        eta: 0.0,
        method: PlsMethod::Pls,
    })
}

/// Predict responses for new rows with the model's preprocessing applied.
pub fn predict(model: &PlsModel, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_new.ncols() != model.x_center.len() {
        return Err(Error::DimensionMismatch("column count mismatch".into()));
    }
    let mut xc = center_columns(x_new, &model.x_center);
    for i in 0..xc.nrows() {
        for j in 0..xc.ncols() {
            xc[(i, j)] /= model.x_scale[j];
        }
    }
    let mut yhat = xc * &model.coefficients;
    for i in 0..yhat.nrows() {
        for j in 0..yhat.ncols() {
            yhat[(i, j)] += model.y_center[j];
        }
    }
    Ok(yhat)
}

/// Scores of new rows: preprocess then multiply by the weighting directions.
pub fn transform(model: &PlsModel, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_new.ncols() != model.x_center.len() {
        return Err(Error::DimensionMismatch("column count mismatch".into()));
    }
    let mut xc = center_columns(x_new, &model.x_center);
    for i in 0..xc.nrows() {
        for j in 0..xc.ncols() {
            xc[(i, j)] /= model.x_scale[j];
        }
    }
    Ok(xc * &model.weights)
}

/// PLS after replacing each median-centered row of X by its spatial sign;
/// y is median-centered. The sign transform bounds every case's leverage.
pub fn spatial_sign_pls(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<PlsModel> {
    let ymat = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    check_xy(x, &ymat)?;
    let x_center = column_medians(x);
    let signs = spatial_signs(x, &x_center)?;
    let rank = centered_rank(&signs);
    if k == 0 || k > rank {
        return Err(Error::invalid(format!(
            "k={k} out of range 1..={rank} (rank of sign-transformed X)"
        )));
    }
    let y_center = median(y.as_slice());
    let yc = DMatrix::from_iterator(y.len(), 1, y.iter().map(|v| v - y_center));
    let (v, t, b) = nipals(&signs, &yc, k, 0.0)?;
    Ok(PlsModel {
        x_scale: DVector::from_element(x.ncols(), 1.0),
        x_center,
        y_center: DVector::from_element(1, y_center),
        weights: v,
        scores: t,
        coefficients: b,
        case_weights: DVector::from_element(x.nrows(), 1.0),
        n_components: k,
        eta: 0.0,
        method: PlsMethod::SpatialSign,
    })
}

/// Reweighting configuration shared by PRM and its sparse version.
#[derive(Debug, Clone)]
pub struct PrmConfig {
    /// Fair-function tuning constant for both residual and score weights.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Seed for the outlyingness directions of the starting weights.
    pub seed: u64,
}

impl Default for PrmConfig {
    fn default() -> Self {
        PrmConfig {
            c: 4.0,
            max_iter: 100,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Fair weight function 1 / (1 + |z/c|)^2.
pub fn fair_weight(z: f64, c: f64) -> f64 {
    let a = 1.0 + (z / c).abs();
    1.0 / (a * a)
}

fn residual_weights(res: &[f64], c: f64) -> Vec<f64> {
    let sigma = mad(res, true).map(|s| s.value).unwrap_or(0.0);
    if sigma == 0.0 {
        // Exact fit (within noise): no case stands out.
        return vec![1.0; res.len()];
    }
    res.iter().map(|r| fair_weight(r / sigma, c)).collect()
}

fn score_weights(t: &DMatrix<f64>, c: f64) -> Vec<f64> {
    let n = t.nrows();
    let center = column_medians(t);
    let d: Vec<f64> = (0..n)
        .map(|i| (t.row(i).transpose() - &center).norm())
        .collect();
    let med = median(&d);
    if med == 0.0 {
        return vec![1.0; n];
    }
    d.iter().map(|di| fair_weight(di / med, c)).collect()
}

fn weighted_pls_pass(
    xc: &DMatrix<f64>,
    yc: &DVector<f64>,
    w: &[f64],
    k: usize,
    eta: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, p) = (xc.nrows(), xc.ncols());
    let mut xw = DMatrix::zeros(n, p);
    let mut yw = DMatrix::zeros(n, 1);
    for i in 0..n {
        let s = w[i].sqrt();
        for j in 0..p {
            xw[(i, j)] = s * xc[(i, j)];
        }
        yw[(i, 0)] = s * yc[i];
    }
    let (v, _, b) = nipals(&xw, &yw, k, eta)?;
    Ok((v, b))
}

fn robust_irpls(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k: usize,
    eta: f64,
    cfg: &PrmConfig,
) -> Result<PlsModel> {
    let ymat = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    check_xy(x, &ymat)?;
    let n = x.nrows();
    let p = x.ncols();
    let rank = centered_rank(&center_columns(x, &column_medians(x)));
    if k == 0 || k > rank {
        return Err(Error::invalid(format!(
            "k={k} out of range 1..={rank} (rank of centered X)"
        )));
    }

    // Starting weights: leverage from projection outlyingness of X, and
    // residuals from the spatial-sign fit.
    let dirs = outlyingness_directions(x, default_n_dirs(x.ncols()).min(1000), cfg.seed);
    let out = outlyingness(x, &dirs)?;
    let med_out = median(out.as_slice()).max(1e-12);
    let start_model = spatial_sign_pls(x, y, k)?;
    let start_res: Vec<f64> = {
        let yhat = predict(&start_model, x)?;
        (0..n).map(|i| y[i] - yhat[(i, 0)]).collect()
    };
    let wr = residual_weights(&start_res, cfg.c);
    let mut w: Vec<f64> = (0..n)
        .map(|i| wr[i] * fair_weight(out[i] / med_out, cfg.c))
        .collect();

    let mut b_prev: Option<DMatrix<f64>> = None;
    let mut iterations = 0;
    // The thresholded fitter can oscillate between near-equivalent supports;
    // past this point the support is frozen and the smooth loop finishes.
    let freeze_at = cfg.max_iter / 2;
    let mut active: Option<Vec<usize>> = None;
    let mut eta_eff = eta;
    loop {
        iterations += 1;
        // Recenter with the current weights so well-fitting cases define the
        // origin; the weights keep outliers out of the means.
        let wsum: f64 = w.iter().sum();
        if wsum <= 1e-300 {
            return Err(Error::Degenerate("all case weights vanished".into()));
        }
        let mut x_center = DVector::zeros(p);
        let mut y_center = 0.0;
        for i in 0..n {
            for j in 0..p {
                x_center[j] += w[i] * x[(i, j)];
            }
            y_center += w[i] * y[i];
        }
        x_center /= wsum;
        y_center /= wsum;
        let mut xc = center_columns(x, &x_center);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_center));
        if let Some(keep) = &active {
            for j in 0..p {
                if !keep.contains(&j) {
                    xc.column_mut(j).fill(0.0);
                }
            }
        }

        let (v, b) = weighted_pls_pass(&xc, &yc, &w, k, eta_eff)?;
        let res: Vec<f64> = {
            let yhat = &xc * &b;
            (0..n).map(|i| yc[i] - yhat[(i, 0)]).collect()
        };
        let t_all = &xc * &v;
        let wr = residual_weights(&res, cfg.c);
        let wt = score_weights(&t_all, cfg.c);
        // Damped update: same fixed points, but breaks the weight/support
        // oscillation the thresholded fitter is prone to.
        w = (0..n).map(|i| 0.5 * (w[i] + wr[i] * wt[i])).collect();

        let change = match &b_prev {
            Some(prev) => (&b - prev).norm() / prev.norm().max(1e-12),
            None => f64::INFINITY,
        };
        if eta_eff > 0.0 && change >= cfg.tol && iterations >= freeze_at {
            let keep: Vec<usize> = (0..p)
                .filter(|&j| v.row(j).iter().any(|c| *c != 0.0))
                .collect();
            active = Some(keep);
            eta_eff = 0.0;
        }
        if change < cfg.tol || iterations >= cfg.max_iter {
            if change >= cfg.tol {
                return Err(Error::Convergence {
                    iterations,
                    last_change: change,
                });
            }
            let method = if eta == 0.0 {
                PlsMethod::Prm {
                    c: cfg.c,
                    iterations,
                }
            } else {
                PlsMethod::Sprm {
                    c: cfg.c,
                    iterations,
                }
            };
            return Ok(PlsModel {
                x_scale: DVector::from_element(x.ncols(), 1.0),
                x_center,
                y_center: DVector::from_element(1, y_center),
                scores: t_all,
                weights: v,
                coefficients: b,
                case_weights: DVector::from_column_slice(&w),
                n_components: k,
                eta,
                method,
            });
        }
        b_prev = Some(b);
    }
}

/// Partial robust M regression: iteratively reweighted PLS with case
/// weights from both residual size and score-space distance.
pub fn prm_fit(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, cfg: &PrmConfig) -> Result<PlsModel> {
    robust_irpls(x, y, k, 0.0, cfg)
}

/// Sparse NIPALS: per component the weighting direction is soft-thresholded
/// at eta times its largest absolute entry. eta = 0 reproduces pls_fit.
pub fn snipls_fit(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, eta: f64) -> Result<PlsModel> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid("eta must lie in [0, 1)"));
    }
    let ymat = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    check_xy(x, &ymat)?;
    let x_center = column_means(x);
    let xc = center_columns(x, &x_center);
    let rank = centered_rank(&xc);
    if k == 0 || k > rank {
        return Err(Error::invalid(format!(
            "k={k} out of range 1..={rank} (rank of centered X)"
        )));
    }
    let y_center = column_means(&ymat);
    let yc = center_columns(&ymat, &y_center);
    let (v, t, b) = nipals(&xc, &yc, k, eta)?;
    Ok(PlsModel {
        x_scale: DVector::from_element(x.ncols(), 1.0),
        x_center,
        y_center,
        weights: v,
        scores: t,
        coefficients: b,
        case_weights: DVector::from_element(x.nrows(), 1.0),
        n_components: k,
        eta,
        method: PlsMethod::Snipls,
    })
}

/// Sparse partial robust M regression: the PRM reweighting loop with the
/// sparse inner fitter.
pub fn sprm_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k: usize,
    eta: f64,
    cfg: &PrmConfig,
) -> Result<PlsModel> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid("eta must lie in [0, 1)"));
    }
    robust_irpls(x, y, k, eta, cfg)
}

/// Weighting directions and coefficients reconstructed from the covariance
/// blocks S_X = Xc^T Xc and s_xy = Xc^T y alone.
pub fn pls_from_covariance(
    sx: &DMatrix<f64>,
    sxy: &DVector<f64>,
    k: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = sx.nrows();
    if sx.ncols() != p || sxy.len() != p {
        return Err(Error::DimensionMismatch("covariance block shapes".into()));
    }
    let mut s = sx.clone();
    let mut cross = sxy.clone();
    let mut v = DMatrix::zeros(p, k);
    for h in 0..k {
        let norm = cross.norm();
        if norm <= 1e-300 {
            return Err(Error::Degenerate(format!(
                "no covariance left for component {}",
                h + 1
            )));
        }
        let w = &cross / norm;
        let sv = &s * &w;
        let tt = w.dot(&sv);
        if tt <= 1e-300 {
            return Err(Error::Degenerate(format!(
                "zero score variance at component {}",
                h + 1
            )));
        }
        // Same back-mapping as the data-space algorithm, expressed through S.
        let mut r = w.clone();
        for j in 0..h {
            // p_j^T w with p_j = S_j v_j / t_j^T t_j is cached implicitly by
            // re-orthogonalizing r against earlier scores via S.
            let vj = v.column(j).clone_owned();
            let svj = sx * &vj;
            let c = svj.dot(&r) / vj.dot(&svj);
            r -= c * vj;
        }
        v.set_column(h, &r);
        cross -= &sv * (w.dot(&cross) / tt);
        s -= &sv * sv.transpose() / tt;
    }
    // B = V (V^T S_X V)^{-1} V^T s_xy.
    let vs = v.transpose() * sx * &v;
    let rhs = v.transpose() * sxy;
    let sol = crate::linalg::solve(&vs, &rhs)?;
    Ok((v.clone(), &v * sol))
}
