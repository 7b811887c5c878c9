//! Robust multivariate location and scatter: coordinate-wise and spatial
//! medians, the minimum covariance determinant estimator, Stahel-Donoho
//! weighting, spatial signs, and tolerance ellipses.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{chi2_quantile, column_medians, median};
use crate::rng;
use crate::scale::mad;

/// Location, scatter and per-case diagnostics from one estimator.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub location: DVector<f64>,
    pub scatter: DMatrix<f64>,
    /// Squared Mahalanobis-type distances (pseudo-inverse when singular).
    pub distances: DVector<f64>,
    pub case_weights: DVector<f64>,
    pub method: CovMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovMethod {
    Classical,
    Mcd {
        h: usize,
        consistency_factor: f64,
    },
    StahelDonoho {
        n_dirs: usize,
        cutoff: f64,
    },
    SignCovariance,
}

fn check_matrix(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::invalid("empty data matrix"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entries"));
    }
    Ok(())
}

/// Per-column median.
pub fn coordinatewise_median(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_matrix(x)?;
    Ok(column_medians(x))
}

/// Minimizer of the sum of Euclidean distances to the rows, by Weiszfeld
/// iteration from the coordinate-wise median.
pub fn spatial_median(x: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    check_matrix(x)?;
    let (n, p) = (x.nrows(), x.ncols());
    let mut mu = column_medians(x);
    let scale = x.amax().max(1.0);
    let guard = 1e-12 * scale;
    let mut last_change = f64::INFINITY;
    for _ in 0..max_iter {
        let mut num = DVector::zeros(p);
        let mut den = 0.0;
        for i in 0..n {
            let d = (x.row(i).transpose() - &mu).norm().max(guard);
            let w = 1.0 / d;
            num += w * x.row(i).transpose();
            den += w;
        }
        let next = num / den;
        last_change = (&next - &mu).norm();
        mu = next;
        if last_change <= tol * scale {
            return Ok(mu);
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last_change,
    })
}

/// Sum of Euclidean distances from the rows to a point.
pub fn spatial_objective(x: &DMatrix<f64>, mu: &DVector<f64>) -> f64 {
    (0..x.nrows())
        .map(|i| (x.row(i).transpose() - mu).norm())
        .sum()
}

/// Squared Mahalanobis distances of the rows with respect to an estimate;
/// falls back to the pseudo-inverse for singular scatter.
pub fn mahalanobis(x: &DMatrix<f64>, est: &CovarianceEstimate) -> Result<DVector<f64>> {
    mahalanobis_about(x, &est.location, &est.scatter)
}

fn scatter_inverse(scatter: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = scatter.nrows();
    match scatter.clone().cholesky() {
        Some(ch) => Ok(ch.inverse()),
        None => {
            // PSD pseudo-inverse for rank-deficient scatter.
            let (vals, vecs) = crate::linalg::sym_eigen_desc(scatter);
            let cut = 1e-12 * vals[0].max(1e-300);
            if vals[0] <= 0.0 {
                return Err(Error::Singular(format!("{p}x{p} scatter")));
            }
            let mut inv = DMatrix::zeros(p, p);
            for j in 0..p {
                if vals[j] > cut {
                    let v = vecs.column(j);
                    inv.syger(1.0 / vals[j], &v.clone_owned(), &v.clone_owned(), 1.0);
                }
            }
            for a in 0..p {
                for b in 0..a {
                    inv[(b, a)] = inv[(a, b)];
                }
            }
            Ok(inv)
        }
    }
}

/// Squared Mahalanobis distances about an explicit center and scatter.
pub fn mahalanobis_about(
    x: &DMatrix<f64>,
    center: &DVector<f64>,
    scatter: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    check_matrix(x)?;
    if center.len() != x.ncols() || scatter.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch("center/scatter vs data".into()));
    }
    let inv = scatter_inverse(scatter)?;
    let n = x.nrows();
    let mut d = DVector::zeros(n);
    for i in 0..n {
        let c = x.row(i).transpose() - center;
        d[i] = (c.transpose() * &inv * &c)[(0, 0)].max(0.0);
    }
    Ok(d)
}

fn log_det_psd(m: &DMatrix<f64>) -> Option<f64> {
    m.clone()
        .cholesky()
        .map(|ch| 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

fn subset_mean_cov(x: &DMatrix<f64>, subset: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let p = x.ncols();
    let m = subset.len();
    let mut mean = DVector::zeros(p);
    for &i in subset {
        mean += x.row(i).transpose();
    }
    mean /= m as f64;
    let mut cov = DMatrix::zeros(p, p);
    for &i in subset {
        let d = x.row(i).transpose() - &mean;
        cov.syger(1.0, &d, &d, 1.0);
    }
    for a in 0..p {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    (mean, cov / (m as f64 - 1.0))
}

/// One concentration step: rank all cases by distance to (mean, cov) of the
/// current subset and keep the h closest. Returns the stabilized subset.
fn concentrate_subset(
    x: &DMatrix<f64>,
    mut subset: Vec<usize>,
    h: usize,
    max_steps: usize,
) -> Option<(Vec<usize>, f64)> {
    let n = x.nrows();
    for _ in 0..max_steps {
        let (mean, cov) = subset_mean_cov(x, &subset);
        let inv = match cov.clone().cholesky() {
            Some(ch) => ch.inverse(),
            None => return None,
        };
        let mut d: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let c = x.row(i).transpose() - &mean;
                ((c.transpose() * &inv * &c)[(0, 0)], i)
            })
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut next: Vec<usize> = d[..h].iter().map(|&(_, i)| i).collect();
        next.sort_unstable();
        if next == subset {
            let (_, cov) = subset_mean_cov(x, &subset);
            return log_det_psd(&cov).map(|ld| (subset, ld));
        }
        subset = next;
    }
    let (_, cov) = subset_mean_cov(x, &subset);
    log_det_psd(&cov).map(|ld| (subset, ld))
}

const MCD_DEFAULT_STARTS: usize = 500;
const MCD_KEEP_BEST: usize = 10;

/// Minimum covariance determinant estimator by random (p+1)-subset starts
/// and concentration steps. Deterministic given the seed.
pub fn mcd_fit(
    x: &DMatrix<f64>,
    h: Option<usize>,
    n_starts: Option<usize>,
    seed: u64,
) -> Result<CovarianceEstimate> {
    check_matrix(x)?;
    let (n, p) = (x.nrows(), x.ncols());
    if p >= n {
        return Err(Error::invalid(
            "minimum covariance determinant needs more observations than variables",
        ));
    }
    let h = h.unwrap_or((n + p + 1) / 2);
    if h <= p || h > n {
        return Err(Error::invalid(format!("h={h} must satisfy p < h <= n")));
    }
    let n_starts = n_starts.unwrap_or(MCD_DEFAULT_STARTS);

    // Seed subsets of size p+1, grown to h by one distance ranking, then two
    // cheap concentration steps each.
    let early: Vec<Option<(Vec<usize>, f64)>> = (0..n_starts as u64)
        .into_par_iter()
        .map(|task| {
            let mut r = rng::stream(seed, task);
            for _ in 0..20 {
                let mut idx = rand::seq::index::sample(&mut r, n, (p + 1).min(n)).into_vec();
                idx.sort_unstable();
                let (mean, cov) = subset_mean_cov(x, &idx);
                let Some(ch) = cov.clone().cholesky() else {
                    continue;
                };
                let inv = ch.inverse();
                let mut d: Vec<(f64, usize)> = (0..n)
                    .map(|i| {
                        let c = x.row(i).transpose() - &mean;
                        ((c.transpose() * &inv * &c)[(0, 0)], i)
                    })
                    .collect();
                d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let mut sub: Vec<usize> = d[..h].iter().map(|&(_, i)| i).collect();
                sub.sort_unstable();
                if let Some(res) = concentrate_subset(x, sub, h, 2) {
                    return Some(res);
                }
            }
            None
        })
        .collect();
    let mut candidates: Vec<(Vec<usize>, f64)> = early.into_iter().flatten().collect();
    if candidates.is_empty() {
        return Err(Error::Degenerate("all candidate subsets singular".into()));
    }
    candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    candidates.truncate(MCD_KEEP_BEST);

    let finished: Vec<Option<(Vec<usize>, f64)>> = candidates
        .into_par_iter()
        .map(|(sub, _)| concentrate_subset(x, sub, h, 100))
        .collect();
    let best = finished
        .into_iter()
        .flatten()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::Degenerate("concentration failed on all candidates".into()))?;

    let (subset, _) = best;
    let (location, raw_scatter) = subset_mean_cov(x, &subset);
    let raw_d = mahalanobis_about(x, &location, &raw_scatter)?;
    let factor = median(raw_d.as_slice()) / chi2_quantile(p, 0.5);
    let scatter = &raw_scatter * factor;
    let distances = mahalanobis_about(x, &location, &scatter)?;
    let mut case_weights = DVector::zeros(n);
    for &i in &subset {
        case_weights[i] = 1.0;
    }
    Ok(CovarianceEstimate {
        location,
        scatter,
        distances,
        case_weights,
        method: CovMethod::Mcd {
            h,
            consistency_factor: factor,
        },
    })
}

/// Indices of the h-subset (cases with weight 1) of an MCD estimate.
pub fn mcd_subset(est: &CovarianceEstimate) -> Vec<usize> {
    est.case_weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w == 1.0)
        .map(|(i, _)| i)
        .collect()
}

/// Projection directions for Stahel-Donoho outlyingness: coordinate axes,
/// normalized differences of random point pairs, then random unit vectors.
pub fn outlyingness_directions(x: &DMatrix<f64>, n_dirs: usize, seed: u64) -> Vec<DVector<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let (n, p) = (x.nrows(), x.ncols());
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(n_dirs);
    for j in 0..p.min(n_dirs) {
        let mut e = DVector::zeros(p);
        e[j] = 1.0;
        dirs.push(e);
    }
    let mut r = rng::stream(seed, 0);
    let n_pairs = ((n_dirs.saturating_sub(dirs.len())) / 2).min(2 * n);
    let mut attempts = 0;
    while dirs.len() < p + n_pairs && attempts < 10 * n_dirs {
        attempts += 1;
        let i = rand::Rng::gen_range(&mut r, 0..n);
        let j = rand::Rng::gen_range(&mut r, 0..n);
        if i == j {
            continue;
        }
        let d = x.row(i).transpose() - x.row(j).transpose();
        let norm = d.norm();
        if norm > 0.0 {
            dirs.push(d / norm);
        }
    }
    while dirs.len() < n_dirs {
        let d = DVector::from_fn(p, |_, _| -> f64 { StandardNormal.sample(&mut r) });
        let norm = d.norm();
        if norm > 0.0 {
            dirs.push(d / norm);
        }
    }
    dirs.truncate(n_dirs);
    dirs
}

/// Default direction count: 250 p, capped at 5000.
pub fn default_n_dirs(p: usize) -> usize {
    (250 * p).min(5000)
}

/// Maximum over directions of |x_i^T a - med(Xa)| / MAD(Xa), the projection
/// outlyingness of every case.
pub fn outlyingness(x: &DMatrix<f64>, dirs: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_matrix(x)?;
    let n = x.nrows();
    let per_dir: Vec<Option<Vec<f64>>> = dirs
        .par_iter()
        .map(|a| {
            let proj = x * a;
            let med = median(proj.as_slice());
            let s = mad(proj.as_slice(), true).ok()?.value;
            if s <= 0.0 {
                return None;
            }
            Some(proj.iter().map(|v| (v - med).abs() / s).collect())
        })
        .collect();
    let mut out: DVector<f64> = DVector::zeros(n);
    let mut any = false;
    for d in per_dir.into_iter().flatten() {
        any = true;
        for i in 0..n {
            out[i] = out[i].max(d[i]);
        }
    }
    if !any {
        return Err(Error::Degenerate(
            "every projection direction had zero spread".into(),
        ));
    }
    Ok(out)
}

/// Hard-rejection weight: 1 up to the cutoff, then (c/u)^2.
pub fn outlyingness_weight(u: f64, cutoff: f64) -> f64 {
    if u <= cutoff {
        1.0
    } else {
        (cutoff / u) * (cutoff / u)
    }
}

/// Stahel-Donoho estimator: outlyingness-weighted mean and covariance.
/// Handles p > n (the scatter is then singular; distances use the
/// pseudo-inverse).
pub fn stahel_donoho_fit(
    x: &DMatrix<f64>,
    n_dirs: Option<usize>,
    seed: u64,
) -> Result<CovarianceEstimate> {
    check_matrix(x)?;
    let (n, p) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    let n_dirs = n_dirs.unwrap_or_else(|| default_n_dirs(p));
    let dirs = outlyingness_directions(x, n_dirs, seed);
    let out = outlyingness(x, &dirs)?;
    let cutoff = chi2_quantile(p, 0.95).sqrt();
    let w = DVector::from_iterator(n, out.iter().map(|&u| outlyingness_weight(u, cutoff)));
    let wsum: f64 = w.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::Degenerate("all case weights are zero".into()));
    }
    let mut location = DVector::zeros(p);
    for i in 0..n {
        location += w[i] * x.row(i).transpose();
    }
    location /= wsum;
    let mut scatter = DMatrix::zeros(p, p);
    for i in 0..n {
        let d = x.row(i).transpose() - &location;
        scatter.syger(w[i], &d, &d, 1.0);
    }
    for a in 0..p {
        for b in 0..a {
            scatter[(b, a)] = scatter[(a, b)];
        }
    }
    scatter /= wsum;
    let distances = mahalanobis_about(x, &location, &scatter)?;
    Ok(CovarianceEstimate {
        location,
        scatter,
        distances,
        case_weights: w,
        method: CovMethod::StahelDonoho { n_dirs, cutoff },
    })
}

/// Row-wise unit vectors (x - t)/||x - t||; zero rows stay zero.
pub fn spatial_signs(x: &DMatrix<f64>, center: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_matrix(x)?;
    if center.len() != x.ncols() {
        return Err(Error::DimensionMismatch("center length != columns".into()));
    }
    let mut s = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let d = x.row(i).transpose() - center;
        let norm = d.norm();
        if norm > 0.0 {
            s.set_row(i, &(d / norm).transpose());
        }
    }
    Ok(s)
}

/// Spatial-sign covariance: eigenvectors of the sign covariance about the
/// spatial median, with eigenvalues replaced by the squared consistent MAD
/// of the data projections and re-sorted descending.
pub fn sign_covariance(x: &DMatrix<f64>) -> Result<CovarianceEstimate> {
    check_matrix(x)?;
    let (n, p) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    let center = spatial_median(x, 1e-10, 500)?;
    let signs = spatial_signs(x, &center)?;
    if signs.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("all spatial signs are zero".into()));
    }
    let sign_cov = signs.transpose() * &signs / (n as f64 - 1.0);
    let (_, u) = crate::linalg::sym_eigen_desc(&sign_cov);
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..p)
        .map(|j| {
            let uj = DVector::from_column_slice(u.column(j).as_slice());
            let proj = x * &uj;
            let s = mad(proj.as_slice(), true).map(|e| e.value).unwrap_or(0.0);
            (s * s, uj)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut scatter = DMatrix::zeros(p, p);
    for (lam, uj) in &pairs {
        scatter.syger(*lam, uj, uj, 1.0);
    }
    for a in 0..p {
        for b in 0..a {
            scatter[(b, a)] = scatter[(a, b)];
        }
    }
    let distances = mahalanobis_about(x, &center, &scatter)?;
    Ok(CovarianceEstimate {
        location: center,
        scatter,
        distances,
        case_weights: DVector::from_element(n, 1.0),
        method: CovMethod::SignCovariance,
    })
}

/// A bivariate tolerance ellipse.
#[derive(Debug, Clone)]
pub struct Ellipse {
    pub center: (f64, f64),
    /// Semi-axis lengths, major first.
    pub axes: (f64, f64),
    /// Angle of the major axis to the x-axis, radians in (-pi/2, pi/2].
    pub angle: f64,
}

impl Ellipse {
    /// Points tracing the ellipse boundary.
    pub fn polyline(&self, n_points: usize) -> Vec<(f64, f64)> {
        let (ca, sa) = (self.angle.cos(), self.angle.sin());
        (0..n_points)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
                let (u, v) = (self.axes.0 * t.cos(), self.axes.1 * t.sin());
                (
                    self.center.0 + ca * u - sa * v,
                    self.center.1 + sa * u + ca * v,
                )
            })
            .collect()
    }
}

/// Ellipse of constant squared Mahalanobis distance at the chi-square(2)
/// quantile of the given level. Bivariate estimates only.
pub fn tolerance_ellipse(est: &CovarianceEstimate, level: f64) -> Result<Ellipse> {
    if est.location.len() != 2 {
        return Err(Error::Unsupported(
            "tolerance ellipses are bivariate only".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level must lie in (0, 1)"));
    }
    let (vals, vecs) = crate::linalg::sym_eigen_desc(&est.scatter);
    if vals[1] <= 0.0 {
        return Err(Error::Singular("scatter not positive definite".into()));
    }
    let r2 = chi2_quantile(2, level);
    let mut angle = vecs[(1, 0)].atan2(vecs[(0, 0)]);
    if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    } else if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    }
    Ok(Ellipse {
        center: (est.location[0], est.location[1]),
        axes: ((vals[0] * r2).sqrt(), (vals[1] * r2).sqrt()),
        angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::covariance_about;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::stream(seed, 0);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn coordinatewise_median_basic() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            coordinatewise_median(&x).unwrap(),
            DVector::from_column_slice(&[1.0, 1.0])
        );
        let single = DMatrix::from_row_slice(1, 2, &[4.0, -2.0]);
        assert_eq!(
            coordinatewise_median(&single).unwrap(),
            DVector::from_column_slice(&[4.0, -2.0])
        );
    }

    #[test]
    fn spatial_median_symmetric_cross() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let mu = spatial_median(&x, 1e-12, 500).unwrap();
        assert!(mu.norm() < 1e-8);
    }

    #[test]
    fn spatial_median_identical_points() {
        let x = DMatrix::from_row_slice(3, 2, &[2.0, -1.0, 2.0, -1.0, 2.0, -1.0]);
        let mu = spatial_median(&x, 1e-10, 100).unwrap();
        assert!((mu - DVector::from_column_slice(&[2.0, -1.0])).norm() < 1e-8);
    }

    #[test]
    fn spatial_median_beats_probe_points() {
        let x = gaussian(50, 2, 9);
        let mu = spatial_median(&x, 1e-12, 1000).unwrap();
        let obj = spatial_objective(&x, &mu);
        let mean = crate::linalg::column_means(&x);
        assert!(obj <= spatial_objective(&x, &mean) + 1e-8);
        let mut r = rng::stream(10, 0);
        for _ in 0..10_000 {
            let probe = DVector::from_fn(2, |_, _| r.gen_range(-3.0..3.0));
            assert!(obj <= spatial_objective(&x, &probe) + 1e-8);
        }
    }

    fn classical(x: &DMatrix<f64>) -> CovarianceEstimate {
        let location = crate::linalg::column_means(x);
        let scatter = covariance_about(x, &location);
        let distances = mahalanobis_about(x, &location, &scatter).unwrap();
        CovarianceEstimate {
            location,
            scatter,
            distances,
            case_weights: DVector::from_element(x.nrows(), 1.0),
            method: CovMethod::Classical,
        }
    }

    #[test]
    fn mahalanobis_identity_is_euclidean() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        let est = CovarianceEstimate {
            location: DVector::zeros(2),
            scatter: DMatrix::identity(2, 2),
            distances: DVector::zeros(2),
            case_weights: DVector::from_element(2, 1.0),
            method: CovMethod::Classical,
        };
        let d = mahalanobis(&x, &est).unwrap();
        assert_relative_eq!(d[0], 25.0, epsilon = 1e-12);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn mahalanobis_matches_closed_form_2x2() {
        let scatter = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let center = DVector::from_column_slice(&[1.0, -1.0]);
        let x = DMatrix::from_row_slice(1, 2, &[2.5, 0.5]);
        let d = mahalanobis_about(&x, &center, &scatter).unwrap()[0];
        // Inverse of [[a,b],[b,c]] is [[c,-b],[-b,a]]/det.
        let det = 2.0 * 1.0 - 0.25;
        let (dx, dy) = (1.5, 1.5);
        let oracle = (1.0 * dx * dx - 2.0 * 0.5 * dx * dy + 2.0 * dy * dy) / det;
        assert_relative_eq!(d, oracle, epsilon = 1e-10);
    }

    fn contaminated_cloud(seed: u64) -> DMatrix<f64> {
        // 8 clean bivariate points plus 2 distant ones.
        let mut x = gaussian(10, 2, seed);
        for i in 8..10 {
            x[(i, 0)] += 1e6;
            x[(i, 1)] -= 1e6;
        }
        x
    }

    #[test]
    fn mcd_matches_exhaustive_oracle() {
        let x = contaminated_cloud(31);
        let est = mcd_fit(&x, Some(6), Some(500), 7).unwrap();
        let got = mcd_subset(&est);

        // All C(10,6) = 210 subsets, each concentrated to a fixed point.
        let mut best: Option<(Vec<usize>, f64)> = None;
        let idx: Vec<usize> = (0..10).collect();
        let mut comb = vec![0usize; 6];
        fn rec(
            idx: &[usize],
            comb: &mut Vec<usize>,
            start: usize,
            k: usize,
            x: &DMatrix<f64>,
            best: &mut Option<(Vec<usize>, f64)>,
        ) {
            if k == 0 {
                if let Some((sub, ld)) = concentrate_subset(x, comb.clone(), comb.len(), 100) {
                    let replace = match best {
                        None => true,
                        Some((bs, bl)) => ld < *bl - 1e-12 || (ld < *bl + 1e-12 && sub < *bs),
                    };
                    if replace {
                        *best = Some((sub, ld));
                    }
                }
                return;
            }
            for i in start..=idx.len() - k {
                comb.push(idx[i]);
                rec(idx, comb, i + 1, k - 1, x, best);
                comb.pop();
            }
        }
        comb.clear();
        rec(&idx, &mut comb, 0, 6, &x, &mut best);
        assert_eq!(got, best.unwrap().0);
    }

    #[test]
    fn mcd_excludes_distant_points() {
        let x = contaminated_cloud(3);
        let est = mcd_fit(&x, Some(8), None, 5).unwrap();
        let subset = mcd_subset(&est);
        assert!(!subset.contains(&8) && !subset.contains(&9));
    }

    #[test]
    fn mcd_consistency_at_normal_model() {
        // Scatter should track the identity for clean standard normal data.
        let x = gaussian(800, 2, 77);
        let est = mcd_fit(&x, None, None, 9).unwrap();
        for a in 0..2 {
            assert!((est.scatter[(a, a)] - 1.0).abs() < 0.25, "{:?}", est.scatter);
        }
    }

    #[test]
    fn mcd_affine_equivariant_subset() {
        let x = contaminated_cloud(13);
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.3, -0.2, 0.8]);
        let b = DVector::from_column_slice(&[5.0, -2.0]);
        let mut xt = &x * a.transpose();
        for i in 0..xt.nrows() {
            for j in 0..2 {
                xt[(i, j)] += b[j];
            }
        }
        let e1 = mcd_fit(&x, Some(6), Some(500), 21).unwrap();
        let e2 = mcd_fit(&xt, Some(6), Some(500), 21).unwrap();
        assert_eq!(mcd_subset(&e1), mcd_subset(&e2));
        let loc = &a * &e1.location + &b;
        assert!((&loc - &e2.location).amax() < 1e-6 * loc.amax().max(1.0));
        let cov = &a * &e1.scatter * a.transpose();
        assert!((&cov - &e2.scatter).amax() < 1e-6 * cov.amax().max(1.0));
    }

    #[test]
    fn mcd_rejects_fat_data() {
        let x = gaussian(3, 5, 1);
        assert!(mcd_fit(&x, None, None, 1).is_err());
    }

    #[test]
    fn outlyingness_univariate_closed_form() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 10.0]);
        let dirs = vec![DVector::from_element(1, 1.0)];
        let out = outlyingness(&x, &dirs).unwrap();
        let med = 3.0;
        let s = mad(&[1.0, 2.0, 3.0, 4.0, 10.0], true).unwrap().value;
        for i in 0..5 {
            assert_relative_eq!(out[i], (x[(i, 0)] - med).abs() / s, epsilon = 1e-12);
        }
    }

    #[test]
    fn stahel_donoho_downweights_far_outlier() {
        let mut x = gaussian(40, 3, 15);
        x[(0, 0)] = 1e6;
        let est = stahel_donoho_fit(&x, Some(500), 3).unwrap();
        assert!(est.case_weights[0] < 1e-3);
        // The direction sup overshoots for a few clean cases at small n;
        // most clean points should keep (near-)full weight.
        let clean_ok = (1..40).filter(|&i| est.case_weights[i] >= 0.9).count();
        assert!(clean_ok >= 30, "clean_ok = {clean_ok}");
        let mut clean: Vec<f64> = (1..40).map(|i| est.case_weights[i]).collect();
        clean.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(clean[clean.len() / 2] >= 0.99);
    }

    #[test]
    fn stahel_donoho_handles_more_variables_than_cases() {
        let x = gaussian(6, 10, 2);
        let est = stahel_donoho_fit(&x, Some(300), 4).unwrap();
        assert_eq!(est.location.len(), 10);
        assert!(est.distances.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn spatial_signs_basic() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        let s = spatial_signs(&x, &DVector::zeros(2)).unwrap();
        assert_relative_eq!(s[(0, 0)], 0.6, epsilon = 1e-12);
        assert_relative_eq!(s[(0, 1)], 0.8, epsilon = 1e-12);
        assert_eq!(s.row(1).norm(), 0.0);
        for i in 0..2 {
            let norm = s.row(i).norm();
            assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_covariance_spherical_data() {
        let x = gaussian(5000, 2, 23);
        let est = sign_covariance(&x).unwrap();
        let s2 = 0.5 * (est.scatter[(0, 0)] + est.scatter[(1, 1)]);
        assert!((est.scatter[(0, 0)] - est.scatter[(1, 1)]).abs() < 0.1 * s2);
        assert!(est.scatter[(0, 1)].abs() < 0.05 * s2);
    }

    #[test]
    fn sign_covariance_elliptical_eigenstructure() {
        let mut x = gaussian(3000, 2, 41);
        for i in 0..x.nrows() {
            x[(i, 0)] *= 3.0;
        }
        let est = sign_covariance(&x).unwrap();
        let (vals, vecs) = crate::linalg::sym_eigen_desc(&est.scatter);
        let top = DVector::from_column_slice(vecs.column(0).as_slice());
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        assert!(crate::linalg::angle_deg(&top, &e1) < 5.0);
        assert!(vals[0] / vals[1] > 4.0);
    }

    #[test]
    fn sign_covariance_line_through_center() {
        let x = DMatrix::from_fn(20, 2, |i, j| {
            let t = i as f64 - 9.5;
            if j == 0 {
                t
            } else {
                2.0 * t
            }
        });
        let est = sign_covariance(&x).unwrap();
        let (vals, _) = crate::linalg::sym_eigen_desc(&est.scatter);
        assert!(vals[1].abs() < 1e-12);
    }

    #[test]
    fn tolerance_ellipse_identity_is_circle() {
        let est = CovarianceEstimate {
            location: DVector::zeros(2),
            scatter: DMatrix::identity(2, 2),
            distances: DVector::zeros(1),
            case_weights: DVector::from_element(1, 1.0),
            method: CovMethod::Classical,
        };
        let e = tolerance_ellipse(&est, 0.975).unwrap();
        let r = chi2_quantile(2, 0.975).sqrt();
        assert_relative_eq!(e.axes.0, r, epsilon = 1e-10);
        assert_relative_eq!(e.axes.1, r, epsilon = 1e-10);
    }

    #[test]
    fn tolerance_ellipse_axis_ratio_and_angle() {
        let est = CovarianceEstimate {
            location: DVector::zeros(2),
            scatter: DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]),
            distances: DVector::zeros(1),
            case_weights: DVector::from_element(1, 1.0),
            method: CovMethod::Classical,
        };
        let e = tolerance_ellipse(&est, 0.9).unwrap();
        assert_relative_eq!(e.axes.0 / e.axes.1, 2.0, epsilon = 1e-10);

        // Rotate by 30 degrees and compare the recovered angle.
        let th: f64 = 30f64.to_radians();
        let q = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let rot = &q * &est.scatter * q.transpose();
        let est_rot = CovarianceEstimate {
            scatter: rot,
            ..est
        };
        let er = tolerance_ellipse(&est_rot, 0.9).unwrap();
        assert_relative_eq!(er.angle, th, epsilon = 1e-8);
    }

    #[test]
    fn orthogonal_equivariance_of_spatial_median_and_sign_eigenvalues() {
        let x = gaussian(200, 3, 55);
        let th: f64 = 0.7;
        let q = DMatrix::from_row_slice(
            3,
            3,
            &[
                th.cos(),
                -th.sin(),
                0.0,
                th.sin(),
                th.cos(),
                0.0,
                0.0,
                0.0,
                1.0,
            ],
        );
        let xq = &x * q.transpose();
        let m1 = spatial_median(&x, 1e-12, 1000).unwrap();
        let m2 = spatial_median(&xq, 1e-12, 1000).unwrap();
        assert!((&q * &m1 - &m2).norm() < 1e-6);

        let e1 = sign_covariance(&x).unwrap();
        let e2 = sign_covariance(&xq).unwrap();
        let (v1, _) = crate::linalg::sym_eigen_desc(&e1.scatter);
        let (v2, _) = crate::linalg::sym_eigen_desc(&e2.scatter);
        assert!((v1 - v2).amax() < 1e-6);
    }

    #[test]
    fn mahalanobis_affine_invariance() {
        let x = gaussian(30, 2, 61);
        let est = classical(&x);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]);
        let xt = &x * a.transpose();
        let est_t = CovarianceEstimate {
            location: &a * &est.location,
            scatter: &a * &est.scatter * a.transpose(),
            distances: DVector::zeros(30),
            case_weights: est.case_weights.clone(),
            method: CovMethod::Classical,
        };
        let d1 = mahalanobis(&x, &est).unwrap();
        let d2 = mahalanobis(&xt, &est_t).unwrap();
        assert!((d1 - d2).amax() < 1e-8);
    }
}
