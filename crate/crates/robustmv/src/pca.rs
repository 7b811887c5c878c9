//! Principal component analysis: classical baseline plus robust variants
//! (spherical components, iteratively reweighted covariance, projection
//! pursuit over a robust dispersion).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{column_means, covariance_about, principal_angle, sym_eigen_desc};
use crate::loccov::{spatial_median, spatial_signs};
use crate::ppgrid::{self, GridConfig, ProjectionIndex};
use crate::scale::{m_scale, mad, RhoFamily};

#[derive(Debug, Clone, PartialEq)]
pub enum PcaMethod {
    Classical,
    Spherical,
    Maronna { family: RhoFamily, delta: f64, iterations: usize },
    ProjectionPursuit,
}

/// A fitted q-component model: center, orthonormal loadings, and robust
/// score dispersions in data units squared.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub center: DVector<f64>,
    /// p x q, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// Nonincreasing, nonnegative.
    pub eigenvalues: DVector<f64>,
    pub method: PcaMethod,
}

impl PcaModel {
    /// Scores of rows: (X - center) B.
    pub fn scores(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = x.clone();
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                centered[(i, j)] -= self.center[j];
            }
        }
        centered * &self.loadings
    }
}

fn check(x: &DMatrix<f64>, q: usize, limit: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entries"));
    }
    if q == 0 || q > limit {
        return Err(Error::invalid(format!("q={q} out of range 1..={limit}")));
    }
    Ok(())
}

/// Classical PCA from the sample covariance about the mean.
pub fn classical_pca(x: &DMatrix<f64>, q: usize) -> Result<PcaModel> {
    let (n, p) = (x.nrows(), x.ncols());
    check(x, q, p.min(n.saturating_sub(1)))?;
    let center = column_means(x);
    let cov = covariance_about(x, &center);
    let (vals, vecs) = sym_eigen_desc(&cov);
    Ok(PcaModel {
        center,
        loadings: vecs.columns(0, q).into_owned(),
        eigenvalues: DVector::from_iterator(q, vals.iter().take(q).map(|v| v.max(0.0))),
        method: PcaMethod::Classical,
    })
}

/// Fraction of total dispersion beyond the first q eigenvalues.
pub fn unexplained_variance(eigenvalues: &[f64], q: usize) -> Result<f64> {
    if eigenvalues.is_empty() || eigenvalues.iter().any(|v| *v < 0.0) {
        return Err(Error::invalid("eigenvalues must be nonnegative"));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total == 0.0 {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    let tail: f64 = eigenvalues.iter().skip(q).sum();
    Ok(tail / total)
}

/// Project a point onto the model subspace; returns the reconstruction and
/// its orthogonal distance.
pub fn reconstruct(model: &PcaModel, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if x.len() != model.center.len() {
        return Err(Error::DimensionMismatch("point length != p".into()));
    }
    let centered = x - &model.center;
    let xhat = &model.loadings * (model.loadings.transpose() * &centered) + &model.center;
    let dist = (x - &xhat).norm();
    Ok((xhat, dist))
}

/// Spherical principal components: eigenvectors of the spatial-sign
/// cross-product matrix about the spatial median, with eigenvalues replaced
/// by squared consistent MADs of the data projections and re-sorted.
pub fn spherical_pca(x: &DMatrix<f64>, q: usize) -> Result<PcaModel> {
    let p = x.ncols();
    check(x, q, p)?;
    if x.nrows() < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    let center = spatial_median(x, 1e-10, 500)?;
    let signs = spatial_signs(x, &center)?;
    if signs.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("all spatial signs are zero".into()));
    }
    let cross = signs.transpose() * &signs;
    let (_, vecs) = sym_eigen_desc(&cross);
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..p)
        .map(|j| {
            let b = DVector::from_column_slice(vecs.column(j).as_slice());
            let proj = x * &b;
            let s = mad(proj.as_slice(), true).map(|e| e.value).unwrap_or(0.0);
            (s * s, b)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut loadings = DMatrix::zeros(p, q);
    let mut eigenvalues = DVector::zeros(q);
    for j in 0..q {
        loadings.set_column(j, &pairs[j].1);
        eigenvalues[j] = pairs[j].0;
    }
    Ok(PcaModel {
        center,
        loadings,
        eigenvalues,
        method: PcaMethod::Spherical,
    })
}

const MARONNA_MAX_ITER: usize = 100;
const MARONNA_TOL: f64 = 1e-6;

/// Iteratively reweighted PCA: weights from an M-scale of the squared
/// reconstruction distances, applied to the mean and covariance, until the
/// q-subspace stabilizes. Starts from the spherical components.
pub fn maronna_pca(
    x: &DMatrix<f64>,
    q: usize,
    family: RhoFamily,
    delta: f64,
) -> Result<PcaModel> {
    let (n, p) = (x.nrows(), x.ncols());
    check(x, q, p.min(n.saturating_sub(1)))?;
    let start = spherical_pca(x, q)?;
    let mut center = start.center.clone();
    let mut loadings = start.loadings.clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        // Squared reconstruction distances of every case.
        let mut r2 = vec![0.0; n];
        for i in 0..n {
            let xi = x.row(i).transpose();
            let c = &xi - &center;
            let t = loadings.transpose() * &c;
            r2[i] = (c.norm_squared() - t.norm_squared()).max(0.0);
        }
        let zero_floor = (1e-10 * x.amax().max(1.0)).powi(2);
        if r2.iter().all(|v| *v < zero_floor) {
            // Data already lie in the subspace.
            let eigenvalues = score_mads(x, &center, &loadings);
            return Ok(PcaModel {
                center,
                loadings,
                eigenvalues,
                method: PcaMethod::Maronna { family, delta, iterations },
            });
        }
        let sigma = m_scale(&r2, family, delta)?;
        let w: Vec<f64> = if sigma.value > 0.0 {
            r2.iter().map(|&r| family.weight_sigma(r / sigma.value)).collect()
        } else {
            vec![1.0; n]
        };
        let wsum: f64 = w.iter().sum();
        if wsum <= 0.0 {
            return Err(Error::Degenerate("all case weights are zero".into()));
        }
        let mut mu = DVector::zeros(p);
        for i in 0..n {
            mu += w[i] * x.row(i).transpose();
        }
        mu /= wsum;
        let mut cov = DMatrix::zeros(p, p);
        for i in 0..n {
            let d = x.row(i).transpose() - &mu;
            cov.syger(w[i], &d, &d, 1.0);
        }
        for a in 0..p {
            for b in 0..a {
                cov[(b, a)] = cov[(a, b)];
            }
        }
        cov /= wsum;
        let (vals, vecs) = sym_eigen_desc(&cov);
        let next = vecs.columns(0, q).into_owned();
        let angle = principal_angle(&loadings, &next);
        center = mu;
        let done = angle < MARONNA_TOL;
        loadings = next;
        if done {
            return Ok(PcaModel {
                center,
                loadings,
                eigenvalues: DVector::from_iterator(q, vals.iter().take(q).map(|v| v.max(0.0))),
                method: PcaMethod::Maronna { family, delta, iterations },
            });
        }
        if iterations >= MARONNA_MAX_ITER {
            return Err(Error::Convergence {
                iterations,
                last_change: angle,
            });
        }
    }
}

fn score_mads(x: &DMatrix<f64>, center: &DVector<f64>, loadings: &DMatrix<f64>) -> DVector<f64> {
    let q = loadings.ncols();
    DVector::from_iterator(
        q,
        (0..q).map(|j| {
            let b = loadings.column(j).clone_owned();
            let proj: Vec<f64> = (0..x.nrows())
                .map(|i| (x.row(i).transpose() - center).dot(&b))
                .collect();
            let s = mad(&proj, true).map(|e| e.value).unwrap_or(0.0);
            s * s
        }),
    )
}

/// Projection pursuit PCA: successive grid-search directions with deflation,
/// centered at the spatial median. Eigenvalues are squared consistent MADs
/// of the scores.
pub fn pp_pca(x: &DMatrix<f64>, q: usize, index: &ProjectionIndex) -> Result<PcaModel> {
    let p = x.ncols();
    check(x, q, p)?;
    let center = spatial_median(x, 1e-10, 500)?;
    let mut centered = x.clone();
    for i in 0..x.nrows() {
        for j in 0..p {
            centered[(i, j)] -= center[j];
        }
    }
    let cfg = GridConfig::default();
    let mut loadings = DMatrix::zeros(p, q);
    let mut work = centered;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..q {
        let res = ppgrid::grid_search(&work, index, &cfg)?;
        // Re-orthogonalize against earlier components for numerical safety.
        let mut a = res.direction.clone();
        for b in &basis {
            let c = a.dot(b);
            a -= c * b;
        }
        let norm = a.norm();
        if norm < 1e-12 {
            return Err(Error::Degenerate(
                "projection pursuit direction collapsed after deflation".into(),
            ));
        }
        a /= norm;
        loadings.set_column(j, &a);
        if j + 1 < q {
            work = ppgrid::deflate(&work, &a)?;
        }
        basis.push(a);
    }
    let eigenvalues_raw = score_mads(x, &center, &loadings);
    // Components come out in search order; enforce the nonincreasing law.
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eigenvalues_raw[b].partial_cmp(&eigenvalues_raw[a]).unwrap());
    let mut sorted_loadings = DMatrix::zeros(p, q);
    let mut eigenvalues = DVector::zeros(q);
    for (k, &j) in order.iter().enumerate() {
        sorted_loadings.set_column(k, &loadings.column(j));
        eigenvalues[k] = eigenvalues_raw[j];
    }
    Ok(PcaModel {
        center,
        loadings: sorted_loadings,
        eigenvalues,
        method: PcaMethod::ProjectionPursuit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppgrid::{mad_index, variance_index};
    use crate::rng;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn scaled_gaussian(n: usize, scales: &[f64], seed: u64) -> DMatrix<f64> {
        let mut r = rng::stream(seed, 0);
        DMatrix::from_fn(n, scales.len(), |_, j| {
            let z: f64 = StandardNormal.sample(&mut r);
            scales[j] * z
        })
    }

    #[test]
    fn classical_recovers_dominant_axis() {
        let x = scaled_gaussian(3000, &[2.0, 1.0], 1);
        let m = classical_pca(&x, 2).unwrap();
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        let b1 = m.loadings.column(0).clone_owned();
        assert!(crate::linalg::angle_deg(&b1, &e1) < 5.0);
        assert!(m.eigenvalues[0] >= m.eigenvalues[1]);
    }

    #[test]
    fn classical_orthonormal_and_uncorrelated_scores() {
        let x = scaled_gaussian(100, &[2.0, 1.0, 0.5], 5);
        let m = classical_pca(&x, 3).unwrap();
        let g = m.loadings.transpose() * &m.loadings;
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-10);
        let t = m.scores(&x);
        let c = covariance_about(&t, &column_means(&t));
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert!(c[(a, b)].abs() < 1e-8 * c[(a, a)].max(c[(b, b)]));
                }
            }
        }
    }

    #[test]
    fn classical_full_rank_reconstruction() {
        let x = scaled_gaussian(40, &[1.0, 1.0, 1.0], 9);
        let m = classical_pca(&x, 3).unwrap();
        for i in 0..5 {
            let xi = x.row(i).transpose();
            let (xhat, d) = reconstruct(&m, &xi).unwrap();
            assert!((xi - xhat).amax() < 1e-10);
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn classical_rejects_large_q() {
        let x = scaled_gaussian(5, &[1.0, 1.0, 1.0], 2);
        assert!(classical_pca(&x, 5).is_err());
    }

    #[test]
    fn unexplained_variance_values() {
        assert_relative_eq!(
            unexplained_variance(&[4.0, 3.0, 2.0, 1.0], 2).unwrap(),
            0.3,
            epsilon = 1e-12
        );
        assert_eq!(unexplained_variance(&[4.0, 1.0], 2).unwrap(), 0.0);
        assert_eq!(unexplained_variance(&[4.0, 1.0], 0).unwrap(), 1.0);
        assert!(unexplained_variance(&[0.0, 0.0], 1).is_err());
    }

    #[test]
    fn reconstruct_projects_onto_subspace() {
        let center = DVector::from_column_slice(&[1.0, 2.0]);
        let model = PcaModel {
            center: center.clone(),
            loadings: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            eigenvalues: DVector::from_element(1, 1.0),
            method: PcaMethod::Classical,
        };
        let x = DVector::from_column_slice(&[3.0, 5.0]);
        let (xhat, d) = reconstruct(&model, &x).unwrap();
        assert_relative_eq!(xhat[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(xhat[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(d, 3.0, epsilon = 1e-12);
        let (at_center, d0) = reconstruct(&model, &center).unwrap();
        assert!((at_center - &center).amax() < 1e-12);
        assert_eq!(d0, 0.0);
    }

    #[test]
    fn score_distance_decomposition() {
        let x = scaled_gaussian(30, &[2.0, 1.0, 0.5], 3);
        let m = classical_pca(&x, 2).unwrap();
        for i in 0..10 {
            let xi = x.row(i).transpose();
            let (_, od) = reconstruct(&m, &xi).unwrap();
            let c = &xi - &m.center;
            let sd2 = (m.loadings.transpose() * &c).norm_squared();
            assert_relative_eq!(c.norm_squared(), sd2 + od * od, epsilon = 1e-10);
        }
    }

    #[test]
    fn spherical_elliptical_eigenstructure() {
        let x = scaled_gaussian(5000, &[3.0, 1.0], 7);
        let m = spherical_pca(&x, 2).unwrap();
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        let b1 = m.loadings.column(0).clone_owned();
        assert!(crate::linalg::angle_deg(&b1, &e1) < 5.0);
        let ratio = m.eigenvalues[0] / m.eigenvalues[1];
        assert!(ratio > 6.0 && ratio < 13.0, "ratio {ratio}");
    }

    #[test]
    fn spherical_spherical_data_flat_spectrum() {
        let x = scaled_gaussian(4000, &[1.0, 1.0, 1.0], 13);
        let m = spherical_pca(&x, 3).unwrap();
        for j in 1..3 {
            assert!((m.eigenvalues[j] / m.eigenvalues[0] - 1.0).abs() < 0.2);
        }
    }

    /// Clean 2-D cloud with a 10% distant cluster.
    fn outlier_cluster_data(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut clean = scaled_gaussian(n, &[3.0, 1.0], seed);
        let contaminated = {
            let mut xc = clean.clone();
            let k = n / 10;
            for i in 0..k {
                xc[(i, 0)] = 6.0 + 0.1 * (i as f64 % 5.0);
                xc[(i, 1)] = 20.0 + 0.1 * (i as f64 % 7.0);
            }
            xc
        };
        clean = clean.remove_rows(0, n / 10);
        (clean, contaminated)
    }

    #[test]
    fn spherical_resists_outlier_cluster() {
        let (clean, contaminated) = outlier_cluster_data(500, 17);
        let clean_dir = classical_pca(&clean, 1).unwrap().loadings.column(0).clone_owned();
        let spc_dir = spherical_pca(&contaminated, 1)
            .unwrap()
            .loadings
            .column(0)
            .clone_owned();
        let classical_dir = classical_pca(&contaminated, 1)
            .unwrap()
            .loadings
            .column(0)
            .clone_owned();
        assert!(crate::linalg::angle_deg(&spc_dir, &clean_dir) < 10.0);
        assert!(crate::linalg::angle_deg(&classical_dir, &clean_dir) > 30.0);
    }

    #[test]
    fn maronna_exact_subspace_converges_immediately() {
        // Points in the plane spanned by e1, e2 inside 3-space.
        let mut x = scaled_gaussian(50, &[2.0, 1.0, 0.0], 19);
        for i in 0..50 {
            x[(i, 2)] = 0.0;
        }
        let m = maronna_pca(&x, 2, RhoFamily::bisquare(1.0), 0.5).unwrap();
        let e3 = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        let b = m.loadings.transpose() * e3;
        assert!(b.amax() < 1e-8);
    }

    #[test]
    fn maronna_close_to_classical_on_clean_data() {
        let x = scaled_gaussian(2000, &[3.0, 2.0, 1.0, 0.7, 0.5], 23);
        let mc = classical_pca(&x, 2).unwrap();
        let mm = maronna_pca(&x, 2, RhoFamily::bisquare(1.0), 0.5).unwrap();
        let angle = principal_angle(&mc.loadings, &mm.loadings).to_degrees();
        assert!(angle < 2.0, "angle {angle}");
    }

    #[test]
    fn maronna_resists_outlier_cluster() {
        let (clean, contaminated) = outlier_cluster_data(500, 29);
        let clean_model = classical_pca(&clean, 1).unwrap();
        let m = maronna_pca(&contaminated, 1, RhoFamily::bisquare(1.0), 0.5).unwrap();
        let angle = principal_angle(&clean_model.loadings, &m.loadings).to_degrees();
        assert!(angle < 10.0, "angle {angle}");
    }

    #[test]
    fn pp_pca_variance_matches_classical() {
        let x = scaled_gaussian(800, &[2.0, 1.2, 0.7, 0.4], 31);
        let idx = ProjectionIndex {
            f: &|v: &[f64]| variance_index(v),
            scale_monotone: false,
        };
        let pp = pp_pca(&x, 2, &idx).unwrap();
        let cl = classical_pca(&x, 2).unwrap();
        for j in 0..2 {
            let a = pp.loadings.column(j).clone_owned();
            let b = cl.loadings.column(j).clone_owned();
            assert!(crate::linalg::angle_deg(&a, &b) < 1.0);
        }
    }

    #[test]
    fn pp_pca_univariate() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 10.0]);
        let idx = ProjectionIndex::scale(&|v: &[f64]| mad_index(v));
        let m = pp_pca(&x, 1, &idx).unwrap();
        assert_eq!(m.loadings[(0, 0)], 1.0);
    }

    #[test]
    fn pp_pca_mad_ignores_outlier_cluster() {
        let (clean, contaminated) = outlier_cluster_data(500, 37);
        let clean_dir = classical_pca(&clean, 1).unwrap().loadings.column(0).clone_owned();
        let idx = ProjectionIndex::scale(&|v: &[f64]| mad_index(v));
        let m = pp_pca(&contaminated, 1, &idx).unwrap();
        let dir = m.loadings.column(0).clone_owned();
        assert!(crate::linalg::angle_deg(&dir, &clean_dir) < 10.0);
    }

    #[test]
    fn orthogonal_equivariance_deterministic_variants() {
        let x = scaled_gaussian(300, &[2.0, 1.0, 0.5], 41);
        let th: f64 = 0.9;
        let q = DMatrix::from_row_slice(
            3,
            3,
            &[th.cos(), -th.sin(), 0.0, th.sin(), th.cos(), 0.0, 0.0, 0.0, 1.0],
        );
        let xq = &x * q.transpose();
        let m1 = classical_pca(&x, 2).unwrap();
        let m2 = classical_pca(&xq, 2).unwrap();
        let rotated = &q * &m1.loadings;
        assert!(principal_angle(&rotated, &m2.loadings) < 1e-4);

        let s1 = spherical_pca(&x, 2).unwrap();
        let s2 = spherical_pca(&xq, 2).unwrap();
        let rotated = &q * &s1.loadings;
        assert!(principal_angle(&rotated, &s2.loadings) < 1e-3);
    }
}
