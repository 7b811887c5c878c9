//! Small shared numeric helpers.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Median of a slice (average of the two central order statistics for even n).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Chi-square quantile.
pub fn chi2_quantile(dof: usize, level: f64) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(level)
}

/// Solve A x = b for square A, failing on (near-)singular systems.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().full_piv_lu();
    let det_ok = lu
        .u()
        .diagonal()
        .iter()
        .all(|d| d.abs() > 1e-12 * a.amax().max(1e-300));
    if !det_ok {
        return Err(Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())));
    }
    lu.solve(b)
        .ok_or_else(|| Error::Singular("LU solve failed".into()))
}

/// Solve the weighted least squares problem min Σ w_i (y_i - x_iᵀβ)².
pub fn weighted_ls(x: &DMatrix<f64>, y: &DVector<f64>, w: &[f64]) -> Result<DVector<f64>> {
    let p = x.ncols();
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwy = DVector::zeros(p);
    for i in 0..x.nrows() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let row = x.row(i);
        for a in 0..p {
            xtwy[a] += wi * row[a] * y[i];
            for b in a..p {
                xtwx[(a, b)] += wi * row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }
    solve(&xtwx, &xtwy)
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
/// Returns (eigenvalues, eigenvectors-as-columns).
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(p, p);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Sample covariance matrix (divisor n-1) about the given center.
pub fn covariance_about(x: &DMatrix<f64>, center: &DVector<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let mut c = DMatrix::zeros(p, p);
    for i in 0..n {
        let d = x.row(i).transpose() - center;
        c.syger(1.0, &d, &d, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    for a in 0..p {
        for b in 0..a {
            c[(b, a)] = c[(a, b)];
        }
    }
    c / (n as f64 - 1.0).max(1.0)
}

/// Column means as a vector.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    x.row_mean().transpose()
}

/// Column medians as a vector.
pub fn column_medians(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        x.ncols(),
        (0..x.ncols()).map(|j| median(x.column(j).as_slice())),
    )
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal bases.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = a.transpose() * b;
    let svd = m.svd(false, false);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .clamp(-1.0, 1.0);
    smin.acos()
}

/// Angle in degrees between two vectors, sign-invariant.
#[cfg(test)]
pub fn angle_deg(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().clamp(0.0, 1.0);
    c.acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn solve_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0]);
        assert!(solve(&a, &b).is_err());
    }

    #[test]
    fn eigen_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert!((vals[0] - 4.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!(vecs.column(0)[1].abs() > 0.99);
    }

    #[test]
    fn covariance_matches_direct() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 2.0, 2.0, 1.0]);
        let c = covariance_about(&x, &column_means(&x));
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((c[(0, 1)] - c[(1, 0)]).abs() < 1e-15);
    }
}
