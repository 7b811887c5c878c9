//! Seeded scenario generators used by the diagnostics, the batch tool and
//! the test suite: contaminated clouds, masking/swamping regressions,
//! mislabeled groups, and a spectra-like calibration set with leverage
//! outliers.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// One generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
    pub labels: Option<Vec<usize>>,
    /// Rows drawn from the contaminating process.
    pub outliers: Vec<usize>,
    /// Generating coefficients where a regression truth exists
    /// (intercept first).
    pub beta: Option<DVector<f64>>,
}

fn standard_rows(n: usize, p: usize, r: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(r))
}

/// Rows from N(mean, cov).
fn mvn_rows(
    n: usize,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    r: &mut impl Rng,
) -> Result<DMatrix<f64>> {
    let l = Cholesky::new(cov.clone())
        .ok_or_else(|| Error::invalid("covariance is not positive definite"))?
        .l();
    let z = standard_rows(n, mean.len(), r);
    let mut x = z * l.transpose();
    for i in 0..n {
        for j in 0..mean.len() {
            x[(i, j)] += mean[j];
        }
    }
    Ok(x)
}

fn cov2(v1: f64, v2: f64, c: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[v1, c, c, v2])
}

/// Correlated bivariate cloud with three outliers of which only one shows
/// up in either marginal: two sit inside both marginal ranges but off the
/// correlation structure, one is marginally extreme.
pub fn bivariate_hidden_outliers(n: usize, seed: u64) -> Result<Scenario> {
    let mut r = rng::stream(seed, 0);
    let cov = cov2(1.0, 1.0, 0.85);
    let mut x = mvn_rows(n, &DVector::zeros(2), &cov, &mut r)?;
    let positions = [[2.0, -2.0], [-2.0, 2.0], [0.0, 6.0]];
    let outliers: Vec<usize> = (0..3).collect();
    for (i, pos) in positions.iter().enumerate() {
        x[(i, 0)] = pos[0];
        x[(i, 1)] = pos[1];
    }
    Ok(Scenario {
        x,
        y: None,
        labels: None,
        outliers,
        beta: None,
    })
}

/// Trivariate cloud with a 10% outlier cluster. In the masked variant the
/// cluster sits where the leading classical components hide it; otherwise
/// it is far out along the main variance direction.
pub fn trivariate_pca_cluster(n: usize, masked: bool, seed: u64) -> Result<Scenario> {
    let mut r = rng::stream(seed, 1);
    let scales = [3.0, 1.5, 0.5];
    let mut x = standard_rows(n, 3, &mut r);
    for i in 0..n {
        for j in 0..3 {
            x[(i, j)] *= scales[j];
        }
    }
    let n_out = n / 10;
    let center = if masked {
        // Inside the marginal ranges of the big directions but far out in
        // the smallest one, so the cluster attracts the leading classical
        // component without standing out in the wide coordinates.
        [2.0, -1.5, 10.0]
    } else {
        [12.0, 0.0, 0.0]
    };
    for i in 0..n_out {
        for j in 0..3 {
            let z: f64 = StandardNormal.sample(&mut r);
            x[(i, j)] = center[j] + 0.2 * z;
        }
    }
    Ok(Scenario {
        x,
        y: None,
        labels: None,
        outliers: (0..n_out).collect(),
        beta: None,
    })
}

/// Simple linear regression with a compact cloud of bad-leverage outliers
/// that attracts the least-squares line.
pub fn swamping_regression(n: usize, seed: u64) -> Result<Scenario> {
    let mut r = rng::stream(seed, 2);
    let beta = DVector::from_column_slice(&[2.0, 1.0]);
    let mut x = DMatrix::zeros(n, 1);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let z: f64 = StandardNormal.sample(&mut r);
        let xi = 5.0 + 2.0 * z;
        let e: f64 = StandardNormal.sample(&mut r);
        x[(i, 0)] = xi;
        y[i] = beta[0] + beta[1] * xi + 0.5 * e;
    }
    let n_out = n / 10;
    for i in 0..n_out {
        let a: f64 = StandardNormal.sample(&mut r);
        let b: f64 = StandardNormal.sample(&mut r);
        x[(i, 0)] = 12.0 + 0.3 * a;
        y[i] = 2.0 + 0.3 * b;
    }
    Ok(Scenario {
        x,
        y: Some(y),
        labels: None,
        outliers: (0..n_out).collect(),
        beta: Some(beta),
    })
}

/// Clean regression sample used by the influence and bias protocols; the
/// first row is the designated point to vary.
pub fn influence_regression(n: usize, seed: u64) -> Result<Scenario> {
    let mut r = rng::stream(seed, 3);
    let beta = DVector::from_column_slice(&[0.0, 1.0]);
    let mut x = DMatrix::zeros(n, 1);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let xi: f64 = StandardNormal.sample(&mut r);
        let e: f64 = StandardNormal.sample(&mut r);
        x[(i, 0)] = xi;
        y[i] = beta[0] + beta[1] * xi + 0.5 * e;
    }
    Ok(Scenario {
        x,
        y: Some(y),
        labels: None,
        outliers: Vec::new(),
        beta: Some(beta),
    })
}

/// Two overlapping bivariate groups with unequal covariances; 10% of the
/// first group's rows are a compact cluster beyond the second group
/// (mislabeled training cases that inflate the first group's covariance).
pub fn mislabeled_groups(n_per: usize, seed: u64) -> Result<Scenario> {
    let mut r = rng::stream(seed, 4);
    let m1 = DVector::from_column_slice(&[0.0, 0.0]);
    let s1 = cov2(1.0, 1.0, 0.5);
    let m2 = DVector::from_column_slice(&[3.0, 3.0]);
    let s2 = cov2(2.0, 1.5, -0.6);
    let m_bad = DVector::from_column_slice(&[7.0, 7.0]);
    let s_bad = cov2(0.25, 0.25, 0.0);
    let n_bad = n_per / 10;
    let g1_clean = mvn_rows(n_per - n_bad, &m1, &s1, &mut r)?;
    let g1_bad = mvn_rows(n_bad, &m_bad, &s_bad, &mut r)?;
    let g2 = mvn_rows(n_per, &m2, &s2, &mut r)?;
    let mut x = DMatrix::zeros(2 * n_per, 2);
    x.rows_mut(0, n_per - n_bad).copy_from(&g1_clean);
    x.rows_mut(n_per - n_bad, n_bad).copy_from(&g1_bad);
    x.rows_mut(n_per, n_per).copy_from(&g2);
    let labels = (0..2 * n_per).map(|i| usize::from(i >= n_per)).collect();
    Ok(Scenario {
        x,
        y: None,
        labels: Some(labels),
        outliers: ((n_per - n_bad)..n_per).collect(),
        beta: None,
    })
}

/// Correlated bivariate majority with a fraction from a compact
/// anti-correlated cluster that hides in both marginals.
pub fn correlated_with_cluster(n: usize, fraction: f64, seed: u64) -> Result<Scenario> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid("fraction must lie in [0, 1)"));
    }
    let mut r = rng::stream(seed, 5);
    let cov = cov2(1.0, 1.0, 0.85);
    let mut x = mvn_rows(n, &DVector::zeros(2), &cov, &mut r)?;
    let n_out = (fraction * n as f64).ceil() as usize;
    let out_mean = DVector::from_column_slice(&[1.5, -1.5]);
    let out_cov = cov2(0.1, 0.1, 0.0);
    let cluster = mvn_rows(n_out, &out_mean, &out_cov, &mut r)?;
    x.rows_mut(0, n_out).copy_from(&cluster);
    Ok(Scenario {
        x,
        y: None,
        labels: None,
        outliers: (0..n_out).collect(),
        beta: None,
    })
}

/// Spectra-like calibration data: a low-rank smooth design driving the
/// response, with a block of leverage rows measured under a different
/// response-irrelevant regime. Returns training and test scenarios.
pub fn spectra_calibration(
    n_train: usize,
    n_test: usize,
    n_out: usize,
    seed: u64,
) -> Result<(Scenario, Scenario)> {
    let p = 50;
    let rank = 3;
    if n_out >= n_train {
        return Err(Error::invalid("leverage block must be a strict subset"));
    }
    let mut r = rng::stream(seed, 6);
    // Smooth loading curves.
    let loadings = DMatrix::from_fn(p, rank, |j, c| {
        let t = j as f64 / (p - 1) as f64;
        ((c as f64 + 1.0) * std::f64::consts::PI * t).sin()
    });
    let gamma = DVector::from_column_slice(&[2.0, -1.0, 0.5]);
    let make = |n: usize, r: &mut rand_chacha::ChaCha8Rng| {
        let t = standard_rows(n, rank, r);
        let mut x = &t * loadings.transpose();
        for v in x.iter_mut() {
            let z: f64 = StandardNormal.sample(r);
            *v += 0.05 * z;
        }
        let y = DVector::from_fn(n, |i, _| {
            let z: f64 = StandardNormal.sample(r);
            t.row(i).transpose().dot(&gamma) + 0.1 * z
        });
        (x, y)
    };
    let (mut x_train, y_train) = make(n_train, &mut r);
    let (x_test, y_test) = make(n_test, &mut r);
    // Leverage block: a different detector regime adds a strong baseline
    // and gain shift; the responses stay on the clean model.
    for i in 0..n_out {
        for j in 0..p {
            x_train[(i, j)] = 1.6 * x_train[(i, j)] + 3.0;
        }
    }
    let train = Scenario {
        x: x_train,
        y: Some(y_train),
        labels: None,
        outliers: (0..n_out).collect(),
        beta: None,
    };
    let test = Scenario {
        x: x_test,
        y: Some(y_test),
        labels: None,
        outliers: Vec::new(),
        beta: None,
    };
    Ok((train, test))
}

/// Two separated groups in moderate dimension with 10% of the first
/// group's labels attached to rows generated from the second group.
pub fn wide_mislabeled_groups(n_per: usize, p: usize, seed: u64) -> Result<Scenario> {
    let mut r = rng::stream(seed, 7);
    let mut x = standard_rows(2 * n_per, p, &mut r);
    for i in n_per..2 * n_per {
        x[(i, 0)] += 5.0;
        if p > 1 {
            x[(i, 1)] -= 3.0;
        }
    }
    let n_bad = n_per / 10;
    // Rows labeled group 0 but generated like group 1.
    for i in 0..n_bad {
        x[(i, 0)] += 5.0;
        if p > 1 {
            x[(i, 1)] -= 3.0;
        }
    }
    let labels = (0..2 * n_per).map(|i| usize::from(i >= n_per)).collect();
    Ok(Scenario {
        x,
        y: None,
        labels: Some(labels),
        outliers: (0..n_bad).collect(),
        beta: None,
    })
}

/// Named dispatch with default sizes, for batch use.
pub fn simulate_scenario(name: &str, seed: u64) -> Result<Scenario> {
    match name {
        "bivariate-outliers" => bivariate_hidden_outliers(100, seed),
        "pca-cluster" => trivariate_pca_cluster(100, false, seed),
        "pca-cluster-masked" => trivariate_pca_cluster(100, true, seed),
        "swamping" => swamping_regression(100, seed),
        "influence" => influence_regression(100, seed),
        "mislabeled-groups" => mislabeled_groups(100, seed),
        "correlated-cluster" => correlated_with_cluster(100, 0.2, seed),
        "spectra" => Ok(spectra_calibration(100, 60, 25, seed)?.0),
        "wide-mislabeled" => wide_mislabeled_groups(40, 10, seed),
        other => Err(Error::invalid(format!("unknown scenario '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contaminated_row_counts() {
        let s = correlated_with_cluster(100, 0.2, 1).unwrap();
        assert_eq!(s.outliers.len(), 20);
        let m = mislabeled_groups(100, 2).unwrap();
        assert_eq!(m.outliers.len(), 10);
        for &i in &m.outliers {
            assert_eq!(m.labels.as_ref().unwrap()[i], 0);
        }
    }

    #[test]
    fn same_seed_reproduces_identical_data() {
        for name in [
            "bivariate-outliers",
            "pca-cluster",
            "pca-cluster-masked",
            "swamping",
            "influence",
            "mislabeled-groups",
            "correlated-cluster",
            "spectra",
            "wide-mislabeled",
        ] {
            let a = simulate_scenario(name, 42).unwrap();
            let b = simulate_scenario(name, 42).unwrap();
            assert_eq!(a.x, b.x, "{name}");
            assert_eq!(a.y, b.y, "{name}");
            assert_eq!(a.labels, b.labels, "{name}");
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(simulate_scenario("no-such-scenario", 0).is_err());
    }

    #[test]
    fn hidden_outliers_stay_inside_marginal_ranges() {
        let s = bivariate_hidden_outliers(200, 3).unwrap();
        for j in 0..2 {
            let clean: Vec<f64> = (3..200).map(|i| s.x[(i, j)]).collect();
            let lo = clean.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = clean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            // The two structural outliers are marginally unremarkable.
            for &i in &s.outliers[..2] {
                assert!(s.x[(i, j)] > lo && s.x[(i, j)] < hi);
            }
        }
    }
}
