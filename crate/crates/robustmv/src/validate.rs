//! Resampling and stress diagnostics: case-resampling bootstrap with
//! robust spread summaries, Monte Carlo cross-validation with trimmed
//! prediction error, empirical influence curves, empirical maximum-bias
//! curves, and breakdown scans.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::median;
use crate::rng;

/// Default number of bootstrap replicates.
pub const DEFAULT_BOOTSTRAP_M: usize = 2000;
/// Default number of random cross-validation splits.
pub const DEFAULT_CV_SPLITS: usize = 100;
/// Default held-out fraction per split.
pub const DEFAULT_CV_TEST_FRACTION: f64 = 0.25;
/// Default trimming fraction for cross-validated prediction error.
pub const DEFAULT_CV_TRIM: f64 = 0.15;

/// How the per-coordinate spread of resampled estimates is summarized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpreadKind {
    /// Classical standard deviation.
    Sd,
    /// Standard deviation after symmetrically trimming this fraction from
    /// each tail.
    Trimmed(f64),
    /// Half-width of the central percentile interval.
    Percentile,
}

/// Bootstrap output: the replicate estimates, per-coordinate spread, and
/// a central percentile interval.
#[derive(Debug, Clone)]
pub struct ResamplingReport {
    /// Successful replicate estimates, one row per replicate.
    pub estimates: DMatrix<f64>,
    pub spread: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Two-sided miss probability of the percentile interval.
    pub alpha: f64,
    /// Requested number of replicates.
    pub m: usize,
    pub failures: usize,
    pub seed: u64,
}

fn sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Standard deviation of the central part of the sample after dropping
/// the `alpha_t` fraction from each tail. No consistency correction is
/// applied, so under normal data the value shrinks as `alpha_t` grows.
pub fn trimmed_spread(values: &[f64], alpha_t: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("trimmed spread needs at least one value"));
    }
    if !(0.0..0.5).contains(&alpha_t) {
        return Err(Error::invalid("trim fraction must lie in [0, 0.5)"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let drop = (alpha_t * values.len() as f64).floor() as usize;
    let kept = &sorted[drop..values.len() - drop];
    Ok(sd(kept))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Case-resampling bootstrap. The fit closure receives the resampled row
/// indices (drawn with replacement) and returns the estimate; failures
/// are counted, and more than half failing is an error. The resample
/// index matrix depends only on `(seed, m)`, so results are identical
/// under any parallel schedule.
pub fn bootstrap<F>(
    fit: F,
    n: usize,
    m: usize,
    alpha: f64,
    spread_kind: SpreadKind,
    seed: u64,
) -> Result<ResamplingReport>
where
    F: Fn(&[usize]) -> Result<DVector<f64>> + Sync,
{
    if n == 0 || m == 0 {
        return Err(Error::invalid("bootstrap needs data and replicates"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("interval level must lie in [0, 1)"));
    }
    if let SpreadKind::Trimmed(t) = spread_kind {
        if !(0.0..0.5).contains(&t) {
            return Err(Error::invalid("trim fraction must lie in [0, 0.5)"));
        }
    }
    let results: Vec<Option<DVector<f64>>> = (0..m)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::stream(seed, rep as u64);
            let idx: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
            fit(&idx).ok()
        })
        .collect();
    let kept: Vec<&DVector<f64>> = results.iter().flatten().collect();
    let failures = m - kept.len();
    if failures * 2 > m {
        return Err(Error::Degenerate(format!(
            "{failures} of {m} bootstrap replicates failed"
        )));
    }
    let dim = kept[0].len();
    if kept.iter().any(|e| e.len() != dim) {
        return Err(Error::invalid("replicates disagree on dimension"));
    }
    let estimates = DMatrix::from_fn(kept.len(), dim, |i, j| kept[i][j]);
    let mut spread = DVector::zeros(dim);
    let mut lower = DVector::zeros(dim);
    let mut upper = DVector::zeros(dim);
    for j in 0..dim {
        let col: Vec<f64> = estimates.column(j).iter().cloned().collect();
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lower[j] = percentile(&sorted, alpha / 2.0);
        upper[j] = percentile(&sorted, 1.0 - alpha / 2.0);
        spread[j] = match spread_kind {
            SpreadKind::Sd => sd(&col),
            SpreadKind::Trimmed(t) => trimmed_spread(&col, t)?,
            SpreadKind::Percentile => (upper[j] - lower[j]) / 2.0,
        };
    }
    Ok(ResamplingReport {
        estimates,
        spread,
        lower,
        upper,
        alpha,
        m,
        failures,
        seed,
    })
}

/// Square root of the mean of the smallest `ceil((1 - trim) n)` squared
/// residuals.
pub fn trimmed_rmsep(residuals: &[f64], trim: f64) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::invalid("prediction error needs residuals"));
    }
    if !(0.0..1.0).contains(&trim) {
        return Err(Error::invalid("trim fraction must lie in [0, 1)"));
    }
    let mut sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    sq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let keep = (((1.0 - trim) * residuals.len() as f64).ceil() as usize).max(1);
    Ok((sq[..keep].iter().sum::<f64>() / keep as f64).sqrt())
}

/// Cross-validation output: the complexity grid, the trimmed prediction
/// error per complexity with its standard error over splits, and the
/// minimizing grid value.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub grid: Vec<usize>,
    /// Mean trimmed prediction error over the successful splits; NaN when
    /// every split failed at that complexity.
    pub error: Vec<f64>,
    /// Standard error of the per-split trimmed errors.
    pub std_error: Vec<f64>,
    /// Failed splits per grid cell.
    pub failures: Vec<usize>,
    /// Grid value attaining the smallest error (ties go to the smallest
    /// complexity).
    pub chosen: usize,
    pub n_splits: usize,
    pub test_fraction: f64,
    pub trim: f64,
    pub seed: u64,
}

/// Monte Carlo cross-validation over a complexity grid. The closure fits
/// at the given complexity on the training rows and returns test-set
/// residuals; per split the squared residuals are trimmed from the top.
/// A complexity is excluded from the minimum only when every split fails.
pub fn monte_carlo_cv<F>(
    fit_predict: F,
    n: usize,
    grid: &[usize],
    n_splits: usize,
    test_fraction: f64,
    trim: f64,
    seed: u64,
) -> Result<CvReport>
where
    F: Fn(usize, &[usize], &[usize]) -> Result<DVector<f64>> + Sync,
{
    if grid.is_empty() || n_splits == 0 {
        return Err(Error::invalid("cross-validation needs a grid and splits"));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    if !(0.0..1.0).contains(&test_fraction) || n_test >= n {
        return Err(Error::invalid("test fraction must leave training rows"));
    }
    // split_errors[s][g] holds the trimmed error of split s at grid[g].
    let split_errors: Vec<Vec<Option<f64>>> = (0..n_splits)
        .into_par_iter()
        .map(|split| {
            let mut r = rng::stream(seed, split as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut r);
            let (test, train) = idx.split_at(n_test);
            let mut train = train.to_vec();
            let mut test = test.to_vec();
            train.sort_unstable();
            test.sort_unstable();
            grid.iter()
                .map(|&c| {
                    fit_predict(c, &train, &test)
                        .ok()
                        .and_then(|res| trimmed_rmsep(res.as_slice(), trim).ok())
                })
                .collect()
        })
        .collect();
    let mut error = Vec::with_capacity(grid.len());
    let mut std_error = Vec::with_capacity(grid.len());
    let mut failures = Vec::with_capacity(grid.len());
    for g in 0..grid.len() {
        let vals: Vec<f64> = split_errors.iter().filter_map(|s| s[g]).collect();
        failures.push(n_splits - vals.len());
        if vals.is_empty() {
            error.push(f64::NAN);
            std_error.push(f64::NAN);
        } else {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            error.push(mean);
            std_error.push(sd(&vals) / (vals.len() as f64).sqrt());
        }
    }
    let chosen = grid
        .iter()
        .zip(&error)
        .filter(|(_, e)| e.is_finite())
        .min_by(|(ca, ea), (cb, eb)| ea.partial_cmp(eb).unwrap().then(ca.cmp(cb)))
        .map(|(&c, _)| c)
        .ok_or_else(|| Error::Degenerate("every grid cell failed on all splits".into()))?;
    Ok(CvReport {
        grid: grid.to_vec(),
        error,
        std_error,
        failures,
        chosen,
        n_splits,
        test_fraction,
        trim,
        seed,
    })
}

/// Row of `x` closest in Euclidean distance to the coordinatewise median.
pub fn central_row(x: &DMatrix<f64>) -> usize {
    let p = x.ncols();
    let center = DVector::from_fn(p, |j, _| {
        let col: Vec<f64> = x.column(j).iter().cloned().collect();
        median(&col)
    });
    (0..x.nrows())
        .min_by(|&a, &b| {
            let da = (x.row(a).transpose() - &center).norm();
            let db = (x.row(b).transpose() - &center).norm();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap()
}

/// Empirical influence curve: one designated row (by default the one
/// nearest the coordinatewise median) is replaced by each grid point and
/// the statistic's change is scaled by the sample size,
/// `(T(modified) - T(original)) * n`.
pub fn empirical_influence<F>(
    statistic: F,
    x: &DMatrix<f64>,
    index: Option<usize>,
    z_grid: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>>
where
    F: Fn(&DMatrix<f64>) -> Result<DVector<f64>> + Sync,
{
    if x.nrows() == 0 {
        return Err(Error::invalid("influence curve needs data"));
    }
    let index = index.unwrap_or_else(|| central_row(x));
    if index >= x.nrows() {
        return Err(Error::invalid("perturbed row index out of range"));
    }
    let n = x.nrows() as f64;
    let base = statistic(x)?;
    z_grid
        .par_iter()
        .map(|z| {
            if z.len() != x.ncols() {
                return Err(Error::invalid("grid point has the wrong dimension"));
            }
            let mut modified = x.clone();
            modified.row_mut(index).copy_from(&z.transpose());
            let t = statistic(&modified)?;
            if t.len() != base.len() {
                return Err(Error::invalid("statistic changed dimension"));
            }
            Ok((t - &base) * n)
        })
        .collect()
}

/// How replacement rows are generated for the bias protocols.
#[derive(Debug, Clone)]
pub enum Contamination {
    /// Replacement rows at the coordinatewise center shifted by a random
    /// draw from these per-coordinate offset ranges.
    ShiftRange { low: DVector<f64>, high: DVector<f64> },
    /// Every replacement row equals this point.
    PointMass(DVector<f64>),
    /// Replacement rows are existing rows translated by this shift.
    ClusterShift(DVector<f64>),
}

fn contaminated_copy(
    x: &DMatrix<f64>,
    order: &[usize],
    m: usize,
    contamination: &Contamination,
    r: &mut impl Rng,
) -> Result<DMatrix<f64>> {
    let p = x.ncols();
    let mut out = x.clone();
    for &row in &order[..m] {
        let z: DVector<f64> = match contamination {
            Contamination::ShiftRange { low, high } => {
                if low.len() != p || high.len() != p {
                    return Err(Error::invalid("offset ranges have the wrong dimension"));
                }
                let center = DVector::from_fn(p, |j, _| {
                    let col: Vec<f64> = x.column(j).iter().cloned().collect();
                    median(&col)
                });
                DVector::from_fn(p, |j, _| {
                    let off = if high[j] > low[j] {
                        r.gen_range(low[j]..high[j])
                    } else {
                        low[j]
                    };
                    center[j] + off
                })
            }
            Contamination::PointMass(z) => {
                if z.len() != p {
                    return Err(Error::invalid("point mass has the wrong dimension"));
                }
                z.clone()
            }
            Contamination::ClusterShift(shift) => {
                if shift.len() != p {
                    return Err(Error::invalid("cluster shift has the wrong dimension"));
                }
                x.row(row).transpose() + shift
            }
        };
        out.row_mut(row).copy_from(&z.transpose());
    }
    Ok(out)
}

/// Empirical maximum-bias curve: for each contamination count in
/// `m_grid`, the largest estimate shift `||T(contaminated) - T(clean)||`
/// seen over random trials. Each trial reuses one replacement order and
/// one replacement draw across the whole grid (nested contamination), and
/// a running maximum over increasing counts makes the curve
/// non-decreasing. A failed fit counts as infinite bias.
pub fn empirical_maxbias<F>(
    statistic: F,
    x: &DMatrix<f64>,
    contamination: &Contamination,
    m_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&DMatrix<f64>) -> Result<DVector<f64>> + Sync,
{
    let n = x.nrows();
    if n == 0 || trials == 0 || m_grid.is_empty() {
        return Err(Error::invalid("bias curve needs data, trials and a grid"));
    }
    let mut sorted_grid = m_grid.to_vec();
    sorted_grid.sort_unstable();
    if *sorted_grid.last().unwrap() > n {
        return Err(Error::invalid("contamination count exceeds sample size"));
    }
    let base = statistic(x)?;
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(seed, trial as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut r);
            sorted_grid
                .iter()
                .map(|&m| {
                    let mut rr = rng::stream(seed, (trial as u64) << 32 | 1);
                    match contaminated_copy(x, &order, m, contamination, &mut rr) {
                        Ok(xc) => match statistic(&xc) {
                            Ok(t) => (t - &base).norm(),
                            Err(_) => f64::INFINITY,
                        },
                        Err(_) => f64::INFINITY,
                    }
                })
                .collect()
        })
        .collect();
    let mut curve = Vec::with_capacity(sorted_grid.len());
    let mut running = 0.0f64;
    for g in 0..sorted_grid.len() {
        let worst = per_trial
            .iter()
            .map(|t| t[g])
            .fold(f64::NEG_INFINITY, f64::max);
        running = running.max(worst);
        curve.push(running);
    }
    Ok(curve)
}

/// Outcome of a breakdown scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakdownScan {
    /// Smallest contamination fraction at which the bias exceeded the
    /// threshold; 1.0 when it never did.
    pub fraction: f64,
    /// Whether the threshold was ever exceeded.
    pub exceeded: bool,
}

/// Scans contamination counts 1..=n and reports the smallest fraction
/// m/n whose maximum bias exceeds the threshold.
pub fn breakdown_scan<F>(
    statistic: F,
    x: &DMatrix<f64>,
    contamination: &Contamination,
    threshold: f64,
    trials: usize,
    seed: u64,
) -> Result<BreakdownScan>
where
    F: Fn(&DMatrix<f64>) -> Result<DVector<f64>> + Sync,
{
    let n = x.nrows();
    let grid: Vec<usize> = (1..=n).collect();
    let curve = empirical_maxbias(&statistic, x, contamination, &grid, trials, seed)?;
    for (i, bias) in curve.iter().enumerate() {
        if *bias > threshold {
            return Ok(BreakdownScan {
                fraction: (i + 1) as f64 / n as f64,
                exceeded: true,
            });
        }
    }
    Ok(BreakdownScan {
        fraction: 1.0,
        exceeded: false,
    })
}
