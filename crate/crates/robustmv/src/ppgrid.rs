//! Projection pursuit by a grid search over planes: maximize a projection
//! index over unit directions by sweeping two-dimensional angular grids.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::median;
use crate::scale::{mad, RhoFamily};

/// A projection index: maps the n projected values to a score.
///
/// `scale_monotone` marks scale-type indices with index(t v) = |t| index(v);
/// for those the plane search divides the score by the direction norm
/// instead of renormalizing the projections.
pub struct ProjectionIndex<'a> {
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub scale_monotone: bool,
}

impl<'a> ProjectionIndex<'a> {
    pub fn scale(f: &'a (dyn Fn(&[f64]) -> f64 + Sync)) -> Self {
        ProjectionIndex {
            f,
            scale_monotone: true,
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        (self.f)(v)
    }
}

/// Sample variance (divisor n-1) as a projection index.
pub fn variance_index(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0)
}

/// Consistent MAD as a projection index.
pub fn mad_index(v: &[f64]) -> f64 {
    mad(v, true).map(|s| s.value).unwrap_or(0.0)
}

/// M-scale of the centered projections as a projection index.
pub fn m_scale_index(family: RhoFamily, delta: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |v: &[f64]| {
        let med = median(v);
        let centered: Vec<f64> = v.iter().map(|x| x - med).collect();
        crate::scale::m_scale(&centered, family, delta)
            .map(|s| s.value)
            .unwrap_or(0.0)
    }
}

/// Angular grid parameters.
#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Directions per angular scan.
    pub n_angles: usize,
    /// Interval shrink per refinement.
    pub shrink_factor: f64,
    /// Full re-sweeps over all variables before giving up.
    pub max_sweeps: usize,
    /// Tolerance both for the angular interval (radians) and the sweep
    /// stopping rule on successive directions.
    pub tol: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_angles: 10,
            shrink_factor: 0.5,
            max_sweeps: 50,
            tol: 1e-5,
        }
    }
}

impl GridConfig {
    fn validate(&self) -> Result<()> {
        if self.n_angles < 2 || !(self.tol > 0.0) || !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::invalid("grid config: need n_angles >= 2, tol > 0, shrink in (0,1)"));
        }
        Ok(())
    }
}

/// Best angle in the plane of two projection vectors whose underlying unit
/// directions have inner product `cross`. Evaluates the index on the
/// norm-corrected combination; ties keep the earlier (or current) angle.
fn optimize_plane(
    v1: &[f64],
    v2: &[f64],
    cross: f64,
    index: &ProjectionIndex,
    cfg: &GridConfig,
) -> (f64, f64, f64) {
    let n = v1.len();
    let mut buf = vec![0.0; n];
    let mut score_at = |theta: f64| -> Option<f64> {
        let (g1, g2) = (theta.cos(), theta.sin());
        let norm2 = g1 * g1 + g2 * g2 + 2.0 * g1 * g2 * cross;
        if norm2 <= 1e-24 {
            return None;
        }
        let norm = norm2.sqrt();
        if index.scale_monotone {
            for i in 0..n {
                buf[i] = g1 * v1[i] + g2 * v2[i];
            }
            Some(index.eval(&buf) / norm)
        } else {
            for i in 0..n {
                buf[i] = (g1 * v1[i] + g2 * v2[i]) / norm;
            }
            Some(index.eval(&buf))
        }
    };

    // Coarse scan at 0, 180/n, ..., keeping the first best.
    let mut best_theta = 0.0;
    let mut best_score = f64::NEG_INFINITY;
    for m in 0..cfg.n_angles {
        let theta = std::f64::consts::PI * m as f64 / cfg.n_angles as f64;
        if let Some(s) = score_at(theta) {
            if s > best_score {
                best_score = s;
                best_theta = theta;
            }
        }
    }
    // Halving refinements around the running best.
    let mut width = std::f64::consts::FRAC_PI_4;
    while width > cfg.tol {
        for m in 0..cfg.n_angles {
            let frac = 2.0 * m as f64 / (cfg.n_angles as f64 - 1.0) - 1.0;
            let theta = best_theta + width * frac;
            if let Some(s) = score_at(theta) {
                if s > best_score {
                    best_score = s;
                    best_theta = theta;
                }
            }
        }
        width *= cfg.shrink_factor;
    }
    (best_theta.cos(), best_theta.sin(), best_score)
}

/// Best unit combination of two projection vectors treated as projections of
/// orthonormal directions. Returns (gamma1, gamma2, score).
pub fn plane_optimize(
    v1: &DVector<f64>,
    v2: &DVector<f64>,
    index: &ProjectionIndex,
    cfg: &GridConfig,
) -> Result<(f64, f64, f64)> {
    cfg.validate()?;
    if v1.len() != v2.len() || v1.is_empty() {
        return Err(Error::DimensionMismatch("plane vectors differ in length".into()));
    }
    if v1.norm() == 0.0 && v2.norm() == 0.0 {
        return Err(Error::invalid("both plane vectors are zero"));
    }
    Ok(optimize_plane(
        v1.as_slice(),
        v2.as_slice(),
        0.0,
        index,
        cfg,
    ))
}

/// Result of a full grid search: a unit direction with its index score.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub direction: DVector<f64>,
    pub score: f64,
    pub sweeps: usize,
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|v| *v == col[0])
}

/// Fix the direction sign so the largest-magnitude entry is positive.
pub fn canonical_sign(a: &mut DVector<f64>) {
    let mut idx = 0;
    for i in 1..a.len() {
        if a[i].abs() > a[idx].abs() {
            idx = i;
        }
    }
    if a[idx] < 0.0 {
        *a *= -1.0;
    }
}

/// Maximize a projection index over unit p-directions by the plane grid:
/// variables are ranked by marginal index, combined pairwise into a running
/// direction, then re-swept until successive directions agree within tol.
pub fn grid_search(x: &DMatrix<f64>, index: &ProjectionIndex, cfg: &GridConfig) -> Result<GridResult> {
    cfg.validate()?;
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || p == 0 {
        return Err(Error::invalid("empty data"));
    }
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).as_slice().to_vec()).collect();
    if cols.iter().all(|c| is_constant(c)) {
        return Err(Error::Degenerate("all columns constant".into()));
    }
    if p == 1 {
        return Ok(GridResult {
            direction: DVector::from_element(1, 1.0),
            score: index.eval(&cols[0]),
            sweeps: 0,
        });
    }

    // Rank variables by marginal index, constants last.
    let marginal: Vec<f64> = cols
        .iter()
        .map(|c| if is_constant(c) { f64::NEG_INFINITY } else { index.eval(c) })
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| marginal[b].partial_cmp(&marginal[a]).unwrap().then(a.cmp(&b)));

    // b holds coefficients in the sorted-variable basis; y = X_sorted b.
    let mut b = DVector::zeros(p);
    let (g1, g2, mut score) = optimize_plane(&cols[order[0]], &cols[order[1]], 0.0, index, cfg);
    b[0] = g1;
    b[1] = g2;
    let mut y: Vec<f64> = (0..n)
        .map(|i| g1 * cols[order[0]][i] + g2 * cols[order[1]][i])
        .collect();
    for j in 2..p {
        let (g1, g2, s) = optimize_plane(&y, &cols[order[j]], b[j], index, cfg);
        let norm = (g1 * g1 + g2 * g2 + 2.0 * g1 * g2 * b[j]).sqrt();
        for k in 0..p {
            b[k] = g1 * b[k] / norm;
        }
        b[j] += g2 / norm;
        for i in 0..n {
            y[i] = (g1 * y[i] + g2 * cols[order[j]][i]) / norm;
        }
        score = s;
    }

    let mut sweeps = 0;
    loop {
        if sweeps >= cfg.max_sweeps {
            return Err(Error::Convergence {
                iterations: sweeps,
                last_change: f64::NAN,
            });
        }
        sweeps += 1;
        let prev = b.clone();
        for j in 0..p {
            let (g1, g2, s) = optimize_plane(&y, &cols[order[j]], b[j], index, cfg);
            let norm = (g1 * g1 + g2 * g2 + 2.0 * g1 * g2 * b[j]).sqrt();
            for k in 0..p {
                b[k] *= g1 / norm;
            }
            b[j] += g2 / norm;
            for i in 0..n {
                y[i] = (g1 * y[i] + g2 * cols[order[j]][i]) / norm;
            }
            score = s;
        }
        // Directions are sign-equivalent; compare up to sign.
        let diff = (&b - &prev).norm().min((&b + &prev).norm());
        if diff < cfg.tol {
            break;
        }
    }

    let mut direction = DVector::zeros(p);
    for (pos, &orig) in order.iter().enumerate() {
        direction[orig] = b[pos];
    }
    direction /= direction.norm();
    canonical_sign(&mut direction);
    Ok(GridResult {
        direction,
        score,
        sweeps,
    })
}

/// Remove the component along a unit direction: X (I - a a^T).
pub fn deflate(x: &DMatrix<f64>, a: &DVector<f64>) -> Result<DMatrix<f64>> {
    if (a.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("deflation direction must have unit norm"));
    }
    if a.len() != x.ncols() {
        return Err(Error::DimensionMismatch("direction length != columns".into()));
    }
    let xa = x * a;
    Ok(x - xa * a.transpose())
}
