//! Robust univariate scale estimators and the rho/psi/weight function
//! families used by every M-type estimator in the crate.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::median;
use crate::rng;

/// Residual cap used when a weight function has a pole at zero (L1).
pub(crate) const ZERO_RESIDUAL_GUARD: f64 = 1e-8;

/// Rho-function families. Bounded families are normalized to rho(inf) = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoFamily {
    /// rho(r) = r^2 (least squares).
    Quadratic,
    /// rho(r) = |r| (L1).
    Absolute,
    /// Huber family: psi(r) = r for |r| <= k, k sign(r) otherwise.
    Huber { k: f64 },
    /// Bisquare family, bounded with rho(inf) = 1.
    Bisquare { k: f64 },
    /// rho(r) = 1 if |r| > 1, else 0. Yields the median of absolutes as M-scale.
    Indicator,
}

impl RhoFamily {
    pub fn huber(k: f64) -> Self {
        assert!(k > 0.0, "huber tuning constant must be positive");
        RhoFamily::Huber { k }
    }

    pub fn bisquare(k: f64) -> Self {
        assert!(k > 0.0, "bisquare tuning constant must be positive");
        RhoFamily::Bisquare { k }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, RhoFamily::Bisquare { .. } | RhoFamily::Indicator)
    }

    /// psi is nondecreasing (monotone M-estimator) for these families.
    pub fn is_monotone(&self) -> bool {
        matches!(
            self,
            RhoFamily::Quadratic | RhoFamily::Absolute | RhoFamily::Huber { .. }
        )
    }

    pub fn rho_sup(&self) -> f64 {
        if self.is_bounded() {
            1.0
        } else {
            f64::INFINITY
        }
    }

    pub fn rho(&self, r: f64) -> f64 {
        match *self {
            RhoFamily::Quadratic => r * r,
            RhoFamily::Absolute => r.abs(),
            RhoFamily::Huber { k } => {
                if r.abs() <= k {
                    0.5 * r * r
                } else {
                    k * r.abs() - 0.5 * k * k
                }
            }
            RhoFamily::Bisquare { k } => {
                if r.abs() <= k {
                    let u = (r / k) * (r / k);
                    u * (3.0 - 3.0 * u + u * u)
                } else {
                    1.0
                }
            }
            RhoFamily::Indicator => {
                if r.abs() > 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// psi = rho'.
    pub fn psi(&self, r: f64) -> f64 {
        match *self {
            RhoFamily::Quadratic => 2.0 * r,
            RhoFamily::Absolute => r.signum(),
            RhoFamily::Huber { k } => {
                if r.abs() <= k {
                    r
                } else {
                    k * r.signum()
                }
            }
            RhoFamily::Bisquare { k } => {
                if r.abs() <= k {
                    let u = r / k;
                    let t = 1.0 - u * u;
                    6.0 / k * u * t * t
                } else {
                    0.0
                }
            }
            RhoFamily::Indicator => 0.0,
        }
    }

    /// W(r) = psi(r)/r, with the zero limit taken analytically.
    pub fn weight(&self, r: f64) -> f64 {
        match *self {
            RhoFamily::Quadratic => 2.0,
            RhoFamily::Absolute => 1.0 / r.abs().max(ZERO_RESIDUAL_GUARD),
            RhoFamily::Huber { k } => {
                if r.abs() <= k {
                    1.0
                } else {
                    k / r.abs()
                }
            }
            RhoFamily::Bisquare { k } => {
                if r.abs() <= k {
                    let t = 1.0 - (r / k) * (r / k);
                    6.0 / (k * k) * t * t
                } else {
                    0.0
                }
            }
            RhoFamily::Indicator => 0.0,
        }
    }

    /// W_sigma(z) = rho(z)/z^2, the weight of the fixed-point scale iteration.
    pub fn weight_sigma(&self, z: f64) -> f64 {
        if z == 0.0 {
            return match *self {
                RhoFamily::Quadratic => 1.0,
                RhoFamily::Absolute => 1.0 / ZERO_RESIDUAL_GUARD,
                RhoFamily::Huber { .. } => 0.5,
                RhoFamily::Bisquare { k } => 3.0 / (k * k),
                RhoFamily::Indicator => 0.0,
            };
        }
        self.rho(z) / (z * z)
    }
}

/// How a `ScaleEstimate` was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleMethod {
    Mad { consistent: bool },
    Quantile { h: usize },
    TrimmedSquares { h: usize },
    MScale { family: RhoFamily, delta: f64 },
}

/// A nonnegative scale value with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimate {
    pub value: f64,
    /// Constant c such that value / c estimates the SD at the normal model
    /// (1.0 where unknown or already consistent).
    pub consistency_factor: f64,
    pub method: ScaleMethod,
    /// Set when the input was identically zero (exact fit downstream).
    pub degenerate: bool,
}

/// MAD-to-SD factor at the normal model.
pub const MAD_NORMAL_CONSTANT: f64 = 0.675;

/// Consistency constant for the bisquare(k=1) M-scale with delta = 0.5:
/// the root of E rho(z/c) = 1/2 at the standard normal.
pub const BISQUARE1_CONSTANT: f64 = 1.547644980928226;

/// Evaluate rho, psi and W = psi/r at one point.
pub fn rho_eval(family: RhoFamily, r: f64) -> Result<(f64, f64, f64)> {
    if !r.is_finite() {
        return Err(Error::invalid("rho_eval requires a finite argument"));
    }
    Ok((family.rho(r), family.psi(r), family.weight(r)))
}

/// Median absolute deviation from the median, optionally divided by 0.675.
pub fn mad(values: &[f64], consistent: bool) -> Result<ScaleEstimate> {
    if values.is_empty() {
        return Err(Error::invalid("mad of an empty sample"));
    }
    let med = median(values);
    let devs: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    let raw = median(&devs);
    let value = if consistent {
        raw / MAD_NORMAL_CONSTANT
    } else {
        raw
    };
    Ok(ScaleEstimate {
        value,
        consistency_factor: if consistent { 1.0 } else { MAD_NORMAL_CONSTANT },
        method: ScaleMethod::Mad { consistent },
        degenerate: raw == 0.0 && values.iter().all(|v| *v == values[0]),
    })
}

fn sorted_abs(r: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a
}

/// h-th smallest absolute value (1-indexed).
pub fn quantile_scale(r: &[f64], h: usize) -> Result<ScaleEstimate> {
    if h == 0 || h > r.len() {
        return Err(Error::invalid(format!(
            "quantile index h={h} out of range 1..={}",
            r.len()
        )));
    }
    let a = sorted_abs(r);
    Ok(ScaleEstimate {
        value: a[h - 1],
        consistency_factor: 1.0,
        method: ScaleMethod::Quantile { h },
        degenerate: a[h - 1] == 0.0 && a.iter().all(|v| *v == 0.0),
    })
}

/// sqrt((1/n) sum of the h smallest squared absolute values); h = n gives RMSE.
pub fn trimmed_squares_scale(r: &[f64], h: usize) -> Result<ScaleEstimate> {
    if h == 0 || h > r.len() {
        return Err(Error::invalid(format!(
            "trim index h={h} out of range 1..={}",
            r.len()
        )));
    }
    let a = sorted_abs(r);
    let sum: f64 = a[..h].iter().map(|v| v * v).sum();
    Ok(ScaleEstimate {
        value: (sum / r.len() as f64).sqrt(),
        consistency_factor: 1.0,
        method: ScaleMethod::TrimmedSquares { h },
        degenerate: a.iter().all(|v| *v == 0.0),
    })
}

/// Relative tolerance of the fixed-point M-scale iteration.
pub const M_SCALE_TOL: f64 = 1e-9;
pub const M_SCALE_MAX_ITER: usize = 200;

/// M-estimator of scale: the sigma solving (1/n) sum rho(r_i/sigma) = delta.
pub fn m_scale(r: &[f64], family: RhoFamily, delta: f64) -> Result<ScaleEstimate> {
    if r.is_empty() {
        return Err(Error::invalid("m_scale of an empty sample"));
    }
    if !(delta > 0.0 && delta < family.rho_sup()) {
        return Err(Error::invalid(format!(
            "delta={delta} must lie in (0, rho(inf))"
        )));
    }
    let method = ScaleMethod::MScale { family, delta };
    if r.iter().all(|v| *v == 0.0) {
        return Ok(ScaleEstimate {
            value: 0.0,
            consistency_factor: 1.0,
            method,
            degenerate: true,
        });
    }
    let n = r.len() as f64;

    // Bounded rho: as sigma -> 0 the mean of rho tends to the fraction of
    // nonzero residuals, so the defining equation needs that fraction to
    // exceed delta; otherwise the infimum scale is zero.
    if family.is_bounded() {
        let nonzero = r.iter().filter(|v| **v != 0.0).count() as f64;
        if nonzero / n <= delta {
            return Ok(ScaleEstimate {
                value: 0.0,
                consistency_factor: 1.0,
                method,
                degenerate: true,
            });
        }
    }

    // The indicator rho has a zero-derivative iteration; its M-scale is a
    // generalized quantile of |r| solved directly.
    if family == RhoFamily::Indicator {
        let a = sorted_abs(r);
        // smallest sigma with (1/n) #{|r_i| > sigma} <= delta
        let h = ((r.len() as f64) * (1.0 - delta)).ceil().max(1.0) as usize;
        let value = a[h.min(r.len()) - 1];
        return Ok(ScaleEstimate {
            value,
            consistency_factor: 1.0,
            method,
            degenerate: false,
        });
    }

    let start = {
        let m = mad(r, false)?.value;
        if m > 0.0 {
            m
        } else {
            r.iter().map(|v| v.abs()).sum::<f64>() / n
        }
    };
    let mut sigma = start;
    let mut last_change = f64::INFINITY;
    for _ in 0..M_SCALE_MAX_ITER {
        let mut acc = 0.0;
        for &ri in r {
            acc += family.weight_sigma(ri / sigma) * ri * ri;
        }
        let next = (acc / (n * delta)).sqrt();
        if next < 1e-300 {
            return Ok(ScaleEstimate {
                value: 0.0,
                consistency_factor: 1.0,
                method,
                degenerate: true,
            });
        }
        last_change = (next - sigma).abs();
        let done = last_change <= M_SCALE_TOL * sigma.max(f64::MIN_POSITIVE);
        sigma = next;
        if done {
            return Ok(ScaleEstimate {
                value: sigma,
                consistency_factor: 1.0,
                method,
                degenerate: false,
            });
        }
    }
    Err(Error::Convergence {
        iterations: M_SCALE_MAX_ITER,
        last_change,
    })
}

/// A consistency constant with an optional Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyConstant {
    pub value: f64,
    pub standard_error: Option<f64>,
}

/// Seed for the Monte-Carlo consistency constants (fixed by default).
pub const CONSISTENCY_MC_SEED: u64 = 0x5ca1ab1e;
const CONSISTENCY_MC_DRAWS: usize = 1_000_000;
const CONSISTENCY_MC_BATCHES: usize = 20;

/// Constant c such that the (family, delta) M-scale divided by c estimates
/// the standard deviation at the normal model. Known constants are returned
/// exactly; others are Monte-Carlo estimates at a fixed seed.
pub fn consistency_constant(family: RhoFamily, delta: f64) -> ConsistencyConstant {
    match family {
        RhoFamily::Quadratic => {
            // E z^2 / sigma^2 = delta  =>  sigma = 1/sqrt(delta).
            return ConsistencyConstant {
                value: 1.0 / delta.sqrt(),
                standard_error: None,
            };
        }
        RhoFamily::Absolute => {
            // E |z| / sigma = delta with E|z| = sqrt(2/pi).
            return ConsistencyConstant {
                value: (2.0 / std::f64::consts::PI).sqrt() / delta,
                standard_error: None,
            };
        }
        RhoFamily::Indicator if delta == 0.5 => {
            return ConsistencyConstant {
                value: MAD_NORMAL_CONSTANT,
                standard_error: None,
            };
        }
        RhoFamily::Bisquare { k } if k == 1.0 && delta == 0.5 => {
            return ConsistencyConstant {
                value: BISQUARE1_CONSTANT,
                standard_error: None,
            };
        }
        _ => {}
    }
    monte_carlo_consistency(family, delta, CONSISTENCY_MC_SEED)
}

/// Monte-Carlo estimate of the consistency constant at the standard normal.
pub fn monte_carlo_consistency(family: RhoFamily, delta: f64, seed: u64) -> ConsistencyConstant {
    let per_batch = CONSISTENCY_MC_DRAWS / CONSISTENCY_MC_BATCHES;
    let mut batch_values = Vec::with_capacity(CONSISTENCY_MC_BATCHES);
    for b in 0..CONSISTENCY_MC_BATCHES {
        let mut rng = rng::stream(seed, b as u64);
        let draws: Vec<f64> = (0..per_batch)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        if let Ok(s) = m_scale(&draws, family, delta) {
            batch_values.push(s.value);
        }
    }
    let m = batch_values.iter().sum::<f64>() / batch_values.len() as f64;
    let var = batch_values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        / (batch_values.len() as f64 - 1.0);
    ConsistencyConstant {
        value: m,
        standard_error: Some((var / batch_values.len() as f64).sqrt()),
    }
}
