//! Versioned model persistence. A saved document carries everything
//! needed to reproduce predictions exactly: the fitted parameters, the
//! configuration echo, the seed, and fit diagnostics.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Fit diagnostics kept with the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Smallest case weight, median case weight, and the number of cases
    /// with weight below one half.
    pub weight_min: f64,
    pub weight_median: f64,
    pub downweighted: usize,
}

impl Diagnostics {
    pub fn from_weights(weights: &DVector<f64>, iterations: usize, converged: bool) -> Self {
        let mut sorted: Vec<f64> = weights.iter().cloned().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Diagnostics {
            iterations,
            converged,
            weight_min: sorted.first().cloned().unwrap_or(1.0),
            weight_median: sorted.get(sorted.len() / 2).cloned().unwrap_or(1.0),
            downweighted: sorted.iter().filter(|&&w| w < 0.5).count(),
        }
    }
}

/// Fitted parameters by predictor family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelParams {
    /// Linear predictor; with an intercept the first coefficient is it.
    Linear {
        intercept: bool,
        beta: Vec<f64>,
        sigma: f64,
    },
    /// Latent-variable predictor on centered (optionally scaled) data.
    LatentLinear {
        x_center: Vec<f64>,
        x_scale: Vec<f64>,
        y_center: f64,
        coefficients: Vec<f64>,
        components: usize,
    },
}

/// One saved model artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: u32,
    pub method: String,
    /// Predictor column names, in fit order.
    pub predictors: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub diagnostics: Diagnostics,
    pub params: ModelParams,
}

pub fn save(path: &Path, doc: &ModelDocument) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::failure(format!("cannot serialize model: {e}")))?;
    fs::write(path, text)
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelDocument> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::failure(format!("cannot read {}: {e}", path.display())))?;
    let doc: ModelDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::failure(format!("bad model file {}: {e}", path.display())))?;
    if doc.schema != SCHEMA_VERSION {
        return Err(CliError::failure(format!(
            "unsupported model schema {} (expected {SCHEMA_VERSION})",
            doc.schema
        )));
    }
    Ok(doc)
}

/// Applies a loaded model to new predictor rows.
pub fn predict(doc: &ModelDocument, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    match &doc.params {
        ModelParams::Linear {
            intercept,
            beta,
            sigma: _,
        } => {
            let expected = beta.len() - usize::from(*intercept);
            if p != expected {
                return Err(CliError::failure(format!(
                    "model expects {expected} predictors, data has {p}"
                )));
            }
            Ok(DVector::from_fn(n, |i, _| {
                let (offset, slope) = if *intercept {
                    (beta[0], &beta[1..])
                } else {
                    (0.0, &beta[..])
                };
                offset
                    + slope
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b * x[(i, j)])
                        .sum::<f64>()
            }))
        }
        ModelParams::LatentLinear {
            x_center,
            x_scale,
            y_center,
            coefficients,
            components: _,
        } => {
            if p != x_center.len() {
                return Err(CliError::failure(format!(
                    "model expects {} predictors, data has {p}",
                    x_center.len()
                )));
            }
            Ok(DVector::from_fn(n, |i, _| {
                y_center
                    + coefficients
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b * (x[(i, j)] - x_center[j]) / x_scale[j])
                        .sum::<f64>()
            }))
        }
    }
}
