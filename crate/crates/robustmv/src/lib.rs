//! Robust multivariate statistics at desk scale.
//!
//! The crate collects robust univariate scales, regression estimators
//! (M, L1, LMS/LTS/S/MM), multivariate location and scatter (MCD,
//! Stahel-Donoho, spatial signs), projection-pursuit machinery, robust
//! PCA and PLS variants, discriminant analysis, sparse regression, and
//! resampling-based validation tools (bootstrap, Monte-Carlo CV,
//! influence/maxbias/breakdown diagnostics).
//!
//! All randomized procedures are deterministic given a seed; candidate
//! evaluation uses per-task seeded streams so results do not depend on
//! the number of worker threads.

pub mod da;
pub mod error;
pub mod loccov;
pub mod pca;
pub mod pls;
pub mod ppgrid;
pub mod regress;
pub mod scale;
pub mod sim;
pub mod sparse;
pub mod validate;

pub(crate) mod linalg;
pub(crate) mod rng;

pub use error::{Error, Result};
