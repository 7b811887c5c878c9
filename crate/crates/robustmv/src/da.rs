//! Discriminant analysis: Bayes rules (LDA/QDA) and the Fisher rule with
//! pluggable group estimators, lossless SVD preprocessing and score-space
//! pipelines for wide data, discrimination PLS, and a sparse reweighted
//! two-group classifier.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{chi2_quantile, column_medians, covariance_about, median, sym_eigen_desc};
use crate::loccov::{mcd_fit, sign_covariance};
use crate::pca::{
    classical_pca, maronna_pca, pp_pca, spherical_pca, PcaMethod, PcaModel,
};
use crate::pls::{
    fair_weight, pls_fit, predict as pls_predict, prm_fit, snipls_fit, spatial_sign_pls, PlsModel,
    PrmConfig,
};
use crate::ppgrid::{mad_index, ProjectionIndex};
use crate::scale::mad;

/// Labeled rows; labels index `n_groups` contiguous groups from 0.
#[derive(Debug, Clone)]
pub struct GroupedData {
    pub x: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub n_groups: usize,
}

impl GroupedData {
    pub fn new(x: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(
                "label count does not match row count".into(),
            ));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("empty data"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite entries"));
        }
        let n_groups = labels.iter().max().map_or(0, |m| m + 1);
        if n_groups == 0 {
            return Err(Error::invalid("no groups"));
        }
        for j in 0..n_groups {
            if !labels.contains(&j) {
                return Err(Error::invalid(format!("group {j} is empty")));
            }
        }
        Ok(GroupedData {
            x,
            labels,
            n_groups,
        })
    }

    pub fn group_rows(&self, j: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == j)
            .collect()
    }

    pub fn group_matrix(&self, j: usize) -> DMatrix<f64> {
        let rows = self.group_rows(j);
        DMatrix::from_fn(rows.len(), self.x.ncols(), |i, c| self.x[(rows[i], c)])
    }
}

/// Location/scatter estimator applied within each group.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupEstimator {
    Classical,
    Mcd { seed: u64 },
    SphericalCov,
}

/// How the joint scatter for linear rules is formed.
#[derive(Debug, Clone, PartialEq)]
pub enum Pooling {
    /// Keep per-group scatters only (quadratic rules); no joint scatter.
    PerGroup,
    /// Weighted average of group scatters with weights n_j - 1.
    PooledAverage,
    /// One scatter of all rows after centering each group at its location.
    CenterThenJoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscriminantKind {
    Lda,
    Qda,
    Fisher,
}

/// Group parameters for the Bayes and Fisher rules.
#[derive(Debug, Clone)]
pub struct DiscriminantModel {
    pub kind: DiscriminantKind,
    pub means: Vec<DVector<f64>>,
    pub scatters: Vec<DMatrix<f64>>,
    pub pooled: Option<DMatrix<f64>>,
    /// Positive, summing to one.
    pub priors: Vec<f64>,
    /// Fisher directions, columns scaled so v' W v = 1.
    pub basis: Option<DMatrix<f64>>,
}

fn group_estimate(
    x: &DMatrix<f64>,
    estimator: &GroupEstimator,
    seed_offset: u64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    match estimator {
        GroupEstimator::Classical => {
            let mean = crate::linalg::column_means(x);
            let cov = covariance_about(x, &mean);
            Ok((mean, cov))
        }
        GroupEstimator::Mcd { seed } => {
            let est = mcd_fit(x, None, None, seed.wrapping_add(seed_offset))?;
            // One reweighting step: mean and covariance of the cases inside
            // the chi-square 0.975 distance cutoff. This recovers most of the
            // efficiency the raw subset estimate gives up.
            let cut = chi2_quantile(x.ncols(), 0.975).sqrt();
            let keep: Vec<usize> = (0..x.nrows())
                .filter(|&i| est.distances[i] <= cut)
                .collect();
            if keep.len() <= x.ncols() + 1 {
                return Ok((est.location, est.scatter));
            }
            let kept = DMatrix::from_fn(keep.len(), x.ncols(), |i, c| x[(keep[i], c)]);
            let mean = crate::linalg::column_means(&kept);
            let cov = covariance_about(&kept, &mean);
            Ok((mean, cov))
        }
        GroupEstimator::SphericalCov => {
            let est = sign_covariance(x)?;
            Ok((est.location, est.scatter))
        }
    }
}

fn cholesky_of(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Group means and scatters with the chosen estimator and pooling; priors
/// default to the group frequencies n_j / n.
pub fn estimate_groups(
    data: &GroupedData,
    estimator: &GroupEstimator,
    pooling: &Pooling,
) -> Result<DiscriminantModel> {
    let g = data.n_groups;
    let n = data.x.nrows();
    let mut means = Vec::with_capacity(g);
    let mut scatters = Vec::with_capacity(g);
    let mut sizes = Vec::with_capacity(g);
    for j in 0..g {
        let xj = data.group_matrix(j);
        sizes.push(xj.nrows());
        let (m, s) = group_estimate(&xj, estimator, j as u64)?;
        means.push(m);
        scatters.push(s);
    }
    let pooled = match pooling {
        Pooling::PerGroup => None,
        Pooling::PooledAverage => {
            let mut s = DMatrix::zeros(data.x.ncols(), data.x.ncols());
            for j in 0..g {
                s += (sizes[j] as f64 - 1.0) * &scatters[j];
            }
            s /= (n - g) as f64;
            Some(s)
        }
        Pooling::CenterThenJoint => {
            let mut centered = data.x.clone();
            for i in 0..n {
                let j = data.labels[i];
                for c in 0..data.x.ncols() {
                    centered[(i, c)] -= means[j][c];
                }
            }
            let (_, s) = group_estimate(&centered, estimator, g as u64)?;
            Some(s)
        }
    };
    if let Some(p) = &pooled {
        cholesky_of(p, "pooled scatter")?;
    }
    let priors = sizes.iter().map(|&nj| nj as f64 / n as f64).collect();
    Ok(DiscriminantModel {
        kind: if pooled.is_some() {
            DiscriminantKind::Lda
        } else {
            DiscriminantKind::Qda
        },
        means,
        scatters,
        pooled,
        priors,
        basis: None,
    })
}

/// Quadratic scores -0.5 ln det(S_j) - 0.5 (x-m_j)' S_j^-1 (x-m_j) + ln p_j.
pub fn qda_scores(model: &DiscriminantModel, x: &DVector<f64>) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(model.means.len());
    for j in 0..model.means.len() {
        let chol = cholesky_of(&model.scatters[j], "group scatter")?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let d = x - &model.means[j];
        let maha = d.dot(&chol.solve(&d));
        scores.push(-0.5 * log_det - 0.5 * maha + model.priors[j].ln());
    }
    Ok(scores)
}

/// Linear scores m_j' S^-1 x - 0.5 m_j' S^-1 m_j + ln p_j on the pooled
/// scatter.
pub fn lda_scores(model: &DiscriminantModel, x: &DVector<f64>) -> Result<Vec<f64>> {
    let pooled = model
        .pooled
        .as_ref()
        .ok_or_else(|| Error::invalid("no pooled scatter; refit with a pooling rule"))?;
    let chol = cholesky_of(pooled, "pooled scatter")?;
    let mut scores = Vec::with_capacity(model.means.len());
    for j in 0..model.means.len() {
        let a = chol.solve(&model.means[j]);
        scores.push(a.dot(x) - 0.5 * a.dot(&model.means[j]) + model.priors[j].ln());
    }
    Ok(scores)
}

/// Fisher scores sqrt((x-m_j)' VV' (x-m_j) - 2 ln p_j); small is close.
pub fn fisher_scores(model: &DiscriminantModel, x: &DVector<f64>) -> Result<Vec<f64>> {
    let basis = model
        .basis
        .as_ref()
        .ok_or_else(|| Error::invalid("model has no discriminant basis"))?;
    let mut scores = Vec::with_capacity(model.means.len());
    for j in 0..model.means.len() {
        let d = basis.transpose() * (x - &model.means[j]);
        scores.push((d.norm_squared() - 2.0 * model.priors[j].ln()).sqrt());
    }
    Ok(scores)
}

fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..scores.len() {
        if scores[j] > scores[best] {
            best = j;
        }
    }
    best
}

fn argmin_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..scores.len() {
        if scores[j] < scores[best] {
            best = j;
        }
    }
    best
}

/// Group assignment; ties go to the lowest group index.
pub fn classify(model: &DiscriminantModel, x: &DVector<f64>) -> Result<usize> {
    Ok(match model.kind {
        DiscriminantKind::Lda => argmax_lowest(&lda_scores(model, x)?),
        DiscriminantKind::Qda => argmax_lowest(&qda_scores(model, x)?),
        DiscriminantKind::Fisher => argmin_lowest(&fisher_scores(model, x)?),
    })
}

/// Directions maximizing between-group over within-group variation:
/// eigenvectors of W^-1 B for positive eigenvalues, scaled to v' W v = 1.
pub fn fisher_basis(
    means: &[DVector<f64>],
    within: &DMatrix<f64>,
    priors: &[f64],
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let g = means.len();
    let p = within.nrows();
    let mut grand = DVector::zeros(p);
    for j in 0..g {
        grand += priors[j] * &means[j];
    }
    let mut between = DMatrix::zeros(p, p);
    for j in 0..g {
        let d = &means[j] - &grand;
        between += priors[j] * &d * d.transpose();
    }
    let chol = cholesky_of(within, "within-group scatter")?;
    // Whitened problem: L^-1 B L^-T is symmetric with the same spectrum.
    let l_inv_b = chol.l().solve_lower_triangular(&between).ok_or_else(|| {
        Error::Singular("within-group scatter is not positive definite".into())
    })?;
    let m = chol
        .l()
        .solve_lower_triangular(&l_inv_b.transpose())
        .ok_or_else(|| Error::Singular("within-group scatter is not positive definite".into()))?;
    let (vals, vecs) = sym_eigen_desc(&m);
    let max_l = (g - 1).min(p);
    let cut = 1e-10 * vals[0].max(1.0);
    let l = (0..max_l).take_while(|&i| vals[i] > cut).count();
    if l == 0 {
        return Err(Error::Degenerate("no between-group separation".into()));
    }
    let mut basis = DMatrix::zeros(p, l);
    for i in 0..l {
        // Back-transform the whitened eigenvector; unit whitened norm gives
        // v' W v = 1 automatically.
        let u = vecs.column(i).clone_owned();
        let v = chol
            .l()
            .transpose()
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::Singular("within-group scatter is singular".into()))?;
        basis.set_column(i, &v);
    }
    Ok((basis, vals.iter().take(l).cloned().collect()))
}

/// Fisher discriminant fit with the chosen group estimator; the within
/// matrix is the prior-weighted average of the group scatters.
pub fn fisher_fit(data: &GroupedData, estimator: &GroupEstimator) -> Result<DiscriminantModel> {
    let mut model = estimate_groups(data, estimator, &Pooling::PerGroup)?;
    let p = data.x.ncols();
    let mut within = DMatrix::zeros(p, p);
    for j in 0..data.n_groups {
        within += model.priors[j] * &model.scatters[j];
    }
    let (basis, _) = fisher_basis(&model.means, &within, &model.priors)?;
    model.kind = DiscriminantKind::Fisher;
    model.pooled = Some(within);
    model.basis = Some(basis);
    Ok(model)
}

/// Lossless rotation of wide data into at most rank(X) columns.
#[derive(Debug, Clone)]
pub struct SvdReduction {
    /// n x r rotated data U S.
    pub reduced: DMatrix<f64>,
    /// p x r orthonormal map; X = reduced * back_map' and reduced-space
    /// coefficient vectors pull back through it.
    pub back_map: DMatrix<f64>,
}

pub fn svd_preprocess(x: &DMatrix<f64>) -> Result<SvdReduction> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::invalid("empty data"));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let s = &svd.singular_values;
    let cut = 1e-12 * s.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let r = s.iter().filter(|v| **v > cut).count().max(1);
    let reduced = DMatrix::from_fn(x.nrows(), r, |i, j| u[(i, j)] * s[j]);
    let back_map = DMatrix::from_fn(x.ncols(), r, |i, j| v_t[(j, i)]);
    Ok(SvdReduction { reduced, back_map })
}

/// Dimension-reduction step for classification in a score space.
#[derive(Debug, Clone)]
pub enum ScoreReducer {
    Pca { q: usize, method: PcaMethod },
    Pls { k: usize, variant: PlsVariant },
}

/// Which PLS fitter a classification wrapper uses.
#[derive(Debug, Clone, PartialEq)]
pub enum PlsVariant {
    Plain,
    SpatialSign,
    Prm,
}

fn fit_pca_method(x: &DMatrix<f64>, q: usize, method: &PcaMethod) -> Result<PcaModel> {
    match method {
        PcaMethod::Classical => classical_pca(x, q),
        PcaMethod::Spherical => spherical_pca(x, q),
        PcaMethod::Maronna { family, delta, .. } => maronna_pca(x, q, family.clone(), *delta),
        PcaMethod::ProjectionPursuit => {
            let index = ProjectionIndex::scale(&mad_index);
            pp_pca(x, q, &index)
        }
    }
}

fn fit_pls_variant(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k: usize,
    variant: &PlsVariant,
) -> Result<PlsModel> {
    match variant {
        PlsVariant::Plain => {
            let ym = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
            pls_fit(x, &ym, k)
        }
        PlsVariant::SpatialSign => spatial_sign_pls(x, y, k),
        PlsVariant::Prm => prm_fit(x, y, k, &PrmConfig::default()),
    }
}

#[derive(Debug, Clone)]
enum ReducerModel {
    Pca(PcaModel),
    Pls(PlsModel),
}

/// Reduce-then-classify model for wide data.
#[derive(Debug, Clone)]
pub struct PipelineModel {
    reducer: ReducerModel,
    pub classifier: DiscriminantModel,
}

/// Fit the reducer on X (the PLS reducer predicts the 0/1 labels), then a
/// discriminant rule on the training scores.
pub fn pipeline_fit(
    data: &GroupedData,
    reducer: &ScoreReducer,
    estimator: &GroupEstimator,
    kind: DiscriminantKind,
) -> Result<PipelineModel> {
    let reducer_model = match reducer {
        ScoreReducer::Pca { q, method } => ReducerModel::Pca(fit_pca_method(&data.x, *q, method)?),
        ScoreReducer::Pls { k, variant } => {
            if data.n_groups != 2 {
                return Err(Error::Unsupported(
                    "the PLS reducer needs exactly two groups".into(),
                ));
            }
            let y = DVector::from_fn(data.x.nrows(), |i, _| data.labels[i] as f64);
            ReducerModel::Pls(fit_pls_variant(&data.x, &y, *k, variant)?)
        }
    };
    let scores = match &reducer_model {
        ReducerModel::Pca(m) => m.scores(&data.x),
        ReducerModel::Pls(m) => crate::pls::transform(m, &data.x)?,
    };
    let score_data = GroupedData::new(scores, data.labels.clone())?;
    let pooling = match kind {
        DiscriminantKind::Qda => Pooling::PerGroup,
        _ => Pooling::PooledAverage,
    };
    let mut classifier = match kind {
        DiscriminantKind::Fisher => fisher_fit(&score_data, estimator)?,
        _ => estimate_groups(&score_data, estimator, &pooling)?,
    };
    classifier.kind = kind;
    Ok(PipelineModel {
        reducer: reducer_model,
        classifier,
    })
}

pub fn pipeline_classify(model: &PipelineModel, x: &DVector<f64>) -> Result<usize> {
    let row = DMatrix::from_row_slice(1, x.len(), x.as_slice());
    let scores = match &model.reducer {
        ReducerModel::Pca(m) => m.scores(&row),
        ReducerModel::Pls(m) => crate::pls::transform(m, &row)?,
    };
    classify(&model.classifier, &scores.row(0).transpose())
}

/// Two-group classification by regressing a coded response.
#[derive(Debug, Clone)]
pub struct DplsModel {
    pub pls: PlsModel,
    /// Code for group 0 and group 1.
    pub codes: [f64; 2],
    /// Midpoint of the codes.
    pub threshold: f64,
}

/// PLS (or a robust variant) on a coded two-group response; the decision
/// boundary is the midpoint of the codes.
pub fn dpls_fit(
    data: &GroupedData,
    k: usize,
    codes: [f64; 2],
    variant: &PlsVariant,
) -> Result<DplsModel> {
    if data.n_groups != 2 {
        return Err(Error::Unsupported("coded regression needs two groups".into()));
    }
    if codes[0] == codes[1] {
        return Err(Error::invalid("group codes must differ"));
    }
    let y = DVector::from_fn(data.x.nrows(), |i, _| codes[data.labels[i]]);
    let pls = fit_pls_variant(&data.x, &y, k, variant)?;
    Ok(DplsModel {
        pls,
        codes,
        threshold: 0.5 * (codes[0] + codes[1]),
    })
}

/// Assign to the group whose code is nearest to the prediction; on the
/// threshold exactly, group 0.
pub fn dpls_classify(model: &DplsModel, x: &DVector<f64>) -> Result<usize> {
    let row = DMatrix::from_row_slice(1, x.len(), x.as_slice());
    let yhat = pls_predict(&model.pls, &row)?[(0, 0)];
    let d0 = (yhat - model.codes[0]).abs();
    let d1 = (yhat - model.codes[1]).abs();
    Ok(if d0 <= d1 { 0 } else { 1 })
}

const SPRM_DA_WEIGHT_FLOOR: f64 = 1e-6;

/// Sparse robust two-group classifier: case-weighted sparse PLS scores
/// followed by a weighted linear rule in score space.
#[derive(Debug, Clone)]
pub struct SprmDaModel {
    pub x_center: DVector<f64>,
    pub x_scale: DVector<f64>,
    /// p x k sparse weighting directions.
    pub directions: DMatrix<f64>,
    pub classifier: DiscriminantModel,
    pub case_weights: DVector<f64>,
}

fn robust_column_scales(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.ncols(), |j, _| {
        let col: Vec<f64> = x.column(j).iter().cloned().collect();
        match mad(&col, true) {
            Ok(s) if s.value > 0.0 => s.value,
            _ => 1.0,
        }
    })
}

/// Scatter-matrix weight: full weight inside the chi-square 0.95 cutoff,
/// decaying as cutoff/d^2 outside.
fn distance_weight(d2: f64, dof: usize) -> f64 {
    let cut = chi2_quantile(dof, 0.95);
    if d2 <= cut {
        1.0
    } else {
        cut / d2
    }
}

/// Mahalanobis-type squared distances in a robust per-group PCA space.
fn group_pca_distances(xj: &DMatrix<f64>) -> Result<(Vec<f64>, usize)> {
    let q = xj.ncols().min(xj.nrows() - 1).min(5);
    let model = spherical_pca(xj, q)?;
    let scores = model.scores(xj);
    let used: Vec<usize> = (0..q).filter(|&c| model.eigenvalues[c] > 0.0).collect();
    if used.is_empty() {
        return Err(Error::Degenerate("no spread within a group".into()));
    }
    let d2 = (0..xj.nrows())
        .map(|i| {
            used.iter()
                .map(|&c| scores[(i, c)].powi(2) / model.eigenvalues[c])
                .sum()
        })
        .collect();
    Ok((d2, used.len()))
}

pub fn sprm_da_fit(data: &GroupedData, k: usize, eta: f64) -> Result<SprmDaModel> {
    if data.n_groups != 2 {
        return Err(Error::Unsupported("the classifier needs two groups".into()));
    }
    let n = data.x.nrows();
    let p = data.x.ncols();
    for j in 0..2 {
        if data.group_rows(j).len() < 4 {
            return Err(Error::invalid("each group needs at least 4 cases"));
        }
    }

    // Step 1: group-wise robust centering and scaling, then starting
    // weights from distances in a per-group robust PCA space.
    let mut w = vec![0.0; n];
    for j in 0..2 {
        let rows = data.group_rows(j);
        let xj = data.group_matrix(j);
        let center = column_medians(&xj);
        let scale = robust_column_scales(&xj);
        let std = DMatrix::from_fn(xj.nrows(), p, |i, c| (xj[(i, c)] - center[c]) / scale[c]);
        let (d2, dof) = group_pca_distances(&std)?;
        for (pos, &i) in rows.iter().enumerate() {
            w[i] = distance_weight(d2[pos], dof);
        }
    }

    // Step 2: robust overall center and scale, weight the rows, and fit the
    // sparse directions against the coded labels.
    let x_center = column_medians(&data.x);
    let x_scale = robust_column_scales(&data.x);
    let xc = DMatrix::from_fn(n, p, |i, c| (data.x[(i, c)] - x_center[c]) / x_scale[c]);
    let coded = DVector::from_fn(n, |i, _| if data.labels[i] == 0 { 1.0 } else { -1.0 });
    let xw = DMatrix::from_fn(n, p, |i, c| w[i].sqrt() * xc[(i, c)]);
    let yw = DVector::from_fn(n, |i, _| w[i].sqrt() * coded[i]);
    let sparse = snipls_fit(&xw, &yw, k, eta)?;
    let directions = sparse.weights.clone();
    let scores = &xc * &directions;

    // Step 3: score-space distance weights per group, combined with a
    // label-consistency weight from the first component.
    for j in 0..2 {
        let rows = data.group_rows(j);
        let tj = DMatrix::from_fn(rows.len(), k, |i, c| scores[(rows[i], c)]);
        let center = column_medians(&tj);
        let mut dof = 0;
        let mut d2 = vec![0.0; rows.len()];
        for c in 0..k {
            let col: Vec<f64> = tj.column(c).iter().cloned().collect();
            let s = mad(&col, true).map(|e| e.value).unwrap_or(0.0);
            if s > 0.0 {
                dof += 1;
                for i in 0..rows.len() {
                    d2[i] += ((tj[(i, c)] - center[c]) / s).powi(2);
                }
            }
        }
        if dof == 0 {
            return Err(Error::Degenerate("no spread in the score space".into()));
        }
        let t1: Vec<f64> = tj.column(0).iter().cloned().collect();
        let m1 = median(&t1);
        let s1 = mad(&t1, true).map(|e| e.value).unwrap_or(0.0);
        for (pos, &i) in rows.iter().enumerate() {
            let wd = distance_weight(d2[pos], dof);
            let wl = if s1 > 0.0 {
                fair_weight((t1[pos] - m1) / s1, 4.0)
            } else {
                1.0
            };
            w[i] = (wd * wl).max(SPRM_DA_WEIGHT_FLOOR);
        }
    }

    // Step 4: weighted linear rule in score space.
    let mut means = Vec::with_capacity(2);
    let mut pooled = DMatrix::zeros(k, k);
    let mut priors = Vec::with_capacity(2);
    for j in 0..2 {
        let rows = data.group_rows(j);
        let wsum: f64 = rows.iter().map(|&i| w[i]).sum();
        if wsum <= 2.0 * SPRM_DA_WEIGHT_FLOOR * rows.len() as f64 {
            return Err(Error::Degenerate("a group lost all its weight".into()));
        }
        let mut mean = DVector::zeros(k);
        for &i in &rows {
            for c in 0..k {
                mean[c] += w[i] * scores[(i, c)];
            }
        }
        mean /= wsum;
        for &i in &rows {
            let d = DVector::from_fn(k, |c, _| scores[(i, c)] - mean[c]);
            pooled += w[i] * &d * d.transpose();
        }
        means.push(mean);
        priors.push(rows.len() as f64 / n as f64);
    }
    let total_w: f64 = w.iter().sum();
    pooled /= total_w - 2.0;
    let classifier = DiscriminantModel {
        kind: DiscriminantKind::Lda,
        means,
        scatters: vec![pooled.clone(), pooled.clone()],
        pooled: Some(pooled),
        priors,
        basis: None,
    };
    cholesky_of(classifier.pooled.as_ref().unwrap(), "pooled score scatter")?;
    Ok(SprmDaModel {
        x_center,
        x_scale,
        directions,
        classifier,
        case_weights: DVector::from_column_slice(&w),
    })
}

pub fn sprm_da_classify(model: &SprmDaModel, x: &DVector<f64>) -> Result<usize> {
    let z = DVector::from_fn(x.len(), |c, _| {
        (x[c] - model.x_center[c]) / model.x_scale[c]
    });
    let t = model.directions.transpose() * z;
    classify(&model.classifier, &t)
}
