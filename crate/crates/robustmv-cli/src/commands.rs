//! Subcommand definitions and dispatch. Exit codes: 0 success, 1
//! computation or file failure, 2 usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use robustmv::loccov;
use robustmv::pca;
use robustmv::pls;
use robustmv::regress::{self, RegressionFit, RegressionProblem};
use robustmv::scale::RhoFamily;
use robustmv::sim;
use robustmv::sparse;
use robustmv::validate;

use crate::io::{self, CsvOptions, Dataset};
use crate::model::{self, Diagnostics, ModelDocument, ModelParams};
use crate::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "robustmv", version, about = "Robust multivariate statistics batch tool")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a regression or latent-variable model and save it.
    Fit(FitArgs),
    /// Apply a saved model to new predictor rows.
    Predict(PredictArgs),
    /// Monte Carlo cross-validation over a component grid.
    Cv(CvArgs),
    /// Case-resampling bootstrap of regression coefficients.
    Bootstrap(BootstrapArgs),
    /// Influence, maximum-bias and breakdown curves.
    Diagnose(DiagnoseArgs),
    /// Generate a named benchmark scenario.
    Simulate(SimulateArgs),
    /// Robust distances, case weights and a score/orthogonal distance map.
    Outliers(OutliersArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Input CSV path.
    #[arg(long = "in")]
    input: PathBuf,
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Treat the first row as data, not column names.
    #[arg(long)]
    no_header: bool,
}

impl InputArgs {
    fn options(&self, y: Option<&str>) -> CsvOptions {
        CsvOptions {
            delimiter: self.delimiter as u8,
            has_header: !self.no_header,
            y_column: y.map(str::to_owned),
            label_column: None,
        }
    }

    fn load(&self, y: Option<&str>) -> Result<Dataset> {
        let data = io::load_csv(&self.input, &self.options(y))?;
        for (row, reason) in &data.skipped {
            eprintln!("note: skipped row {row}: {reason}");
        }
        Ok(data)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum FitMethod {
    Ols,
    L1,
    Huber,
    Mm,
    Lts,
    Lasso,
    Enet,
    SparseLts,
    Pls,
    SsPls,
    Prm,
    Snipls,
    Sprm,
}

impl FitMethod {
    fn id(self) -> &'static str {
        match self {
            FitMethod::Ols => "ols",
            FitMethod::L1 => "l1",
            FitMethod::Huber => "huber",
            FitMethod::Mm => "mm",
            FitMethod::Lts => "lts",
            FitMethod::Lasso => "lasso",
            FitMethod::Enet => "enet",
            FitMethod::SparseLts => "sparse-lts",
            FitMethod::Pls => "pls",
            FitMethod::SsPls => "ss-pls",
            FitMethod::Prm => "prm",
            FitMethod::Snipls => "snipls",
            FitMethod::Sprm => "sprm",
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Response column name (or zero-based index).
    #[arg(long)]
    y: String,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: FitMethod,
    /// Latent components for the PLS family.
    #[arg(long)]
    components: Option<usize>,
    /// Sparsity level in [0, 1) for snipls/sprm.
    #[arg(long)]
    eta: Option<f64>,
    /// Tuning constant for the huber method.
    #[arg(long)]
    k: Option<f64>,
    /// Normal-model efficiency for the mm method.
    #[arg(long)]
    efficiency: Option<f64>,
    /// L1 penalty weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Squared-L2 penalty weight for enet.
    #[arg(long)]
    mu: Option<f64>,
    /// Trimmed subset size for lts/sparse-lts.
    #[arg(long)]
    subset: Option<usize>,
    /// Random starts for subsampled methods.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Saved model path.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Output predictions CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    y: String,
    #[arg(long)]
    out: PathBuf,
    /// pls, snipls or prm.
    #[arg(long, value_enum)]
    method: CvMethod,
    /// Component grid as lo:hi.
    #[arg(long)]
    components: String,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = validate::DEFAULT_CV_TRIM)]
    trim: f64,
    #[arg(long, default_value_t = validate::DEFAULT_CV_SPLITS)]
    splits: usize,
    #[arg(long, default_value_t = validate::DEFAULT_CV_TEST_FRACTION)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CvMethod {
    Pls,
    Snipls,
    Prm,
}

#[derive(Args, Debug)]
struct BootstrapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    y: String,
    #[arg(long)]
    out: PathBuf,
    /// ols, l1, huber or mm.
    #[arg(long, value_enum)]
    method: BootMethod,
    #[arg(long, default_value_t = validate::DEFAULT_BOOTSTRAP_M)]
    replicates: usize,
    /// Two-sided miss probability of the percentile interval.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = SpreadArg::Sd)]
    spread: SpreadArg,
    /// Tail fraction for the trimmed spread.
    #[arg(long, default_value_t = 0.1)]
    trim: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BootMethod {
    Ols,
    L1,
    Huber,
    Mm,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SpreadArg {
    Sd,
    Trimmed,
    Percentile,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    y: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    kind: DiagnoseKind,
    #[arg(long, value_enum)]
    method: DiagMethod,
    /// Predictor value of the varied point (influence curve).
    #[arg(long, default_value_t = 2.0)]
    at: f64,
    /// Response grid for the influence curve, as lo:hi:steps.
    #[arg(long, default_value = "-1000:1000:41")]
    z_grid: String,
    /// Contamination fractions for the bias curve, comma separated.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5")]
    fractions: String,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Bias threshold for the breakdown scan.
    #[arg(long, default_value_t = 100.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DiagnoseKind {
    Eif,
    Maxbias,
    Breakdown,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DiagMethod {
    Ols,
    L1,
    Huber,
    Lts,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario name.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct OutliersArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutlierMethod::Mcd)]
    method: OutlierMethod,
    /// Components of the score/orthogonal distance map.
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OutlierMethod {
    Mcd,
    Sd,
}

/// Parses and runs one invocation; returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Outliers(a) => cmd_outliers(a),
    }
}

fn need<T: Copy>(value: Option<T>, flag: &str, method: &str) -> Result<T> {
    value.ok_or_else(|| CliError::usage(format!("--{flag} is required for method {method}")))
}

fn regression_doc(fit: &RegressionFit, method: &str, config: serde_json::Value, predictors: Vec<String>, seed: u64) -> ModelDocument {
    ModelDocument {
        schema: model::SCHEMA_VERSION,
        method: method.to_owned(),
        predictors,
        config,
        seed,
        diagnostics: Diagnostics::from_weights(&fit.case_weights, fit.iterations, fit.converged),
        params: ModelParams::Linear {
            intercept: true,
            beta: fit.beta.iter().cloned().collect(),
            sigma: fit.sigma.value,
        },
    }
}

fn latent_doc(m: &pls::PlsModel, method: &str, config: serde_json::Value, predictors: Vec<String>, seed: u64) -> ModelDocument {
    ModelDocument {
        schema: model::SCHEMA_VERSION,
        method: method.to_owned(),
        predictors,
        config,
        seed,
        diagnostics: Diagnostics::from_weights(&m.case_weights, 0, true),
        params: ModelParams::LatentLinear {
            x_center: m.x_center.iter().cloned().collect(),
            x_scale: m.x_scale.iter().cloned().collect(),
            y_center: m.y_center[0],
            coefficients: m.coefficients.column(0).iter().cloned().collect(),
            components: m.n_components,
        },
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let data = a.input.load(Some(&a.y))?;
    let y = data.y.clone().expect("response requested");
    let mut config = json!({
        "command": "fit",
        "method": a.method.id(),
        "input": a.input.input.display().to_string(),
        "y": a.y,
        "seed": a.seed,
    });
    let seed = a.seed;
    let doc = match a.method {
        FitMethod::Pls | FitMethod::SsPls | FitMethod::Prm | FitMethod::Snipls | FitMethod::Sprm => {
            let k = need(a.components, "components", a.method.id())?;
            config["components"] = json!(k);
            let m = match a.method {
                FitMethod::Pls => {
                    let ym = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
                    pls::pls_fit(&data.x, &ym, k)?
                }
                FitMethod::SsPls => pls::spatial_sign_pls(&data.x, &y, k)?,
                FitMethod::Prm => {
                    let cfg = pls::PrmConfig { seed, ..pls::PrmConfig::default() };
                    pls::prm_fit(&data.x, &y, k, &cfg)?
                }
                FitMethod::Snipls => {
                    let eta = need(a.eta, "eta", "snipls")?;
                    config["eta"] = json!(eta);
                    pls::snipls_fit(&data.x, &y, k, eta)?
                }
                FitMethod::Sprm => {
                    let eta = need(a.eta, "eta", "sprm")?;
                    config["eta"] = json!(eta);
                    let cfg = pls::PrmConfig { seed, ..pls::PrmConfig::default() };
                    pls::sprm_fit(&data.x, &y, k, eta, &cfg)?
                }
                _ => unreachable!(),
            };
            latent_doc(&m, a.method.id(), config, data.names.clone(), seed)
        }
        _ => {
            let problem = RegressionProblem::with_intercept(data.x.clone(), y)?;
            let fit = match a.method {
                FitMethod::Ols => regress::ols_fit(&problem)?,
                FitMethod::L1 => regress::l1_fit(&problem)?,
                FitMethod::Huber => {
                    let k = a.k.unwrap_or(1.345);
                    config["k"] = json!(k);
                    regress::m_fit(&problem, RhoFamily::Huber { k }, None, None)?
                }
                FitMethod::Mm => {
                    let efficiency = a.efficiency.unwrap_or(0.85);
                    let k = regress::efficiency_to_k(efficiency)?;
                    config["efficiency"] = json!(efficiency);
                    config["k"] = json!((k * 100.0).round() / 100.0);
                    regress::mm_fit(&problem, efficiency, seed)?
                }
                FitMethod::Lts => {
                    let h = a.subset.unwrap_or_else(|| regress::default_h(problem.n(), problem.p()));
                    config["subset"] = json!(h);
                    regress::scale_min_fit(&problem, regress::ScaleSpec::Trimmed { h }, a.starts, seed)?
                }
                FitMethod::Lasso => {
                    let lambda = need(a.lambda, "lambda", "lasso")?;
                    config["lambda"] = json!(lambda);
                    sparse::lasso_fit(&problem, lambda)?
                }
                FitMethod::Enet => {
                    let lambda = need(a.lambda, "lambda", "enet")?;
                    let mu = need(a.mu, "mu", "enet")?;
                    config["lambda"] = json!(lambda);
                    config["mu"] = json!(mu);
                    sparse::enet_fit(&problem, lambda, mu)?
                }
                FitMethod::SparseLts => {
                    let lambda = need(a.lambda, "lambda", "sparse-lts")?;
                    let h = a.subset.unwrap_or_else(|| regress::default_h(problem.n(), problem.p()));
                    config["lambda"] = json!(lambda);
                    config["subset"] = json!(h);
                    sparse::sparse_lts_fit(&problem, lambda, h, a.starts, seed)?
                }
                _ => unreachable!(),
            };
            regression_doc(&fit, a.method.id(), config, data.names.clone(), seed)
        }
    };
    model::save(&a.out, &doc)?;
    println!("saved {} model to {} (seed {seed})", doc.method, a.out.display());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let doc = model::load(&a.model)?;
    let data = a.input.load(None)?;
    let x = align_predictors(&doc, &data)?;
    let pred = model::predict(&doc, &x)?;
    let config = json!({
        "command": "predict",
        "model": a.model.display().to_string(),
        "input": a.input.input.display().to_string(),
        "seed": doc.seed,
    });
    let rows: Vec<Vec<String>> = pred.iter().map(|&v| vec![io::fmt17(v)]).collect();
    io::write_table(&a.out, &config, &["prediction"], &rows)
}

/// Reorders the dataset's columns to the model's predictor order; without
/// a header the column count must match exactly.
fn align_predictors(doc: &ModelDocument, data: &Dataset) -> Result<DMatrix<f64>> {
    let generated = data.names.iter().enumerate().all(|(j, n)| *n == format!("x{}", j + 1));
    if generated {
        if data.x.ncols() != doc.predictors.len() {
            return Err(CliError::failure(format!(
                "model expects {} predictors, data has {}",
                doc.predictors.len(),
                data.x.ncols()
            )));
        }
        return Ok(data.x.clone());
    }
    let mut cols = Vec::with_capacity(doc.predictors.len());
    for name in &doc.predictors {
        let j = data
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CliError::failure(format!("predictor column '{name}' missing")))?;
        cols.push(j);
    }
    Ok(DMatrix::from_fn(data.x.nrows(), cols.len(), |i, j| {
        data.x[(i, cols[j])]
    }))
}

fn parse_range(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::usage(format!("bad range '{text}', expected lo:hi")));
    }
    let lo: usize = parts[0].parse().map_err(|_| CliError::usage(format!("bad range '{text}'")))?;
    let hi: usize = parts[1].parse().map_err(|_| CliError::usage(format!("bad range '{text}'")))?;
    if lo == 0 || hi < lo {
        return Err(CliError::usage(format!("bad range '{text}'")));
    }
    Ok((lo..=hi).collect())
}

fn cmd_cv(a: CvArgs) -> Result<()> {
    let data = a.input.load(Some(&a.y))?;
    let y = data.y.clone().expect("response requested");
    let grid = parse_range(&a.components)?;
    let x = data.x.clone();
    let seed = a.seed;
    let eta = a.eta;
    let method = a.method;
    let report = validate::monte_carlo_cv(
        move |k, train, test| {
            let xt = DMatrix::from_fn(train.len(), x.ncols(), |i, j| x[(train[i], j)]);
            let yt = DVector::from_fn(train.len(), |i, _| y[train[i]]);
            let m = match method {
                CvMethod::Pls => {
                    let ym = DMatrix::from_column_slice(yt.len(), 1, yt.as_slice());
                    pls::pls_fit(&xt, &ym, k)?
                }
                CvMethod::Snipls => pls::snipls_fit(&xt, &yt, k, eta.unwrap_or(0.0))?,
                CvMethod::Prm => {
                    let cfg = pls::PrmConfig { seed, ..pls::PrmConfig::default() };
                    pls::prm_fit(&xt, &yt, k, &cfg)?
                }
            };
            let xs = DMatrix::from_fn(test.len(), x.ncols(), |i, j| x[(test[i], j)]);
            let pred = pls::predict(&m, &xs)?;
            Ok(DVector::from_fn(test.len(), |i, _| y[test[i]] - pred[(i, 0)]))
        },
        data.x.nrows(),
        &grid,
        a.splits,
        a.test_fraction,
        a.trim,
        a.seed,
    )?;
    let config = json!({
        "command": "cv",
        "method": format!("{:?}", a.method).to_lowercase(),
        "input": a.input.input.display().to_string(),
        "y": a.y,
        "components": a.components,
        "eta": a.eta,
        "trim": a.trim,
        "splits": a.splits,
        "test_fraction": a.test_fraction,
        "seed": a.seed,
        "chosen": report.chosen,
    });
    let rows: Vec<Vec<String>> = report
        .grid
        .iter()
        .enumerate()
        .map(|(g, &k)| {
            vec![
                k.to_string(),
                io::fmt17(report.error[g]),
                io::fmt17(report.std_error[g]),
                report.failures[g].to_string(),
                usize::from(k == report.chosen).to_string(),
            ]
        })
        .collect();
    io::write_table(&a.out, &config, &["components", "error", "std_error", "failures", "chosen"], &rows)?;
    println!("chosen components: {}", report.chosen);
    Ok(())
}

fn boot_fit(method: BootMethod, problem: &RegressionProblem, seed: u64) -> robustmv::error::Result<RegressionFit> {
    match method {
        BootMethod::Ols => regress::ols_fit(problem),
        BootMethod::L1 => regress::l1_fit(problem),
        BootMethod::Huber => regress::m_fit(problem, RhoFamily::Huber { k: 1.345 }, None, None),
        BootMethod::Mm => regress::mm_fit(problem, 0.85, seed),
    }
}

fn cmd_bootstrap(a: BootstrapArgs) -> Result<()> {
    let data = a.input.load(Some(&a.y))?;
    let y = data.y.clone().expect("response requested");
    let x = data.x.clone();
    let full = {
        let problem = RegressionProblem::with_intercept(x.clone(), y.clone())?;
        boot_fit(a.method, &problem, a.seed)?
    };
    let spread = match a.spread {
        SpreadArg::Sd => validate::SpreadKind::Sd,
        SpreadArg::Trimmed => validate::SpreadKind::Trimmed(a.trim),
        SpreadArg::Percentile => validate::SpreadKind::Percentile,
    };
    let method = a.method;
    let seed = a.seed;
    let report = validate::bootstrap(
        move |idx| {
            let xb = DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)]);
            let yb = DVector::from_fn(idx.len(), |i, _| y[idx[i]]);
            let problem = RegressionProblem::with_intercept(xb, yb)?;
            Ok(boot_fit(method, &problem, seed)?.beta)
        },
        data.x.nrows(),
        a.replicates,
        a.alpha,
        spread,
        a.seed,
    )?;
    let config = json!({
        "command": "bootstrap",
        "method": format!("{:?}", a.method).to_lowercase(),
        "input": a.input.input.display().to_string(),
        "y": a.y,
        "replicates": a.replicates,
        "alpha": a.alpha,
        "spread": format!("{:?}", a.spread).to_lowercase(),
        "trim": a.trim,
        "seed": a.seed,
        "failures": report.failures,
    });
    let mut names = vec!["intercept".to_owned()];
    names.extend(data.names.iter().cloned());
    let rows: Vec<Vec<String>> = (0..full.beta.len())
        .map(|j| {
            vec![
                names[j].clone(),
                io::fmt17(full.beta[j]),
                io::fmt17(report.spread[j]),
                io::fmt17(report.lower[j]),
                io::fmt17(report.upper[j]),
            ]
        })
        .collect();
    io::write_table(&a.out, &config, &["coefficient", "estimate", "spread", "lower", "upper"], &rows)
}

fn diag_statistic(
    method: DiagMethod,
    seed: u64,
) -> impl Fn(&DMatrix<f64>) -> robustmv::error::Result<DVector<f64>> + Sync {
    move |joint: &DMatrix<f64>| {
        let p = joint.ncols() - 1;
        let x = DMatrix::from_fn(joint.nrows(), p, |i, j| joint[(i, j)]);
        let y = DVector::from_fn(joint.nrows(), |i, _| joint[(i, p)]);
        let problem = RegressionProblem::with_intercept(x, y)?;
        let fit = match method {
            DiagMethod::Ols => regress::ols_fit(&problem)?,
            DiagMethod::L1 => regress::l1_fit(&problem)?,
            DiagMethod::Huber => regress::m_fit(&problem, RhoFamily::Huber { k: 1.345 }, None, None)?,
            DiagMethod::Lts => {
                let h = regress::default_h(problem.n(), problem.p());
                regress::scale_min_fit(&problem, regress::ScaleSpec::Trimmed { h }, Some(100), seed)?
            }
        };
        Ok(fit.beta)
    }
}

fn joint_matrix(data: &Dataset) -> DMatrix<f64> {
    let (n, p) = (data.x.nrows(), data.x.ncols());
    let y = data.y.as_ref().expect("response requested");
    DMatrix::from_fn(n, p + 1, |i, j| if j < p { data.x[(i, j)] } else { y[i] })
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<()> {
    let data = a.input.load(Some(&a.y))?;
    let joint = joint_matrix(&data);
    let n = joint.nrows();
    let statistic = diag_statistic(a.method, a.seed);
    let mut config = json!({
        "command": "diagnose",
        "kind": format!("{:?}", a.kind).to_lowercase(),
        "method": format!("{:?}", a.method).to_lowercase(),
        "input": a.input.input.display().to_string(),
        "y": a.y,
        "seed": a.seed,
    });
    match a.kind {
        DiagnoseKind::Eif => {
            if joint.ncols() != 2 {
                return Err(CliError::usage("influence curves need exactly one predictor"));
            }
            let parts: Vec<&str> = a.z_grid.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::usage("z grid must be lo:hi:steps"));
            }
            let lo: f64 = parts[0].parse().map_err(|_| CliError::usage("bad z grid"))?;
            let hi: f64 = parts[1].parse().map_err(|_| CliError::usage("bad z grid"))?;
            let steps: usize = parts[2].parse().map_err(|_| CliError::usage("bad z grid"))?;
            if steps < 2 || hi <= lo {
                return Err(CliError::usage("bad z grid"));
            }
            config["at"] = json!(a.at);
            config["z_grid"] = json!(a.z_grid);
            let zs: Vec<f64> = (0..steps)
                .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
                .collect();
            let grid: Vec<DVector<f64>> = zs
                .iter()
                .map(|&z| DVector::from_column_slice(&[a.at, z]))
                .collect();
            let eif = validate::empirical_influence(&statistic, &joint, None, &grid)?;
            let rows: Vec<Vec<String>> = zs
                .iter()
                .zip(&eif)
                .map(|(&z, e)| {
                    let mut row = vec![io::fmt17(z)];
                    row.extend(e.iter().map(|&v| io::fmt17(v)));
                    row
                })
                .collect();
            io::write_table(&a.out, &config, &["z", "eif_intercept", "eif_slope"], &rows)
        }
        DiagnoseKind::Maxbias => {
            let fractions: std::result::Result<Vec<f64>, _> =
                a.fractions.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let fractions = fractions.map_err(|_| CliError::usage("bad fractions list"))?;
            let m_grid: Vec<usize> = fractions
                .iter()
                .map(|f| ((f * n as f64).round() as usize).clamp(1, n))
                .collect();
            config["fractions"] = json!(a.fractions);
            config["trials"] = json!(a.trials);
            let contamination = vertical_contamination(&joint);
            let curve =
                validate::empirical_maxbias(&statistic, &joint, &contamination, &m_grid, a.trials, a.seed)?;
            let rows: Vec<Vec<String>> = m_grid
                .iter()
                .zip(&curve)
                .map(|(&m, &b)| vec![m.to_string(), io::fmt17(m as f64 / n as f64), io::fmt17(b)])
                .collect();
            io::write_table(&a.out, &config, &["replaced", "fraction", "bias"], &rows)
        }
        DiagnoseKind::Breakdown => {
            config["threshold"] = json!(a.threshold);
            config["trials"] = json!(a.trials);
            let contamination = vertical_contamination(&joint);
            let scan = validate::breakdown_scan(
                &statistic,
                &joint,
                &contamination,
                a.threshold,
                a.trials,
                a.seed,
            )?;
            let rows = vec![vec![
                io::fmt17(scan.fraction),
                usize::from(scan.exceeded).to_string(),
            ]];
            io::write_table(&a.out, &config, &["fraction", "exceeded"], &rows)
        }
    }
}

/// Vertical outliers: moderate predictor offsets, gross response offsets.
fn vertical_contamination(joint: &DMatrix<f64>) -> validate::Contamination {
    let p = joint.ncols();
    let low = DVector::from_fn(p, |j, _| if j + 1 == p { 1.0e4 } else { 0.0 });
    let high = DVector::from_fn(p, |j, _| if j + 1 == p { 1.0e5 } else { 10.0 });
    validate::Contamination::ShiftRange { low, high }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let s = sim::simulate_scenario(&a.scenario, a.seed).map_err(|e| match e {
        robustmv::error::Error::InvalidInput(msg) => CliError::usage(msg),
        other => CliError::from(other),
    })?;
    let config = json!({
        "command": "simulate",
        "scenario": a.scenario,
        "seed": a.seed,
    });
    let mut header: Vec<String> = (1..=s.x.ncols()).map(|j| format!("x{j}")).collect();
    if s.y.is_some() {
        header.push("y".into());
    }
    if s.labels.is_some() {
        header.push("label".into());
    }
    header.push("outlier".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..s.x.nrows())
        .map(|i| {
            let mut row: Vec<String> = (0..s.x.ncols()).map(|j| io::fmt17(s.x[(i, j)])).collect();
            if let Some(y) = &s.y {
                row.push(io::fmt17(y[i]));
            }
            if let Some(labels) = &s.labels {
                row.push(labels[i].to_string());
            }
            row.push(usize::from(s.outliers.contains(&i)).to_string());
            row
        })
        .collect();
    io::write_table(&a.out, &config, &header_refs, &rows)
}

fn cmd_outliers(a: OutliersArgs) -> Result<()> {
    let data = a.input.load(None)?;
    let x = &data.x;
    let est = match a.method {
        OutlierMethod::Mcd => loccov::mcd_fit(x, a.subset, a.starts, a.seed)?,
        OutlierMethod::Sd => loccov::stahel_donoho_fit(x, a.starts, a.seed)?,
    };
    let q = a.components.unwrap_or_else(|| x.ncols().min(3).min(x.nrows() - 1));
    let pca = pca::spherical_pca(x, q)?;
    let scores = pca.scores(x);
    let config = json!({
        "command": "outliers",
        "method": format!("{:?}", a.method).to_lowercase(),
        "input": a.input.input.display().to_string(),
        "components": q,
        "seed": a.seed,
    });
    let rows: Vec<Vec<String>> = (0..x.nrows())
        .map(|i| {
            let mut sd2 = 0.0;
            for c in 0..q {
                let lambda = pca.eigenvalues[c].max(1e-300);
                sd2 += scores[(i, c)] * scores[(i, c)] / lambda;
            }
            let centered = x.row(i).transpose() - &pca.center;
            let od = (&centered - &pca.loadings * scores.row(i).transpose()).norm();
            vec![
                (i + 1).to_string(),
                io::fmt17(est.distances[i]),
                io::fmt17(est.case_weights[i]),
                io::fmt17(sd2.sqrt()),
                io::fmt17(od),
            ]
        })
        .collect();
    io::write_table(
        &a.out,
        &config,
        &["case", "robust_distance", "case_weight", "score_distance", "orthogonal_distance"],
        &rows,
    )
}
