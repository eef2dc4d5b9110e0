//! Supervised regressors for the two nuisance functions: the outcome
//! regression `E[Y | Z]` and the propensity `E[X | Z]`.
//!
//! Every family is fitted through [`RegressorSpec`] and produces an immutable
//! [`FittedRegressor`] with a single prediction contract.

mod forest;
mod gbt;
mod logistic;
pub mod tree;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventTable, FeatureEncoder};
use crate::stats::{expit, mean};

pub use forest::{Forest, ForestParams, OobCell};
pub use gbt::{BoostParams, Booster, CvCell, Loss};
pub use logistic::{fit_logistic, fit_logistic_named, LogisticFit, MAX_ITERATIONS, TOLERANCE};
pub(crate) use logistic::collinear_columns;
pub(crate) use gbt::fold_assignment;

/// Probability-mode predictions are clipped to `[CLIP, 1 − CLIP]`.
pub const CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LogisticLinear,
    Gbt,
    Forest,
    Constant,
}

/// Candidate-feature rule for forest splits, resolved against the feature count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mtry {
    One,
    Sqrt,
    All,
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            Mtry::One => 1,
            Mtry::Sqrt => ((p as f64).sqrt().round() as usize).max(1),
            Mtry::All => p,
            Mtry::Fixed(k) => k,
        }
    }
}

/// Hyperparameter grids for boosting (cross-validated) and forests (OOB-tuned).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub learning_rates: Vec<f64>,
    pub gbt_depths: Vec<usize>,
    pub patience: usize,
    pub folds: usize,
    pub max_rounds: usize,
    pub min_child_weight: f64,
    pub hessian_floor: f64,
    pub forest_mtry: Vec<Mtry>,
    pub forest_depths: Vec<usize>,
    pub trees: usize,
    pub min_node_size: usize,
}

impl TuningGrid {
    /// Six learning rates by six depths for boosting; `{1, √p, p}` candidates
    /// and depths 1 through 5 for forests of 500 trees.
    pub fn standard() -> Self {
        TuningGrid {
            learning_rates: vec![0.001, 0.005, 0.01, 0.1, 0.5, 1.0],
            gbt_depths: vec![1, 3, 4, 5, 7, 9],
            patience: 20,
            folds: 5,
            max_rounds: 1000,
            min_child_weight: 1.0,
            hessian_floor: 1e-6,
            forest_mtry: vec![Mtry::One, Mtry::Sqrt, Mtry::All],
            forest_depths: vec![1, 2, 3, 4, 5],
            trees: 500,
            min_node_size: 5,
        }
    }

    /// A single-cell grid, handy for simulations.
    pub fn single_forest(trees: usize, mtry: Mtry, depth: usize) -> Self {
        TuningGrid {
            forest_mtry: vec![mtry],
            forest_depths: vec![depth],
            trees,
            ..Self::standard()
        }
    }

    pub fn single_gbt(learning_rate: f64, depth: usize) -> Self {
        TuningGrid {
            learning_rates: vec![learning_rate],
            gbt_depths: vec![depth],
            ..Self::standard()
        }
    }

    pub fn gbt_cells(&self) -> Vec<(f64, usize)> {
        self.learning_rates
            .iter()
            .flat_map(|&lr| self.gbt_depths.iter().map(move |&d| (lr, d)))
            .collect()
    }

    /// Distinct candidate-feature counts for `p` features, ascending.
    pub fn forest_candidates(&self, p: usize) -> Vec<usize> {
        let mut c: Vec<usize> = self.forest_mtry.iter().map(|m| m.resolve(p)).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.learning_rates.iter().any(|&r| !(r > 0.0))
            || self.gbt_depths.contains(&0)
            || self.forest_depths.contains(&0)
            || self.folds == 0
            || self.patience == 0
            || self.trees == 0
        {
            return Err(Error::Config("grid values must be positive".into()));
        }
        if let Some(&k) = self.forest_candidates(p).iter().find(|&&k| k == 0 || k > p) {
            return Err(Error::Config(format!(
                "candidate feature count {k} outside 1..={p}"
            )));
        }
        Ok(())
    }
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self::standard()
    }
}

/// What to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorSpec {
    /// Linear-logistic model with an intercept, fitted by IRLS.
    Logistic,
    Gbt { grid: TuningGrid, loss: Loss },
    Forest { grid: TuningGrid, probability: bool },
    /// A fixed prediction, e.g. `0` to switch residualization off.
    Constant(f64),
    /// The training-target mean.
    Mean,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub training_rows: usize,
    /// IRLS steps or boosting rounds retained.
    pub iterations: usize,
    pub log_likelihood: Option<f64>,
    pub cv_loss: Option<f64>,
    pub oob_loss: Option<f64>,
    pub cv_table: Vec<CvCell>,
    pub oob_table: Vec<OobCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Model {
    Logistic { coefficients: Vec<f64>, intercept: bool },
    Boosted(Booster),
    Forest(Forest),
    Constant(f64),
}

/// A fitted prediction function with its provenance. Never mutated after fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRegressor {
    family: Family,
    probability: bool,
    feature_names: Vec<String>,
    encoder: Option<FeatureEncoder>,
    model: Model,
    hyperparameters: BTreeMap<String, f64>,
    diagnostics: Diagnostics,
    oob: Option<Vec<f64>>,
}

impl RegressorSpec {
    /// Fits on a dense design. `names` label the design columns.
    pub fn fit_matrix(&self, x: &DMatrix<f64>, y: &[f64], names: &[String], seed: u64) -> Result<FittedRegressor> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::InvalidInput(format!("{} targets for {n} rows", y.len())));
        }
        if names.len() != p {
            return Err(Error::InvalidInput(format!("{} names for {p} columns", names.len())));
        }
        if n == 0 {
            return Err(Error::InvalidInput("no training rows".into()));
        }
        let mut hp = BTreeMap::new();
        let mut diag = Diagnostics {
            training_rows: n,
            ..Diagnostics::default()
        };
        let binary = y.iter().all(|&v| v == 0.0 || v == 1.0);
        let (family, probability, model, oob) = match self {
            RegressorSpec::Logistic => {
                let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
                let mut all_names = vec!["(Intercept)".to_string()];
                all_names.extend(names.iter().cloned());
                let fit = fit_logistic_named(&design, y, &all_names)?;
                diag.iterations = fit.iterations;
                diag.log_likelihood = Some(fit.log_likelihood);
                (
                    Family::LogisticLinear,
                    true,
                    Model::Logistic {
                        coefficients: fit.coefficients,
                        intercept: true,
                    },
                    None,
                )
            }
            RegressorSpec::Gbt { grid, loss } => {
                grid.validate(p.max(1))?;
                let sel = gbt::select_gbt(
                    x,
                    y,
                    *loss,
                    &gbt::GbtOptions {
                        learning_rates: &grid.learning_rates,
                        max_depths: &grid.gbt_depths,
                        folds: grid.folds,
                        patience: grid.patience,
                        max_rounds: grid.max_rounds,
                        min_child_weight: grid.min_child_weight,
                        hessian_floor: grid.hessian_floor,
                        seed,
                    },
                )?;
                hp.insert("learning_rate".into(), sel.chosen.learning_rate);
                hp.insert("max_depth".into(), sel.chosen.max_depth as f64);
                hp.insert("rounds".into(), sel.chosen.best_rounds as f64);
                diag.iterations = sel.booster.trees.len();
                diag.cv_loss = Some(sel.chosen.mean_valid_loss);
                diag.cv_table = sel.cv_table;
                (Family::Gbt, *loss == Loss::Logistic, Model::Boosted(sel.booster), None)
            }
            RegressorSpec::Forest { grid, probability } => {
                grid.validate(p.max(1))?;
                if *probability && y.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidInput("probability forest needs targets in [0, 1]".into()));
                }
                let sel = forest::select_forest(
                    x,
                    y,
                    &grid.forest_candidates(p.max(1)),
                    &grid.forest_depths,
                    grid.trees,
                    grid.min_node_size,
                    seed,
                )?;
                hp.insert("mtry".into(), sel.chosen.mtry as f64);
                hp.insert("max_depth".into(), sel.chosen.max_depth as f64);
                hp.insert("trees".into(), sel.chosen.trees as f64);
                hp.insert("min_node_size".into(), sel.chosen.min_node_size as f64);
                diag.oob_loss = Some(sel.fit.oob_loss);
                diag.oob_table = sel.table;
                (Family::Forest, *probability, Model::Forest(sel.fit.forest), Some(sel.fit.oob))
            }
            RegressorSpec::Constant(c) => (Family::Constant, false, Model::Constant(*c), None),
            RegressorSpec::Mean => (Family::Constant, binary, Model::Constant(mean(y)), None),
        };
        let mut fitted = FittedRegressor {
            family,
            probability,
            feature_names: names.to_vec(),
            encoder: None,
            model,
            hyperparameters: hp,
            diagnostics: diag,
            oob: None,
        };
        fitted.oob = oob.map(|v| v.into_iter().map(|p| fitted.finish(p)).collect());
        Ok(fitted)
    }

    /// Fits on the encoded features of `table`.
    pub fn fit_table(&self, table: &EventTable, encoder: &FeatureEncoder, y: &[f64], seed: u64) -> Result<FittedRegressor> {
        let x = encoder.transform(table)?;
        let mut fitted = self.fit_matrix(&x, y, &encoder.output_names(), seed)?;
        fitted.encoder = Some(encoder.clone());
        Ok(fitted)
    }
}

impl FittedRegressor {
    /// Wraps a raw logistic fit whose design already contains any intercept column.
    pub fn from_logistic(fit: &LogisticFit, feature_names: Vec<String>) -> Self {
        FittedRegressor {
            family: Family::LogisticLinear,
            probability: true,
            feature_names,
            encoder: None,
            model: Model::Logistic {
                coefficients: fit.coefficients.clone(),
                intercept: false,
            },
            hyperparameters: BTreeMap::new(),
            diagnostics: Diagnostics {
                iterations: fit.iterations,
                log_likelihood: Some(fit.log_likelihood),
                ..Diagnostics::default()
            },
            oob: None,
        }
    }

    /// Constant prediction over `p` features.
    pub fn constant(value: f64, feature_names: Vec<String>) -> Self {
        FittedRegressor {
            family: Family::Constant,
            probability: false,
            feature_names,
            encoder: None,
            model: Model::Constant(value),
            hyperparameters: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
            oob: None,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encoder(&self) -> Option<&FeatureEncoder> {
        self.encoder.as_ref()
    }

    pub fn hyperparameters(&self) -> &BTreeMap<String, f64> {
        &self.hyperparameters
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn supports_oob(&self) -> bool {
        self.oob.is_some()
    }

    /// Out-of-bag predictions for the training rows (forests only).
    pub fn oob_predictions(&self) -> Option<&[f64]> {
        self.oob.as_deref()
    }

    /// Logistic coefficients, intercept first when present.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Logistic { coefficients, .. } => Some(coefficients),
            _ => None,
        }
    }

    pub fn trees(&self) -> Option<&[tree::Tree]> {
        match &self.model {
            Model::Boosted(b) => Some(&b.trees),
            Model::Forest(f) => Some(&f.trees),
            _ => None,
        }
    }

    fn finish(&self, v: f64) -> f64 {
        if self.probability {
            v.clamp(CLIP, 1.0 - CLIP)
        } else {
            v
        }
    }

    /// Prediction for one encoded feature row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let raw = match &self.model {
            Model::Logistic {
                coefficients,
                intercept,
            } => {
                let (b0, rest) = if *intercept {
                    (coefficients[0], &coefficients[1..])
                } else {
                    (0.0, &coefficients[..])
                };
                expit(b0 + row.iter().zip(rest).map(|(x, b)| x * b).sum::<f64>())
            }
            Model::Boosted(b) => b.predict_row(row),
            Model::Forest(f) => f.predict_row(row),
            Model::Constant(c) => *c,
        };
        self.finish(raw)
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, design has {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        let mut row = vec![0.0; x.ncols()];
        Ok((0..x.nrows())
            .map(|i| {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = x[(i, j)];
                }
                self.predict_row(&row)
            })
            .collect())
    }

    /// Predictions for every row of `table`, through the stored feature encoder.
    pub fn predict(&self, table: &EventTable) -> Result<Vec<f64>> {
        let enc = self.encoder.as_ref().ok_or_else(|| {
            Error::SchemaMismatch("model was fitted on a bare design and has no feature encoder".into())
        })?;
        self.predict_matrix(&enc.transform(table)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFileRef {
            format_version: FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
        if version > u64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch {
                found: version as u32,
                supported: FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
        Ok(file.model)
    }
}

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format_version: u32,
    model: &'a FittedRegressor,
}

#[derive(Deserialize)]
struct ModelFile {
    #[allow(dead_code)]
    format_version: u32,
    model: FittedRegressor,
}

pub fn save_model(model: &FittedRegressor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedRegressor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FittedRegressor::from_json(&text)
}

/// Convenience wrappers mirroring the individual fitting routines.
pub fn fit_gbt(x: &DMatrix<f64>, y: &[f64], grid: &TuningGrid, loss: Loss, seed: u64) -> Result<FittedRegressor> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    RegressorSpec::Gbt {
        grid: grid.clone(),
        loss,
    }
    .fit_matrix(x, y, &names, seed)
}

pub fn fit_forest(x: &DMatrix<f64>, y: &[f64], grid: &TuningGrid, probability: bool, seed: u64) -> Result<FittedRegressor> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    RegressorSpec::Forest {
        grid: grid.clone(),
        probability,
    }
    .fit_matrix(x, y, &names, seed)
}
