//! Per-actor classical and residualized metrics with inference.
//!
//! A classical metric sums `Y − ĥ(Z)` over an actor's rows. The residualized
//! metric sums `(Y − ĥ(Z))(X − f̂(Z))` over all rows, where `X` marks the
//! actor's rows and `f̂` is that actor's propensity. Goalkeeper metrics flip
//! the sign so that saves count positively.

mod report;
mod robustness;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{actor_indicator, Discipline, EventTable, FeatureEncoder};
use crate::gcm::{confidence_interval, gcm_from_residuals, non_nil_test, Direction, GcmResult, IntervalSpec};
use crate::multiplicity::{adjust, AdjustmentMethod};
use crate::regress::{fold_assignment, FittedRegressor, Mtry, RegressorSpec, TuningGrid};
use crate::seed;
use crate::stats::{pairwise_sum, pearson};

pub use report::{ActorEvaluation, ActorFailure, EvaluationReport, Provenance, DEPENDENCE_CAVEAT};
pub use robustness::{compare_models_robustness, ModelPair, RobustnessActor, RobustnessReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Goals above expectation (shooters).
    #[default]
    Gax,
    /// Goals saved above expectation (keepers, on-target shots).
    Gsax,
    /// Quantified shooter impact (basketball).
    Qsi,
    /// Completion percentage above expectation (passers).
    Cpae,
    /// Injuries above expectation (censored injury spells).
    Iax,
}

impl MetricKind {
    pub fn sign_flip(self) -> bool {
        self == MetricKind::Gsax
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Gax => "gax",
            MetricKind::Gsax => "gsax",
            MetricKind::Qsi => "qsi",
            MetricKind::Cpae => "cpae",
            MetricKind::Iax => "iax",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gax" => Ok(MetricKind::Gax),
            "gsax" => Ok(MetricKind::Gsax),
            "qsi" => Ok(MetricKind::Qsi),
            "cpae" => Ok(MetricKind::Cpae),
            "iax" => Ok(MetricKind::Iax),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

/// How basketball outcomes enter the metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeMode {
    /// Made or missed.
    #[default]
    Indicator,
    /// Points scored: 0, 2 or 3.
    ScoreValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossFitting {
    /// In-sample propensity predictions.
    None,
    /// Out-of-bag predictions of a forest propensity.
    Oob,
    /// Held-out predictions from `k` folds. The outcome model is cross-fitted
    /// too when [`MetricConfig::outcome_refit`] is set.
    KFold(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub metric: MetricKind,
    pub outcome_mode: OutcomeMode,
    pub propensity: RegressorSpec,
    pub cross_fitting: CrossFitting,
    /// Needed to refit the outcome model (k-fold cross-fitting, actor exclusion).
    pub outcome_refit: Option<RegressorSpec>,
    /// Refit the outcome model without the evaluated actor's rows.
    pub exclude_actor: bool,
    pub interval: IntervalSpec,
    /// Alternative for the raw p-value; `interval.rho0` sets a non-nil null.
    pub direction: Direction,
    pub adjustment: AdjustmentMethod,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            metric: MetricKind::Gax,
            outcome_mode: OutcomeMode::Indicator,
            propensity: RegressorSpec::Forest {
                grid: TuningGrid::standard(),
                probability: true,
            },
            cross_fitting: CrossFitting::Oob,
            outcome_refit: None,
            exclude_actor: false,
            interval: IntervalSpec::default(),
            direction: Direction::TwoSided,
            adjustment: AdjustmentMethod::BenjaminiHochberg,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn new(metric: MetricKind) -> Self {
        MetricConfig {
            metric,
            ..Self::default()
        }
    }

    /// Propensity fixed at zero: the residualized metric collapses to the classical one.
    pub fn without_propensity(metric: MetricKind) -> Self {
        MetricConfig {
            metric,
            propensity: RegressorSpec::Constant(0.0),
            cross_fitting: CrossFitting::None,
            ..Self::default()
        }
    }

    /// A cheaper forest propensity for simulations and tests.
    pub fn with_forest(mut self, trees: usize, mtry: Mtry, depth: usize) -> Self {
        self.propensity = RegressorSpec::Forest {
            grid: TuningGrid::single_forest(trees, mtry, depth),
            probability: true,
        };
        self.cross_fitting = CrossFitting::Oob;
        self
    }

    pub fn validate(&self, table: &EventTable) -> Result<()> {
        self.interval.validate()?;
        let d = table.discipline();
        let ok = match self.metric {
            MetricKind::Gax => matches!(d, Discipline::Shot | Discipline::ShotOnTarget),
            MetricKind::Gsax => {
                d == Discipline::ShotOnTarget || table.rows().iter().all(|r| r.on_target == Some(true))
            }
            MetricKind::Qsi => d == Discipline::BasketballShot,
            MetricKind::Cpae => d == Discipline::Pass,
            MetricKind::Iax => d == Discipline::InjurySpell,
        };
        if !ok {
            let need = match self.metric {
                MetricKind::Gsax => "an on-target shot table",
                MetricKind::Qsi => "a basketball-shot table",
                MetricKind::Cpae => "a pass table",
                MetricKind::Gax => "a shot table",
                MetricKind::Iax => "an injury-spell table",
            };
            return Err(Error::Config(format!("{} needs {need}, got {}", self.metric, d.as_str())));
        }
        if self.outcome_mode == OutcomeMode::ScoreValue && self.metric != MetricKind::Qsi {
            return Err(Error::Config("score-value outcomes are only defined for basketball".into()));
        }
        match (&self.cross_fitting, &self.propensity) {
            (CrossFitting::Oob, RegressorSpec::Forest { .. }) => {}
            (CrossFitting::Oob, _) => {
                return Err(Error::Config("out-of-bag cross-fitting needs a forest propensity".into()))
            }
            (CrossFitting::KFold(k), _) if *k < 2 => {
                return Err(Error::Config("k-fold cross-fitting needs at least 2 folds".into()))
            }
            _ => {}
        }
        if self.exclude_actor && self.outcome_refit.is_none() {
            return Err(Error::Config("actor exclusion needs an outcome model spec to refit".into()));
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a digest of the serialized config.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Outcome column used by the metric.
pub fn metric_outcomes(table: &EventTable, config: &MetricConfig) -> Vec<f64> {
    match (config.metric, config.outcome_mode) {
        (MetricKind::Qsi, OutcomeMode::ScoreValue) => table.outcomes(),
        _ => table.indicator_outcomes(),
    }
}

/// Σ over the actor's rows of `Y − ĥ(Z)`, negated when `sign_flip`.
pub fn compute_classical(table: &EventTable, actor: &str, outcome_model: &FittedRegressor, sign_flip: bool) -> Result<f64> {
    let h = outcome_predictions(table, outcome_model)?;
    let x = actor_indicator(table, actor)?;
    Ok(classical_from(&table.outcomes(), &h, &x, sign_flip))
}

pub(crate) fn classical_from(y: &[f64], h: &[f64], x: &[f64], sign_flip: bool) -> f64 {
    let terms: Vec<f64> = y
        .iter()
        .zip(h)
        .zip(x)
        .map(|((y, h), x)| (y - h) * x)
        .collect();
    let s = pairwise_sum(&terms);
    if sign_flip {
        -s
    } else {
        s
    }
}

pub(crate) fn outcome_predictions(table: &EventTable, model: &FittedRegressor) -> Result<Vec<f64>> {
    if model.encoder().is_some() {
        model.predict(table)
    } else {
        model.predict_matrix(&FeatureEncoder::fit(table)?.transform(table)?)
    }
}

/// Shared per-table state: the propensity design, outcomes and outcome
/// predictions, all in a canonical row order so that the input row order
/// cannot influence any random draw or summation.
pub(crate) struct Prepared {
    pub design: DMatrix<f64>,
    pub names: Vec<String>,
    pub y: Vec<f64>,
    pub actors: Vec<String>,
    pub h: Vec<f64>,
    /// Canonical position → input row index.
    pub order: Vec<usize>,
}

impl Prepared {
    pub fn new(table: &EventTable, outcome_model: &FittedRegressor, config: &MetricConfig) -> Result<Self> {
        config.validate(table)?;
        if config.metric == MetricKind::Iax {
            return Err(Error::Config("injury metrics are computed from a cumulative hazard model, not an outcome regressor".into()));
        }
        let encoder = match outcome_model.encoder() {
            Some(e) => e.clone(),
            None => FeatureEncoder::fit(table)?,
        };
        let raw = encoder.transform(table)?;
        let y_raw = metric_outcomes(table, config);
        let order = canonical_order(table, &raw, &y_raw);
        let design = raw.select_rows(order.iter());
        let y: Vec<f64> = order.iter().map(|&i| y_raw[i]).collect();
        let actors: Vec<String> = order.iter().map(|&i| table.rows()[i].actor_id.clone()).collect();
        let names = encoder.output_names();
        let h = match (&config.cross_fitting, &config.outcome_refit) {
            (CrossFitting::KFold(k), Some(spec)) => {
                cross_fit(&design, &y, &names, spec, *k, seed::derive(config.seed, 0x6f75_7463))?
            }
            _ => {
                let h_raw = outcome_model.predict_matrix(&raw)?;
                order.iter().map(|&i| h_raw[i]).collect()
            }
        };
        Ok(Prepared {
            design,
            names,
            y,
            actors,
            h,
            order,
        })
    }

    pub fn indicator(&self, actor: &str) -> Result<Vec<f64>> {
        let x: Vec<f64> = self.actors.iter().map(|a| f64::from(u8::from(a == actor))).collect();
        if !x.contains(&1.0) {
            return Err(Error::UnknownActor(actor.to_string()));
        }
        Ok(x)
    }

    /// Outcome predictions for this actor's evaluation.
    pub fn outcome_for(&self, actor: &str, config: &MetricConfig) -> Result<Vec<f64>> {
        if !config.exclude_actor {
            return Ok(self.h.clone());
        }
        let spec = config
            .outcome_refit
            .as_ref()
            .ok_or_else(|| Error::Config("actor exclusion needs an outcome model spec".into()))?;
        let keep: Vec<usize> = (0..self.y.len()).filter(|&i| self.actors[i] != actor).collect();
        let y: Vec<f64> = keep.iter().map(|&i| self.y[i]).collect();
        let model = spec.fit_matrix(&self.design.select_rows(keep.iter()), &y, &self.names, seed::derive_str(config.seed ^ 0x6578, actor))?;
        model.predict_matrix(&self.design)
    }
}

fn canonical_order(table: &EventTable, design: &DMatrix<f64>, y: &[f64]) -> Vec<usize> {
    let rows = table.rows();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .actor_id
            .cmp(&rows[b].actor_id)
            .then(y[a].total_cmp(&y[b]))
            .then_with(|| {
                (0..design.ncols())
                    .map(|j| design[(a, j)].total_cmp(&design[(b, j)]))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then(rows[a].date.cmp(&rows[b].date))
    });
    order
}

fn cross_fit(design: &DMatrix<f64>, y: &[f64], names: &[String], spec: &RegressorSpec, k: usize, seed_value: u64) -> Result<Vec<f64>> {
    let n = y.len();
    if n < k {
        return Err(Error::InvalidInput(format!("{n} rows cannot fill {k} folds")));
    }
    let fold = fold_assignment(n, k, seed_value);
    let mut out = vec![0.0; n];
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = spec.fit_matrix(&design.select_rows(train.iter()), &ty, names, seed::derive(seed_value, f as u64))?;
        let pred = model.predict_matrix(&design.select_rows(test.iter()))?;
        for (&i, p) in test.iter().zip(pred) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Fitted propensity values `f̂(Z)` for the indicator `x`, following the
/// cross-fitting mode.
pub fn propensity_values(
    design: &DMatrix<f64>,
    names: &[String],
    x: &[f64],
    config: &MetricConfig,
    seed_value: u64,
) -> Result<(Vec<f64>, std::collections::BTreeMap<String, f64>)> {
    if let RegressorSpec::Constant(c) = config.propensity {
        return Ok((vec![c; x.len()], Default::default()));
    }
    match config.cross_fitting {
        CrossFitting::KFold(k) => Ok((
            cross_fit(design, x, names, &config.propensity, k, seed_value)?,
            Default::default(),
        )),
        cf => {
            let model = config.propensity.fit_matrix(design, x, names, seed_value)?;
            let f = match cf {
                CrossFitting::Oob => model
                    .oob_predictions()
                    .ok_or_else(|| Error::Config("propensity model has no out-of-bag predictions".into()))?
                    .to_vec(),
                _ => model.predict_matrix(design)?,
            };
            Ok((f, model.hyperparameters().clone()))
        }
    }
}

fn evaluate_prepared(prep: &Prepared, actor: &str, config: &MetricConfig) -> Result<(ActorEvaluation, GcmResult)> {
    let x = prep.indicator(actor)?;
    let n_units = x.iter().filter(|&&v| v == 1.0).count();
    if n_units == x.len() {
        return Err(Error::DegenerateVariance {
            actor: Some(actor.to_string()),
        });
    }
    let h = prep.outcome_for(actor, config)?;
    let sign_flip = config.metric.sign_flip();
    let classical = classical_from(&prep.y, &h, &x, sign_flip);
    let (f, hyper) = propensity_values(&prep.design, &prep.names, &x, config, seed::derive_str(config.seed, actor))?;
    let ry: Vec<f64> = prep.y.iter().zip(&h).map(|(y, h)| y - h).collect();
    let rx: Vec<f64> = x.iter().zip(&f).map(|(x, f)| x - f).collect();
    let gcm = gcm_from_residuals(&ry, &rx, sign_flip).map_err(|e| e.with_actor(actor))?;
    let positives = x.iter().zip(&prep.y).filter(|(&x, &y)| x == 1.0 && y > 0.0).count();
    let eval = assemble(actor, n_units, positives, classical, &gcm, config, hyper)?;
    Ok((eval, gcm))
}

pub(crate) fn assemble(
    actor: &str,
    n_units: usize,
    positives: usize,
    classical: f64,
    gcm: &GcmResult,
    config: &MetricConfig,
    hyper: std::collections::BTreeMap<String, f64>,
) -> Result<ActorEvaluation> {
    let ci = confidence_interval(gcm, &config.interval)?;
    let p_raw = non_nil_test(gcm, config.interval.rho0, config.direction)?;
    Ok(ActorEvaluation {
        actor_id: actor.to_string(),
        n_units,
        positives,
        classical,
        residualized: gcm.sum_scale_estimate,
        mean_estimate: gcm.mean_estimate,
        sd_sum: gcm.sd_sum,
        statistic: gcm.statistic,
        p_two_sided: gcm.p_two_sided,
        p_greater: gcm.p_greater,
        p_less: gcm.p_less,
        p_raw,
        p_adjusted: p_raw,
        ci_lower: ci.lower.is_finite().then_some(ci.lower),
        ci_upper: ci.upper.is_finite().then_some(ci.upper),
        rank: 0,
        propensity_hyperparameters: hyper,
    })
}

/// Residualized evaluation of one actor, with its full GCM result.
pub fn compute_residualized(
    table: &EventTable,
    actor: &str,
    outcome_model: &FittedRegressor,
    config: &MetricConfig,
) -> Result<(ActorEvaluation, GcmResult)> {
    if !table.has_actor(actor) {
        return Err(Error::UnknownActor(actor.to_string()));
    }
    let prep = Prepared::new(table, outcome_model, config)?;
    let (mut eval, gcm) = evaluate_prepared(&prep, actor, config)?;
    eval.rank = 1;
    Ok((eval, gcm))
}

/// Evaluates every actor in `cohort`. Failures are recorded, not fatal.
pub fn evaluate_all<'a, I>(table: &EventTable, cohort: I, outcome_model: &FittedRegressor, config: &MetricConfig) -> Result<EvaluationReport>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut actors: Vec<&String> = cohort.into_iter().collect();
    actors.sort();
    actors.dedup();
    if actors.is_empty() {
        return Err(Error::InvalidInput("empty cohort".into()));
    }
    let prep = Prepared::new(table, outcome_model, config)?;
    let results: Vec<(String, Result<ActorEvaluation>)> = actors
        .par_iter()
        .map(|a| ((*a).clone(), evaluate_prepared(&prep, a, config).map(|(e, _)| e)))
        .collect();

    finalize(
        results,
        config,
        Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_digest: config.digest(),
            outcome_family: format!("{:?}", outcome_model.family()),
            outcome_hyperparameters: outcome_model.hyperparameters().clone(),
            rows: table.len(),
        },
    )
}

/// Adjusts p-values, ranks, and assembles the report.
pub(crate) fn finalize(
    results: Vec<(String, Result<ActorEvaluation>)>,
    config: &MetricConfig,
    provenance: Provenance,
) -> Result<EvaluationReport> {
    let mut evaluations = Vec::new();
    let mut failures = Vec::new();
    for (actor, r) in results {
        match r {
            Ok(e) => evaluations.push(e),
            Err(e) => failures.push(ActorFailure {
                actor_id: actor,
                error: e.to_string(),
            }),
        }
    }
    let raw: Vec<f64> = evaluations.iter().map(|e| e.p_raw).collect();
    for (e, p) in evaluations.iter_mut().zip(adjust(&raw, config.adjustment)?) {
        e.p_adjusted = p;
    }
    let mut by_metric: Vec<usize> = (0..evaluations.len()).collect();
    by_metric.sort_by(|&a, &b| evaluations[b].residualized.total_cmp(&evaluations[a].residualized));
    for (rank, i) in by_metric.into_iter().enumerate() {
        evaluations[i].rank = rank + 1;
    }
    let classical: Vec<f64> = evaluations.iter().map(|e| e.classical).collect();
    let resid: Vec<f64> = evaluations.iter().map(|e| e.residualized).collect();
    Ok(EvaluationReport {
        metric: config.metric,
        direction: config.direction,
        adjustment: config.adjustment,
        pearson_r: pearson(&classical, &resid),
        actors: evaluations,
        failures,
        dependence_caveat: DEPENDENCE_CAVEAT.to_string(),
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{ColumnKind, ColumnSpec, EventRow, FeatureSpec, Value};
    use crate::stats::expit;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn synthetic(n: usize, seed_value: u64, strong: &str) -> EventTable {
        let mut rng = seed::rng(seed_value);
        let spec = FeatureSpec::new(vec![
            ColumnSpec::new("d", ColumnKind::Numeric),
            ColumnSpec::new("a", ColumnKind::Numeric),
        ]);
        let actors = ["p1", "p2", "p3", "p4"];
        let rows = (0..n)
            .map(|_| {
                let who = actors[rng.gen_range(0..actors.len())];
                let d: f64 = rng.gen_range(0.0..2.0) + if who == "p1" { 0.5 } else { 0.0 };
                let a: f64 = rng.gen_range(-1.0..1.0);
                let bonus = if who == strong { 1.0 } else { 0.0 };
                let y = rng.gen::<f64>() < expit(-0.5 - 0.8 * d + 0.3 * a + bonus);
                EventRow::new(f64::from(u8::from(y)), who)
                    .with_feature("d", Value::Num(d))
                    .with_feature("a", Value::Num(a))
            })
            .collect();
        EventTable::new(Discipline::Shot, spec, rows).unwrap()
    }

    fn xg(table: &EventTable) -> FittedRegressor {
        let enc = FeatureEncoder::fit(table).unwrap();
        RegressorSpec::Logistic.fit_table(table, &enc, &table.outcomes(), 0).unwrap()
    }

    #[test]
    fn classical_hand_example() {
        let spec = FeatureSpec::numeric(&["h"]);
        let rows = vec![
            EventRow::new(1.0, "a").with_feature("h", Value::Num(0.3)),
            EventRow::new(0.0, "a").with_feature("h", Value::Num(0.2)),
            EventRow::new(1.0, "b").with_feature("h", Value::Num(0.9)),
        ];
        let table = EventTable::new(Discipline::Shot, spec, rows).unwrap();
        // identity "model" reading ĥ from the feature column
        let h = table.numeric_column("h").unwrap().into_iter().map(Option::unwrap).collect::<Vec<_>>();
        let x = actor_indicator(&table, "a").unwrap();
        assert_abs_diff_eq!(classical_from(&table.outcomes(), &h, &x, false), 0.5, epsilon = 1e-15);
        let keeper = vec![0.0, 0.0, 1.0];
        // keeper concedes a shot with ĥ = 0.9
        assert_abs_diff_eq!(classical_from(&table.outcomes(), &h, &keeper, true), -0.1, epsilon = 1e-15);
        assert!(matches!(
            compute_classical(&table, "zz", &FittedRegressor::constant(0.5, vec!["h".into()]), false),
            Err(Error::UnknownActor(_))
        ));
    }

    #[test]
    fn zero_propensity_reduces_to_classical() {
        let table = synthetic(600, 1, "p2");
        let model = xg(&table);
        for metric in [MetricKind::Gax] {
            let cfg = MetricConfig::without_propensity(metric);
            for actor in ["p1", "p2", "p3"] {
                let (e, _) = compute_residualized(&table, actor, &model, &cfg).unwrap();
                let c = compute_classical(&table, actor, &model, false).unwrap();
                assert_abs_diff_eq!(e.residualized, c, epsilon = 1e-10);
                assert_abs_diff_eq!(e.classical, c, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn row_permutation_leaves_evaluation_unchanged() {
        let table = synthetic(300, 2, "p3");
        let model = xg(&table);
        let cfg = MetricConfig::new(MetricKind::Gax).with_forest(60, Mtry::Sqrt, 3);
        let order: Vec<usize> = (0..table.len()).rev().collect();
        let shuffled = table.permuted(&order).unwrap();
        let cohort = table.actors();
        let a = evaluate_all(&table, &cohort, &model, &cfg).unwrap();
        let b = evaluate_all(&shuffled, &cohort, &model, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn batch_records_failures_and_is_deterministic() {
        let table = synthetic(300, 3, "p1");
        let model = xg(&table);
        let cfg = MetricConfig::new(MetricKind::Gax).with_forest(60, Mtry::Sqrt, 3);
        let cohort: Vec<String> = vec!["p1".into(), "p2".into(), "ghost".into()];
        let a = evaluate_all(&table, &cohort, &model, &cfg).unwrap();
        assert_eq!(a.actors.len(), 2);
        assert_eq!(a.failures.len(), 1);
        assert_eq!(a.failures[0].actor_id, "ghost");
        let b = evaluate_all(&table, &cohort, &model, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        for e in &a.actors {
            assert!(e.p_adjusted >= e.p_raw);
        }
    }

    #[test]
    fn sole_actor_is_degenerate() {
        let table = synthetic(100, 4, "p1").filter_rows(|r| r.actor_id == "p2").unwrap();
        let model = xg(&table);
        let cfg = MetricConfig::without_propensity(MetricKind::Gax);
        match compute_residualized(&table, "p2", &model, &cfg) {
            Err(Error::DegenerateVariance { actor }) => assert_eq!(actor.as_deref(), Some("p2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let table = synthetic(50, 5, "p1");
        let mut cfg = MetricConfig::new(MetricKind::Gsax);
        assert!(cfg.validate(&table).is_err());
        cfg.metric = MetricKind::Gax;
        cfg.outcome_mode = OutcomeMode::ScoreValue;
        assert!(cfg.validate(&table).is_err());
        let cfg = MetricConfig {
            propensity: RegressorSpec::Logistic,
            ..MetricConfig::default()
        };
        assert!(cfg.validate(&table).is_err());
        let cfg = MetricConfig {
            exclude_actor: true,
            ..MetricConfig::without_propensity(MetricKind::Gax)
        };
        assert!(cfg.validate(&table).is_err());
    }

    #[test]
    fn kfold_and_exclusion_run() {
        let table = synthetic(400, 6, "p2");
        let model = xg(&table);
        let cfg = MetricConfig {
            propensity: RegressorSpec::Logistic,
            cross_fitting: CrossFitting::KFold(4),
            outcome_refit: Some(RegressorSpec::Logistic),
            exclude_actor: true,
            ..MetricConfig::default()
        };
        let (e, g) = compute_residualized(&table, "p2", &model, &cfg).unwrap();
        assert!(e.residualized.is_finite() && g.sd_sum > 0.0);
    }
}
