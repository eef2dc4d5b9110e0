use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classical_from, outcome_predictions, propensity_values, MetricConfig, Prepared};
use crate::error::{Error, Result};
use crate::events::EventTable;
use crate::gcm::gcm_from_residuals;
use crate::regress::FittedRegressor;
use crate::seed;
use crate::stats::simple_ols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessActor {
    pub actor_id: String,
    /// One value per outcome model, in model order.
    pub classical: Vec<f64>,
    pub residualized: Vec<f64>,
}

/// Least-squares line of model `b`'s metrics on model `a`'s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub a: String,
    pub b: String,
    pub classical_slope: Option<f64>,
    pub classical_intercept: Option<f64>,
    pub residualized_slope: Option<f64>,
    pub residualized_intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub models: Vec<String>,
    pub actors: Vec<RobustnessActor>,
    pub pairs: Vec<ModelPair>,
    /// Mean over actors of the mean absolute pairwise difference across models.
    pub classical_dispersion: f64,
    pub residualized_dispersion: f64,
    pub failures: Vec<(String, String)>,
}

fn dispersion(values: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            total += (values[i] - values[j]).abs();
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Classical and residualized metrics of every actor under each outcome
/// model. The propensity does not depend on the outcome model, so each
/// actor's propensity is fitted once and shared.
pub fn compare_models_robustness<'a, I>(
    table: &EventTable,
    cohort: I,
    models: &[(String, FittedRegressor)],
    config: &MetricConfig,
) -> Result<RobustnessReport>
where
    I: IntoIterator<Item = &'a String>,
{
    if models.len() < 2 {
        return Err(Error::InvalidInput("robustness comparison needs at least two outcome models".into()));
    }
    if config.exclude_actor {
        return Err(Error::Config("robustness comparison uses the given models as-is; disable actor exclusion".into()));
    }
    let prep = Prepared::new(table, &models[0].1, config)?;
    let mut h_all = Vec::with_capacity(models.len());
    for (_, m) in models {
        let raw = outcome_predictions(table, m)?;
        h_all.push(prep.order.iter().map(|&i| raw[i]).collect::<Vec<f64>>());
    }
    let mut actors: Vec<&String> = cohort.into_iter().collect();
    actors.sort();
    actors.dedup();
    let sign_flip = config.metric.sign_flip();

    let results: Vec<(String, Result<RobustnessActor>)> = actors
        .par_iter()
        .map(|&actor| {
            let r = (|| {
                let x = prep.indicator(actor)?;
                let (f, _) = propensity_values(&prep.design, &prep.names, &x, config, seed::derive_str(config.seed, actor))?;
                let rx: Vec<f64> = x.iter().zip(&f).map(|(x, f)| x - f).collect();
                let mut classical = Vec::new();
                let mut residualized = Vec::new();
                for h in &h_all {
                    classical.push(classical_from(&prep.y, h, &x, sign_flip));
                    let ry: Vec<f64> = prep.y.iter().zip(h).map(|(y, h)| y - h).collect();
                    residualized.push(gcm_from_residuals(&ry, &rx, sign_flip).map_err(|e| e.with_actor(actor))?.sum_scale_estimate);
                }
                Ok(RobustnessActor {
                    actor_id: actor.clone(),
                    classical,
                    residualized,
                })
            })();
            (actor.clone(), r)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (a, r) in results {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => failures.push((a, e.to_string())),
        }
    }
    let mut pairs = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let ca: Vec<f64> = rows.iter().map(|r| r.classical[i]).collect();
            let cb: Vec<f64> = rows.iter().map(|r| r.classical[j]).collect();
            let ra: Vec<f64> = rows.iter().map(|r| r.residualized[i]).collect();
            let rb: Vec<f64> = rows.iter().map(|r| r.residualized[j]).collect();
            let c = simple_ols(&ca, &cb);
            let r = simple_ols(&ra, &rb);
            pairs.push(ModelPair {
                a: models[i].0.clone(),
                b: models[j].0.clone(),
                classical_slope: c.map(|v| v.1),
                classical_intercept: c.map(|v| v.0),
                residualized_slope: r.map(|v| v.1),
                residualized_intercept: r.map(|v| v.0),
            });
        }
    }
    let k = rows.len().max(1) as f64;
    Ok(RobustnessReport {
        models: models.iter().map(|m| m.0.clone()).collect(),
        classical_dispersion: rows.iter().map(|r| dispersion(&r.classical)).sum::<f64>() / k,
        residualized_dispersion: rows.iter().map(|r| dispersion(&r.residualized)).sum::<f64>() / k,
        actors: rows,
        pairs,
        failures,
    })
}
