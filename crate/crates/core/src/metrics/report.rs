use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MetricKind;
use crate::error::{Error, Result};
use crate::gcm::Direction;
use crate::multiplicity::AdjustmentMethod;

pub const DEPENDENCE_CAVEAT: &str = "Per-actor tests share the outcome model and overlapping rows; \
false discovery control by Benjamini-Hochberg assumes positive dependence, which is not established here. \
Benjamini-Yekutieli is valid under arbitrary dependence.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorEvaluation {
    pub actor_id: String,
    pub n_units: usize,
    pub positives: usize,
    pub classical: f64,
    pub residualized: f64,
    pub mean_estimate: f64,
    pub sd_sum: f64,
    pub statistic: f64,
    pub p_two_sided: f64,
    pub p_greater: f64,
    pub p_less: f64,
    /// p-value for the configured direction and null shift.
    pub p_raw: f64,
    pub p_adjusted: f64,
    /// `None` for an unbounded side.
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// 1 for the largest residualized metric.
    pub rank: usize,
    pub propensity_hyperparameters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorFailure {
    pub actor_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub seed: u64,
    pub config_digest: String,
    pub outcome_family: String,
    pub outcome_hyperparameters: BTreeMap<String, f64>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metric: MetricKind,
    pub direction: Direction,
    pub adjustment: AdjustmentMethod,
    /// Correlation between the classical and residualized columns.
    pub pearson_r: Option<f64>,
    pub actors: Vec<ActorEvaluation>,
    pub failures: Vec<ActorFailure>,
    pub dependence_caveat: String,
    pub provenance: Provenance,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn get(&self, actor: &str) -> Option<&ActorEvaluation> {
        self.actors.iter().find(|e| e.actor_id == actor)
    }

    /// One row per evaluated actor.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "actor_id",
            "n_units",
            "positives",
            "classical",
            "residualized",
            "sd_sum",
            "statistic",
            "p_two_sided",
            "p_greater",
            "p_less",
            "p_raw",
            "p_adjusted",
            "ci_lower",
            "ci_upper",
            "rank",
        ])?;
        for e in &self.actors {
            w.write_record([
                e.actor_id.clone(),
                e.n_units.to_string(),
                e.positives.to_string(),
                num(e.classical),
                num(e.residualized),
                num(e.sd_sum),
                num(e.statistic),
                num(e.p_two_sided),
                num(e.p_greater),
                num(e.p_less),
                num(e.p_raw),
                num(e.p_adjusted),
                opt(e.ci_lower),
                opt(e.ci_upper),
                e.rank.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Classical against residualized, for a scatter plot.
    pub fn write_scatter_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["actor_id", "classical", "residualized", "p_adjusted"])?;
        for e in &self.actors {
            w.write_record([e.actor_id.clone(), num(e.classical), num(e.residualized), num(e.p_adjusted)])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Estimates with interval bounds, sorted by rank, for an interval plot.
    pub fn write_interval_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "actor_id", "estimate", "lower", "upper", "p_adjusted"])?;
        let mut ranked: Vec<&ActorEvaluation> = self.actors.iter().collect();
        ranked.sort_by_key(|e| e.rank);
        for e in ranked {
            w.write_record([
                e.rank.to_string(),
                e.actor_id.clone(),
                num(e.residualized),
                opt(e.ci_lower),
                opt(e.ci_upper),
                num(e.p_adjusted),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}
