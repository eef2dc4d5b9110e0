//! Censored responses: cumulative hazards, martingale residuals and the
//! residualized injury metric.
//!
//! Censoring is assumed independent of the actor given the true time and
//! covariates, and uninformative. Neither is checked.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Discipline, EventRow, EventTable, FeatureEncoder, FeatureSpec, Value};
use crate::gcm::{gcm_from_residuals, GcmResult};
use crate::metrics::{assemble, finalize, propensity_values, ActorEvaluation, EvaluationReport, MetricConfig, MetricKind, Provenance};
use crate::regress::RegressorSpec;
use crate::seed;
use crate::stats::pairwise_sum;

pub const COX_MAX_ITERATIONS: usize = 50;
pub const COX_TOLERANCE: f64 = 1e-8;
/// Coefficients beyond this size with a still-rising partial likelihood mean
/// the likelihood is monotone (some covariate perfectly orders the events).
const MONOTONE_NORM: f64 = 25.0;

/// Observed times `min(Y*, C)`, event flags, actors and an encoded design.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    pub actors: Vec<String>,
    pub design: DMatrix<f64>,
    pub names: Vec<String>,
}

impl SurvivalTable {
    pub fn new(times: Vec<f64>, events: Vec<bool>, actors: Vec<String>, design: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let n = times.len();
        if events.len() != n || actors.len() != n || design.nrows() != n || design.ncols() != names.len() {
            return Err(Error::InvalidInput("survival columns differ in length".into()));
        }
        if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidRow {
                row: i + 1,
                message: format!("time {t} must be positive"),
            });
        }
        Ok(SurvivalTable {
            times,
            events,
            actors,
            design,
            names,
        })
    }

    /// From an injury-spell table; `encoder` defaults to every schema column.
    pub fn from_events(table: &EventTable, encoder: Option<&FeatureEncoder>) -> Result<Self> {
        if table.discipline() != Discipline::InjurySpell {
            return Err(Error::Config(format!("need an injury-spell table, got {}", table.discipline().as_str())));
        }
        let enc = match encoder {
            Some(e) => e.clone(),
            None => FeatureEncoder::fit(table)?,
        };
        Self::new(
            table.outcomes(),
            table.rows().iter().map(|r| r.event.unwrap_or(true)).collect(),
            table.rows().iter().map(|r| r.actor_id.clone()).collect(),
            enc.transform(table)?,
            enc.output_names(),
        )
    }

    /// Injury-spell table with one numeric column per design column.
    pub fn to_event_table(&self) -> Result<EventTable> {
        let rows = (0..self.len())
            .map(|i| {
                let mut row = EventRow::new(self.times[i], self.actors[i].clone());
                row.event = Some(self.events[i]);
                for (j, name) in self.names.iter().enumerate() {
                    row.features.insert(name.clone(), Value::Num(self.design[(i, j)]));
                }
                row
            })
            .collect();
        EventTable::new(Discipline::InjurySpell, FeatureSpec::numeric(&self.names), rows)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn indicator(&self, actor: &str) -> Result<Vec<f64>> {
        let x: Vec<f64> = self.actors.iter().map(|a| f64::from(u8::from(a == actor))).collect();
        if !x.contains(&1.0) {
            return Err(Error::UnknownActor(actor.to_string()));
        }
        Ok(x)
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// The same rows with design column `name` removed.
    pub fn without_column(&self, name: &str) -> Result<SurvivalTable> {
        let j = self.column_index(name)?;
        let mut names = self.names.clone();
        names.remove(j);
        Ok(SurvivalTable {
            design: self.design.clone().remove_column(j),
            names,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HazardFamily {
    NelsonAalen,
    CoxBreslow,
}

/// `Λ̂(t, z) = Λ̂₀(t) · exp(zᵀη̂)`, with `η̂ = 0` for Nelson–Aalen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeHazardModel {
    pub family: HazardFamily,
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Distinct event times, ascending.
    pub event_times: Vec<f64>,
    /// Baseline cumulative hazard at each event time.
    pub baseline: Vec<f64>,
    pub iterations: usize,
    pub log_partial_likelihood: Option<f64>,
}

impl CumulativeHazardModel {
    pub fn baseline_at(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.baseline[k - 1]
        }
    }

    pub fn cumulative_hazard(&self, t: f64, row: &[f64]) -> f64 {
        let b = self.baseline_at(t);
        if self.coefficients.is_empty() || b == 0.0 {
            return b;
        }
        b * row.iter().zip(&self.coefficients).map(|(z, c)| z * c).sum::<f64>().exp()
    }
}

/// Groups of row indices sharing a time, ascending by time.
fn time_groups(times: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if times[g[0]] == times[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Breslow baseline for fixed risk scores `exp(η_i)`.
fn breslow(table: &SurvivalTable, risk: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let groups = time_groups(&table.times);
    let mut at_risk: f64 = pairwise_sum(risk);
    let mut times = Vec::new();
    let mut cum = Vec::new();
    let mut total = 0.0;
    for g in &groups {
        let d = g.iter().filter(|&&i| table.events[i]).count();
        if d > 0 {
            total += d as f64 / at_risk;
            times.push(table.times[g[0]]);
            cum.push(total);
        }
        at_risk -= g.iter().map(|&i| risk[i]).sum::<f64>();
        // guard against drift once the risk set empties
        if at_risk < 0.0 {
            at_risk = 0.0;
        }
    }
    (times, cum)
}

/// `Λ̂(t) = Σ_{s ≤ t} d_s / n_s`, ignoring features.
pub fn fit_nelson_aalen(table: &SurvivalTable) -> Result<CumulativeHazardModel> {
    if table.event_count() == 0 {
        return Err(Error::NoEvents);
    }
    let (event_times, baseline) = breslow(table, &vec![1.0; table.len()]);
    Ok(CumulativeHazardModel {
        family: HazardFamily::NelsonAalen,
        coefficients: Vec::new(),
        feature_names: Vec::new(),
        event_times,
        baseline,
        iterations: 0,
        log_partial_likelihood: None,
    })
}

struct PartialLikelihood {
    value: f64,
    gradient: DVector<f64>,
    information: DMatrix<f64>,
}

/// Breslow partial log-likelihood with gradient and observed information.
fn partial_likelihood(z: &DMatrix<f64>, table: &SurvivalTable, groups: &[Vec<usize>], beta: &DVector<f64>) -> PartialLikelihood {
    let p = z.ncols();
    let eta = z * beta;
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut value = 0.0;
    let mut gradient = DVector::zeros(p);
    let mut information = DMatrix::zeros(p, p);
    // walk backwards so the risk set only grows
    for g in groups.iter().rev() {
        for &i in g {
            let w = eta[i].exp();
            let zi = z.row(i).transpose();
            s0 += w;
            s1 += &zi * w;
            s2 += &zi * zi.transpose() * w;
        }
        let events: Vec<usize> = g.iter().copied().filter(|&i| table.events[i]).collect();
        if events.is_empty() {
            continue;
        }
        let d = events.len() as f64;
        for &i in &events {
            value += eta[i];
            gradient += z.row(i).transpose();
        }
        value -= d * s0.ln();
        let mean = &s1 / s0;
        gradient -= &mean * d;
        information += (&s2 / s0 - &mean * mean.transpose()) * d;
    }
    PartialLikelihood {
        value,
        gradient,
        information,
    }
}

/// Cox proportional hazards by Newton–Raphson with a Breslow baseline.
pub fn fit_cox_breslow(table: &SurvivalTable) -> Result<CumulativeHazardModel> {
    if table.event_count() == 0 {
        return Err(Error::NoEvents);
    }
    let p = table.design.ncols();
    if p == 0 {
        let mut m = fit_nelson_aalen(table)?;
        m.family = HazardFamily::CoxBreslow;
        return Ok(m);
    }
    let bad = crate::regress::collinear_columns(&table.design.clone().insert_column(0, 1.0));
    if !bad.is_empty() {
        return Err(Error::RankDeficient {
            columns: bad.into_iter().map(|j| if j == 0 { "(constant)".to_string() } else { table.names[j - 1].clone() }).collect(),
        });
    }
    // centering leaves η̂ unchanged and keeps exp() well scaled
    let means: Vec<f64> = (0..p).map(|j| table.design.column(j).mean()).collect();
    let z = DMatrix::from_fn(table.len(), p, |i, j| table.design[(i, j)] - means[j]);
    let groups = time_groups(&table.times);

    let mut beta = DVector::zeros(p);
    let mut cur = partial_likelihood(&z, table, &groups, &beta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < COX_MAX_ITERATIONS {
        iterations += 1;
        let Some(chol) = cur.information.clone().cholesky() else {
            return Err(Error::Separation { norm: beta.amax() });
        };
        let step = chol.solve(&cur.gradient);
        let mut t = 1.0;
        let (cand, next) = loop {
            let cand = &beta + &step * t;
            let next = partial_likelihood(&z, table, &groups, &cand);
            if next.value >= cur.value || t < 1e-10 {
                break (cand, next);
            }
            t *= 0.5;
        };
        if next.value < cur.value {
            converged = true;
            break;
        }
        let change = (&cand - &beta).amax();
        beta = cand;
        cur = next;
        if beta.amax() > MONOTONE_NORM {
            return Err(Error::Separation { norm: beta.amax() });
        }
        if change < COX_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "Cox partial likelihood",
            iterations,
        });
    }
    let risk: Vec<f64> = (0..table.len())
        .map(|i| (0..p).map(|j| table.design[(i, j)] * beta[j]).sum::<f64>().exp())
        .collect();
    let (event_times, baseline) = breslow(table, &risk);
    Ok(CumulativeHazardModel {
        family: HazardFamily::CoxBreslow,
        coefficients: beta.iter().copied().collect(),
        feature_names: table.names.clone(),
        event_times,
        baseline,
        iterations,
        log_partial_likelihood: Some(cur.value),
    })
}

pub fn fit_hazard(table: &SurvivalTable, family: HazardFamily) -> Result<CumulativeHazardModel> {
    match family {
        HazardFamily::NelsonAalen => fit_nelson_aalen(table),
        HazardFamily::CoxBreslow => fit_cox_breslow(table),
    }
}

/// `M_i = δ_i − Λ̂(Y_i, Z_i)`.
pub fn martingale_residuals(model: &CumulativeHazardModel, table: &SurvivalTable) -> Result<Vec<f64>> {
    if !model.coefficients.is_empty() && model.feature_names != table.names {
        return Err(Error::SchemaMismatch(format!(
            "hazard model features {:?} differ from table features {:?}",
            model.feature_names, table.names
        )));
    }
    let p = table.design.ncols();
    let mut row = vec![0.0; p];
    Ok((0..table.len())
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = table.design[(i, j)];
            }
            f64::from(u8::from(table.events[i])) - model.cumulative_hazard(table.times[i], &row)
        })
        .collect())
}

fn check_iax(config: &MetricConfig) -> Result<()> {
    if config.metric != MetricKind::Iax {
        return Err(Error::Config(format!("survival evaluation needs metric iax, got {}", config.metric)));
    }
    config.interval.validate()
}

fn riax_for(table: &SurvivalTable, residuals: &[f64], actor: &str, config: &MetricConfig) -> Result<(ActorEvaluation, GcmResult)> {
    let x = table.indicator(actor)?;
    let n_units = x.iter().filter(|&&v| v == 1.0).count();
    if n_units == x.len() {
        return Err(Error::DegenerateVariance {
            actor: Some(actor.to_string()),
        });
    }
    // same summation as the GCM products so f = 0 reproduces IAX bit for bit
    let classical = pairwise_sum(&residuals.iter().zip(&x).map(|(m, x)| m * x).collect::<Vec<f64>>());
    let (f, hyper) = propensity_values(&table.design, &table.names, &x, config, seed::derive_str(config.seed, actor))?;
    let rx: Vec<f64> = x.iter().zip(&f).map(|(x, f)| x - f).collect();
    let gcm = gcm_from_residuals(residuals, &rx, false).map_err(|e| e.with_actor(actor))?;
    let events = (0..table.len()).filter(|&i| x[i] == 1.0 && table.events[i]).count();
    Ok((assemble(actor, n_units, events, classical, &gcm, config, hyper)?, gcm))
}

/// Residualized injuries above expectation for one actor: martingale
/// residuals of `hazard` against the actor's propensity residuals.
pub fn compute_riax(table: &SurvivalTable, actor: &str, hazard: &CumulativeHazardModel, config: &MetricConfig) -> Result<(ActorEvaluation, GcmResult)> {
    check_iax(config)?;
    let m = martingale_residuals(hazard, table)?;
    riax_for(table, &m, actor, config)
}

/// Classical injuries above expectation: the actor's summed martingale residuals.
pub fn compute_iax(table: &SurvivalTable, actor: &str, hazard: &CumulativeHazardModel) -> Result<f64> {
    let x = table.indicator(actor)?;
    let m = martingale_residuals(hazard, table)?;
    Ok(pairwise_sum(&m.iter().zip(&x).map(|(m, x)| m * x).collect::<Vec<f64>>()))
}

/// rIAX for every actor in `cohort`, in the shared report format.
pub fn evaluate_riax<'a, I>(table: &SurvivalTable, cohort: I, hazard: &CumulativeHazardModel, config: &MetricConfig) -> Result<EvaluationReport>
where
    I: IntoIterator<Item = &'a String>,
{
    check_iax(config)?;
    let m = martingale_residuals(hazard, table)?;
    let mut actors: Vec<&String> = cohort.into_iter().collect();
    actors.sort();
    actors.dedup();
    if actors.is_empty() {
        return Err(Error::InvalidInput("empty cohort".into()));
    }
    let results = actors
        .par_iter()
        .map(|a| ((*a).clone(), riax_for(table, &m, a, config).map(|r| r.0)))
        .collect();
    let hp: BTreeMap<String, f64> = hazard.feature_names.iter().cloned().zip(hazard.coefficients.iter().copied()).collect();
    finalize(
        results,
        config,
        Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_digest: config.digest(),
            outcome_family: format!("{:?}", hazard.family),
            outcome_hyperparameters: hp,
            rows: table.len(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRiax {
    pub feature: String,
    pub estimate: f64,
    pub sd_sum: f64,
    pub statistic: f64,
    pub p_two_sided: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

/// Tests one design column against the censored response given the other
/// columns. The hazard is refitted without the column and the column is
/// regressed on the rest; a continuous column passes through unchanged.
pub fn feature_riax(table: &SurvivalTable, feature: &str, family: HazardFamily, config: &MetricConfig) -> Result<FeatureRiax> {
    check_iax(config)?;
    let j = table.column_index(feature)?;
    let x: Vec<f64> = table.design.column(j).iter().copied().collect();
    let rest = table.without_column(feature)?;
    let hazard = fit_hazard(&rest, family)?;
    let m = martingale_residuals(&hazard, &rest)?;
    let binary = x.iter().all(|&v| v == 0.0 || v == 1.0);
    let mut cfg = config.clone();
    match &mut cfg.propensity {
        RegressorSpec::Forest { probability, .. } => *probability = binary,
        RegressorSpec::Logistic if !binary => {
            cfg.propensity = RegressorSpec::Mean;
            cfg.cross_fitting = crate::metrics::CrossFitting::None;
        }
        _ => {}
    }
    let f = if rest.design.ncols() == 0 {
        vec![crate::stats::mean(&x); x.len()]
    } else {
        propensity_values(&rest.design, &rest.names, &x, &cfg, seed::derive_str(config.seed, feature))?.0
    };
    let rx: Vec<f64> = x.iter().zip(&f).map(|(x, f)| x - f).collect();
    let gcm = gcm_from_residuals(&m, &rx, false)?;
    let ci = crate::gcm::confidence_interval(&gcm, &config.interval)?;
    Ok(FeatureRiax {
        feature: feature.to_string(),
        estimate: gcm.sum_scale_estimate,
        sd_sum: gcm.sd_sum,
        statistic: gcm.statistic,
        p_two_sided: gcm.p_two_sided,
        ci_lower: ci.lower.is_finite().then_some(ci.lower),
        ci_upper: ci.upper.is_finite().then_some(ci.upper),
    })
}
