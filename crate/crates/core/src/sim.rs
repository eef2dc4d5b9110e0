//! Synthetic data and Monte-Carlo studies.
//!
//! The partially linear logistic model (PLLM) draws `Z ~ N(0, I_d)`,
//! `X ~ Bernoulli(f(Z))` and `Y ~ Bernoulli(expit(βX + g(Z)))`. Under `β = 0`
//! the outcome ignores the actor once context is known, so residualized tests
//! on these draws should reject at their nominal rate.
//!
//! Every replication draws from its own generator, seeded from the cell seed
//! and the replication index, so results do not depend on the thread count.

use std::io::Write;

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use rand_distr::{Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Discipline, EventRow, EventTable, FeatureSpec, Value};
use crate::gcm::{gcm_from_residuals, Direction, GcmResult};
use crate::metrics::{CrossFitting, MetricConfig, MetricKind};
use crate::regress::{fit_forest, fit_logistic, Mtry, RegressorSpec, TuningGrid};
use crate::seed;
use crate::stats::{expit, mean, norm_quantile};
use crate::survival::{compute_riax, fit_hazard, HazardFamily, SurvivalTable};
use crate::teams::{Match, MatchTable, TeamStrengths};

/// Actor id of the rows with `X = 1`.
pub const TARGET_ACTOR: &str = "target";
/// Actor id of every other row.
pub const OTHER_ACTOR: &str = "other";
/// Propensities are squeezed into `[ε, 1 − ε]`.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Studies need at least this many replications.
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    Zero,
    /// `g(z) = sin(z₁) + 0.5·z₂·z₃`
    SineProduct,
}

impl Nonlinearity {
    pub fn eval(self, z: &[f64]) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::SineProduct => z[0].sin() + 0.5 * z[1] * z[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensityLaw {
    Constant(f64),
    /// `ε + (1 − 2ε)·expit(a + bᵀz)`
    Linear { intercept: f64, coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PllmConfig {
    pub n: usize,
    pub dim_z: usize,
    pub nonlinearity: Nonlinearity,
    pub propensity: PropensityLaw,
    pub beta: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for PllmConfig {
    fn default() -> Self {
        PllmConfig {
            n: 2000,
            dim_z: 3,
            nonlinearity: Nonlinearity::SineProduct,
            propensity: PropensityLaw::Linear {
                intercept: -0.5,
                coefficients: vec![0.8, -0.5, 0.3],
            },
            beta: 0.0,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl PllmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("a PLLM sample needs at least 2 rows".into()));
        }
        if self.nonlinearity == Nonlinearity::SineProduct && self.dim_z < 3 {
            return Err(Error::Config("sine-product nonlinearity needs at least 3 context dimensions".into()));
        }
        if !self.beta.is_finite() {
            return Err(Error::Config("beta must be finite".into()));
        }
        match &self.propensity {
            PropensityLaw::Constant(p) if !(*p > 0.0 && *p < 1.0) => {
                Err(Error::Config(format!("constant propensity {p} must lie in (0, 1)")))
            }
            PropensityLaw::Linear { coefficients, .. } if coefficients.len() != self.dim_z => Err(Error::Config(format!(
                "{} propensity coefficients for {} context dimensions",
                coefficients.len(),
                self.dim_z
            ))),
            PropensityLaw::Linear { .. } if !(self.epsilon > 0.0 && self.epsilon < 0.5) => {
                Err(Error::Config(format!("epsilon {} must lie in (0, 0.5)", self.epsilon)))
            }
            _ => Ok(()),
        }
    }

    /// `f(z) = P(X = 1 | Z = z)`.
    pub fn propensity_at(&self, z: &[f64]) -> f64 {
        match &self.propensity {
            PropensityLaw::Constant(p) => *p,
            PropensityLaw::Linear { intercept, coefficients } => {
                let lin = intercept + coefficients.iter().zip(z).map(|(b, z)| b * z).sum::<f64>();
                self.epsilon + (1.0 - 2.0 * self.epsilon) * expit(lin)
            }
        }
    }

    /// Oracle outcome regression `E[Y | Z = z] = f·expit(β + g) + (1 − f)·expit(g)`.
    pub fn outcome_mean_at(&self, z: &[f64]) -> f64 {
        let g = self.nonlinearity.eval(z);
        let f = self.propensity_at(z);
        f * expit(self.beta + g) + (1.0 - f) * expit(g)
    }
}

/// A PLLM draw with the true regressions alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct PllmSample {
    pub z: DMatrix<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub propensity: Vec<f64>,
    pub outcome_mean: Vec<f64>,
}

impl PllmSample {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `z1, z2, …`
    pub fn names(&self) -> Vec<String> {
        (1..=self.z.ncols()).map(|j| format!("z{j}")).collect()
    }

    /// Shot table: `X = 1` rows belong to [`TARGET_ACTOR`], the rest to [`OTHER_ACTOR`].
    pub fn to_event_table(&self) -> Result<EventTable> {
        let names = self.names();
        let rows = (0..self.len())
            .map(|i| {
                let actor = if self.x[i] == 1.0 { TARGET_ACTOR } else { OTHER_ACTOR };
                names
                    .iter()
                    .enumerate()
                    .fold(EventRow::new(self.y[i], actor), |row, (j, name)| row.with_feature(name.clone(), Value::Num(self.z[(i, j)])))
            })
            .collect();
        EventTable::new(Discipline::Shot, FeatureSpec::numeric(&names), rows)
    }
}

pub fn draw_pllm(config: &PllmConfig) -> Result<PllmSample> {
    config.validate()?;
    let (n, d) = (config.n, config.dim_z);
    let mut rng = seed::rng(config.seed);
    let mut zs = Vec::with_capacity(n * d);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut propensity = Vec::with_capacity(n);
    let mut outcome_mean = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let f = config.propensity_at(&z);
        let xi = f64::from(u8::from(rng.gen::<f64>() < f));
        let p = expit(config.beta * xi + config.nonlinearity.eval(&z));
        y.push(f64::from(u8::from(rng.gen::<f64>() < p)));
        x.push(xi);
        propensity.push(f);
        outcome_mean.push(config.outcome_mean_at(&z));
        zs.extend_from_slice(&z);
    }
    Ok(PllmSample {
        z: DMatrix::from_row_slice(n, d, &zs),
        x,
        y,
        propensity,
        outcome_mean,
    })
}

/// Draws a PLLM sample as an event table (see [`PllmSample::to_event_table`]).
pub fn simulate_pllm(config: &PllmConfig) -> Result<EventTable> {
    draw_pllm(config)?.to_event_table()
}

/// One support point of a discrete law for `(Z, X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawPoint {
    /// `P(Z = z)`
    pub weight: f64,
    /// `P(X = 1 | Z = z)`
    pub propensity: f64,
    /// `E[Y | X = 1, Z = z]`
    pub mean_treated: f64,
    /// `E[Y | X = 0, Z = z]`
    pub mean_control: f64,
}

impl LawPoint {
    pub fn outcome_mean(&self) -> f64 {
        self.propensity * self.mean_treated + (1.0 - self.propensity) * self.mean_control
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    pub points: Vec<LawPoint>,
}

impl DiscreteLaw {
    pub fn new(points: Vec<LawPoint>) -> Result<Self> {
        let law = DiscreteLaw { points };
        law.validate()?;
        Ok(law)
    }

    /// PLLM on a finite support given as `(weight, g(z), f(z))` triples.
    pub fn logistic(beta: f64, support: &[(f64, f64, f64)]) -> Result<Self> {
        DiscreteLaw::new(
            support
                .iter()
                .map(|&(weight, g, f)| LawPoint {
                    weight,
                    propensity: f,
                    mean_treated: expit(beta + g),
                    mean_control: expit(g),
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidInput("empty support".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            for (name, v) in [
                ("weight", p.weight),
                ("propensity", p.propensity),
                ("mean_treated", p.mean_treated),
                ("mean_control", p.mean_control),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("support point {i}: {name} {v} is not a probability")));
                }
            }
        }
        let total: f64 = self.points.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("support weights sum to {total}")));
        }
        Ok(())
    }
}

/// `E[Cov(Y, X | Z)] = E[(f(Z) − f(Z)²)·(E[Y | 1, Z] − E[Y | 0, Z])]` by enumeration.
pub fn brute_force_expected_conditional_cov(law: &DiscreteLaw) -> Result<f64> {
    law.validate()?;
    Ok(law
        .points
        .iter()
        .map(|p| p.weight * (p.propensity - p.propensity * p.propensity) * (p.mean_treated - p.mean_control))
        .sum())
}

/// GCM on `n` draws from `law` with the true regressions plugged in.
pub fn plug_in_gcm(law: &DiscreteLaw, n: usize, seed_value: u64) -> Result<GcmResult> {
    law.validate()?;
    let index = WeightedIndex::new(law.points.iter().map(|p| p.weight)).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = seed::rng(seed_value);
    let mut ry = Vec::with_capacity(n);
    let mut rx = Vec::with_capacity(n);
    for _ in 0..n {
        let p = &law.points[index.sample(&mut rng)];
        let x = rng.gen::<f64>() < p.propensity;
        let mu = if x { p.mean_treated } else { p.mean_control };
        let y = f64::from(u8::from(rng.gen::<f64>() < mu));
        ry.push(y - p.outcome_mean());
        rx.push(f64::from(u8::from(x)) - p.propensity);
    }
    gcm_from_residuals(&ry, &rx, false)
}

/// How `ĥ` and `f̂` are obtained in a calibration cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    /// True `E[Y | Z]` and `f(Z)`.
    Oracle,
    /// True `E[Y | Z]`; propensity replaced by the sample mean of `X`.
    OracleOutcomeConstantPropensity,
    /// Out-of-bag predictions of probability forests for both regressions.
    ForestOob { trees: usize, mtry: Mtry, depth: usize },
    /// In-sample linear logistic fits on `Z` for both (misspecified `ĥ`).
    Logistic,
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Oracle => "oracle".into(),
            Estimator::OracleOutcomeConstantPropensity => "oracle-outcome-constant-propensity".into(),
            Estimator::ForestOob { trees, mtry, depth } => format!("forest-oob(trees={trees},mtry={},depth={depth})", mtry.resolve(3)),
            Estimator::Logistic => "logistic".into(),
        }
    }

    /// Residuals `(Y − ĥ, X − f̂)`.
    pub fn residuals(&self, sample: &PllmSample, seed_value: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (h, f) = match self {
            Estimator::Oracle => (sample.outcome_mean.clone(), sample.propensity.clone()),
            Estimator::OracleOutcomeConstantPropensity => (sample.outcome_mean.clone(), vec![mean(&sample.x); sample.len()]),
            Estimator::ForestOob { trees, mtry, depth } => {
                let grid = TuningGrid::single_forest(*trees, *mtry, *depth);
                let oob = |target: &[f64], s: u64| -> Result<Vec<f64>> {
                    let fit = fit_forest(&sample.z, target, &grid, true, s)?;
                    Ok(fit.oob_predictions().expect("forests carry OOB predictions").to_vec())
                };
                (oob(&sample.y, seed::derive(seed_value, 0))?, oob(&sample.x, seed::derive(seed_value, 1))?)
            }
            Estimator::Logistic => {
                let design = DMatrix::from_fn(sample.len(), sample.z.ncols() + 1, |i, j| if j == 0 { 1.0 } else { sample.z[(i, j - 1)] });
                (fit_logistic(&design, &sample.y)?.predict(&design), fit_logistic(&design, &sample.x)?.predict(&design))
            }
        };
        let ry = sample.y.iter().zip(&h).map(|(y, h)| y - h).collect();
        let rx = sample.x.iter().zip(&f).map(|(x, f)| x - f).collect();
        Ok((ry, rx))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub name: String,
    /// `pllm.seed` is the cell's master seed.
    pub pllm: PllmConfig,
    pub estimator: Estimator,
    pub replications: usize,
    pub alpha: f64,
    pub direction: Direction,
}

impl CalibrationCell {
    /// 500 two-sided replications at `α = 0.05`.
    pub fn new(name: impl Into<String>, pllm: PllmConfig, estimator: Estimator) -> Self {
        CalibrationCell {
            name: name.into(),
            pllm,
            estimator,
            replications: 500,
            alpha: 0.05,
            direction: Direction::TwoSided,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "{} replications requested; studies need at least {MIN_REPLICATIONS}",
                self.replications
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        self.pllm.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub cell: String,
    pub estimator: String,
    pub beta: f64,
    pub n: usize,
    pub replications: usize,
    /// Replications excluded because a fit failed.
    pub failures: usize,
    pub alpha: f64,
    pub rejection_rate: f64,
    pub mean_estimate: f64,
    /// Share of replications whose estimate has the sign of β; `None` for β = 0.
    pub sign_agreement: Option<f64>,
    /// Sample variance of the standardized statistic.
    pub statistic_variance: f64,
    /// Binomial 99% band around `α`.
    pub band_lower: f64,
    pub band_upper: f64,
}

impl CalibrationResult {
    pub fn in_band(&self) -> bool {
        (self.band_lower..=self.band_upper).contains(&self.rejection_rate)
    }
}

struct Replicate {
    estimate: f64,
    statistic: f64,
    p: f64,
}

fn p_for(g: &GcmResult, direction: Direction) -> f64 {
    match direction {
        Direction::TwoSided => g.p_two_sided,
        Direction::Greater => g.p_greater,
        Direction::Less => g.p_less,
    }
}

#[allow(clippy::too_many_arguments)]
fn summarize(cell: &str, estimator: String, beta: f64, n: usize, alpha: f64, runs: Vec<Result<Replicate>>) -> Result<CalibrationResult> {
    let total = runs.len();
    let ok: Vec<Replicate> = runs.into_iter().filter_map(Result::ok).collect();
    let failures = total - ok.len();
    if failures * 100 >= total {
        return Err(Error::ReplicationFailures { failed: failures, total });
    }
    let m = ok.len() as f64;
    let rejections = ok.iter().filter(|r| r.p <= alpha).count() as f64;
    let stats: Vec<f64> = ok.iter().map(|r| r.statistic).collect();
    let sm = mean(&stats);
    let var = stats.iter().map(|s| (s - sm) * (s - sm)).sum::<f64>() / (m - 1.0);
    let sign_agreement = (beta != 0.0).then(|| ok.iter().filter(|r| r.estimate.signum() == beta.signum() && r.estimate != 0.0).count() as f64 / m);
    let half = norm_quantile(0.995) * (alpha * (1.0 - alpha) / total as f64).sqrt();
    Ok(CalibrationResult {
        cell: cell.to_string(),
        estimator,
        beta,
        n,
        replications: total,
        failures,
        alpha,
        rejection_rate: rejections / m,
        mean_estimate: mean(&ok.iter().map(|r| r.estimate).collect::<Vec<_>>()),
        sign_agreement,
        statistic_variance: var,
        band_lower: (alpha - half).max(0.0),
        band_upper: (alpha + half).min(1.0),
    })
}

/// Runs one cell: simulate, estimate both regressions, test, aggregate.
pub fn run_calibration_cell(cell: &CalibrationCell) -> Result<CalibrationResult> {
    cell.validate()?;
    let runs: Vec<Result<Replicate>> = (0..cell.replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed::derive(cell.pllm.seed, r as u64);
            let config = PllmConfig {
                seed: rep_seed,
                ..cell.pllm.clone()
            };
            let sample = draw_pllm(&config)?;
            let (ry, rx) = cell.estimator.residuals(&sample, seed::derive(rep_seed, u64::MAX))?;
            let g = gcm_from_residuals(&ry, &rx, false)?;
            Ok(Replicate {
                estimate: g.mean_estimate,
                statistic: g.statistic,
                p: p_for(&g, cell.direction),
            })
        })
        .collect();
    summarize(&cell.name, cell.estimator.label(), cell.pllm.beta, cell.pllm.n, cell.alpha, runs)
}

pub fn run_calibration(cells: &[CalibrationCell]) -> Result<Vec<CalibrationResult>> {
    cells.iter().map(run_calibration_cell).collect()
}

pub fn write_calibration_csv<W: Write>(results: &[CalibrationResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "cell",
        "estimator",
        "beta",
        "n",
        "replications",
        "failures",
        "alpha",
        "rate",
        "band_lower",
        "band_upper",
        "mean_estimate",
        "sign_agreement",
        "statistic_variance",
    ])?;
    for r in results {
        w.write_record([
            r.cell.clone(),
            r.estimator.clone(),
            r.beta.to_string(),
            r.n.to_string(),
            r.replications.to_string(),
            r.failures.to_string(),
            r.alpha.to_string(),
            r.rejection_rate.to_string(),
            r.band_lower.to_string(),
            r.band_upper.to_string(),
            r.mean_estimate.to_string(),
            r.sign_agreement.map(|v| v.to_string()).unwrap_or_default(),
            r.statistic_variance.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// First match day of simulated leagues.
pub fn league_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 8, 1).expect("valid date")
}

/// Ground truth for `teams` teams `T01, T02, …`: attack ratings evenly spaced
/// over `[−0.3, 0.3]`, defence ratings on a cosine so the two are not
/// collinear, home advantage 0.25, `λ_C = lambda_c`.
pub fn league_truth(teams: usize, lambda_c: f64) -> Result<TeamStrengths> {
    if teams < 2 {
        return Err(Error::Config("a league needs at least two teams".into()));
    }
    if !(lambda_c >= 0.0 && lambda_c.is_finite()) {
        return Err(Error::Config(format!("lambda_c {lambda_c} must be finite and non-negative")));
    }
    let names: Vec<String> = (1..=teams).map(|k| format!("T{k:02}")).collect();
    let t = teams as f64;
    let att: Vec<f64> = (0..teams).map(|k| 0.3 - 0.6 * k as f64 / (t - 1.0)).collect();
    let raw_def: Vec<f64> = (0..teams).map(|k| 0.2 * (2.0 * std::f64::consts::PI * k as f64 / t + 0.5).cos()).collect();
    let shift = mean(&raw_def);
    let att_shift = mean(&att);
    Ok(TeamStrengths {
        intercept: 0.1,
        att: names.iter().cloned().zip(att.iter().map(|a| a - att_shift)).collect(),
        def: names.iter().cloned().zip(raw_def.iter().map(|d| d - shift)).collect(),
        home_advantage: 0.25,
        covariance: lambda_c,
        reference_date: None,
        period_days: None,
        log_likelihood: 0.0,
        iterations: 0,
    })
}

/// Draws `matches` fixtures from the bivariate Poisson model. Fixtures cycle
/// through all ordered pairs, one per day from [`league_start`].
pub fn simulate_league(truth: &TeamStrengths, matches: usize, seed_value: u64) -> Result<MatchTable> {
    let teams: Vec<&String> = truth.att.keys().collect();
    if teams.len() < 2 {
        return Err(Error::Config("a league needs at least two teams".into()));
    }
    if !(truth.covariance >= 0.0 && truth.covariance.is_finite()) {
        return Err(Error::Config("covariance rate must be finite and non-negative".into()));
    }
    let pairs: Vec<(&String, &String)> = teams
        .iter()
        .flat_map(|h| teams.iter().filter(move |a| *a != h).map(move |a| (*h, *a)))
        .collect();
    let poisson = |rng: &mut seed::Rng, lambda: f64| -> Result<u32> {
        if lambda == 0.0 {
            return Ok(0);
        }
        let d = Poisson::new(lambda).map_err(|e| Error::InvalidInput(format!("Poisson rate {lambda}: {e}")))?;
        Ok(d.sample(rng) as u32)
    };
    let mut rng = seed::rng(seed_value);
    let mut out = Vec::with_capacity(matches);
    for m in 0..matches {
        let (home, away) = pairs[m % pairs.len()];
        let (l1, l2) = truth.rates(home, away)?;
        let shared = poisson(&mut rng, truth.covariance)?;
        out.push(Match {
            date: league_start() + Days::new(m as u64),
            home: home.clone(),
            away: away.clone(),
            home_goals: poisson(&mut rng, l1)? + shared,
            away_goals: poisson(&mut rng, l2)? + shared,
        });
    }
    MatchTable::new(out)
}

/// Exponential proportional-hazards spells with independent exponential censoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxSimConfig {
    pub n: usize,
    /// One standard-normal covariate per coefficient.
    pub coefficients: Vec<f64>,
    pub baseline_rate: f64,
    /// Rate of the censoring time; 0 disables censoring.
    pub censoring_rate: f64,
    /// The target actor is assigned with probability `expit(a + b·z₁)`; the
    /// actor never enters the hazard.
    pub assignment_intercept: f64,
    pub assignment_slope: f64,
    pub seed: u64,
}

impl Default for CoxSimConfig {
    fn default() -> Self {
        CoxSimConfig {
            n: 500,
            coefficients: vec![0.5, -0.3],
            baseline_rate: 1.0,
            censoring_rate: 0.3,
            assignment_intercept: -1.0,
            assignment_slope: 0.8,
            seed: 0,
        }
    }
}

impl CoxSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("a survival sample needs at least 2 rows".into()));
        }
        if self.coefficients.is_empty() {
            return Err(Error::Config("at least one covariate is required".into()));
        }
        if !(self.baseline_rate > 0.0 && self.baseline_rate.is_finite()) {
            return Err(Error::Config("baseline rate must be positive".into()));
        }
        if !(self.censoring_rate >= 0.0 && self.censoring_rate.is_finite()) {
            return Err(Error::Config("censoring rate must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn simulate_cox(config: &CoxSimConfig) -> Result<SurvivalTable> {
    config.validate()?;
    let (n, p) = (config.n, config.coefficients.len());
    let mut rng = seed::rng(config.seed);
    let mut zs = Vec::with_capacity(n * p);
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    let mut actors = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let lin: f64 = config.coefficients.iter().zip(&z).map(|(b, z)| b * z).sum();
        let e: f64 = rng.sample(Exp1);
        let t = e / (config.baseline_rate * lin.exp());
        let c = if config.censoring_rate > 0.0 {
            rng.sample::<f64, _>(Exp1) / config.censoring_rate
        } else {
            f64::INFINITY
        };
        let target = rng.gen::<f64>() < expit(config.assignment_intercept + config.assignment_slope * z[0]);
        times.push(t.min(c));
        events.push(t <= c);
        actors.push(if target { TARGET_ACTOR } else { OTHER_ACTOR }.to_string());
        zs.extend_from_slice(&z);
    }
    let names = (1..=p).map(|j| format!("z{j}")).collect();
    SurvivalTable::new(times, events, actors, DMatrix::from_row_slice(n, p, &zs), names)
}

/// Null rIAX study: the actor never affects the hazard, the hazard model is
/// `family` on the covariates and the propensity is a logistic fit.
pub fn run_riax_calibration(config: &CoxSimConfig, family: HazardFamily, replications: usize, alpha: f64) -> Result<CalibrationResult> {
    config.validate()?;
    if replications < MIN_REPLICATIONS {
        return Err(Error::Config(format!("studies need at least {MIN_REPLICATIONS} replications")));
    }
    let metric = MetricConfig {
        propensity: RegressorSpec::Logistic,
        cross_fitting: CrossFitting::None,
        ..MetricConfig::new(MetricKind::Iax)
    };
    let runs: Vec<Result<Replicate>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let sim = CoxSimConfig {
                seed: seed::derive(config.seed, r as u64),
                ..config.clone()
            };
            let table = simulate_cox(&sim)?;
            let hazard = fit_hazard(&table, family)?;
            let (_, g) = compute_riax(&table, TARGET_ACTOR, &hazard, &metric)?;
            Ok(Replicate {
                estimate: g.mean_estimate,
                statistic: g.statistic,
                p: g.p_two_sided,
            })
        })
        .collect();
    let label = match family {
        HazardFamily::NelsonAalen => "nelson-aalen/logistic",
        HazardFamily::CoxBreslow => "cox-breslow/logistic",
    };
    summarize("riax-null", label.to_string(), 0.0, config.n, alpha, runs)
}
