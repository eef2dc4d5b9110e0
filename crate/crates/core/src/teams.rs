//! Attack and defence ratings from a recency-weighted bivariate Poisson
//! model of match scores.
//!
//! Home goals `z` and away goals `y` share a common component:
//! `z = a + c`, `y = b + c` with independent Poisson `a ~ λ₁`, `b ~ λ₂`,
//! `c ~ λ_C`, where `log λ₁ = β₀ + att_home − def_away + homeAdvantage` and
//! `log λ₂ = β₀ + att_away − def_home`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use libm::lgamma;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventTable, Value};
use crate::metrics::MetricKind;

pub const DEFAULT_PERIOD_DAYS: f64 = 500.0;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 2000;
/// Range of `ψ = log λ_C`.
pub const PSI_MIN: f64 = -30.0;
pub const PSI_MAX: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub date: NaiveDate,
    pub home: String,
    pub away: String,
    pub home_goals: u32,
    pub away_goals: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MatchTable {
    pub matches: Vec<Match>,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    ["%Y-%m-%d", "%d/%m/%y", "%d/%m/%Y"]
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s.trim(), f).ok())
}

impl MatchTable {
    pub fn new(matches: Vec<Match>) -> Result<Self> {
        for (i, m) in matches.iter().enumerate() {
            if m.home.is_empty() || m.away.is_empty() || m.home == m.away {
                return Err(Error::InvalidRow {
                    row: i + 1,
                    message: "a match needs two distinct team names".into(),
                });
            }
        }
        Ok(MatchTable { matches })
    }

    /// Reads `date,home_team,away_team,home_goals,away_goals`; the
    /// football-data names `Date,HomeTeam,AwayTeam,FTHG,FTAG` also work.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |names: &[&str]| -> Result<usize> {
            headers
                .iter()
                .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
                .ok_or_else(|| Error::MissingColumn(names[0].to_string()))
        };
        let di = find(&["date"])?;
        let hi = find(&["home_team", "HomeTeam", "home"])?;
        let ai = find(&["away_team", "AwayTeam", "away"])?;
        let hg = find(&["home_goals", "FTHG"])?;
        let ag = find(&["away_goals", "FTAG"])?;
        let mut matches = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let goals = |idx: usize, col: &str| -> Result<u32> {
                rec[idx].trim().parse::<u32>().map_err(|_| Error::NonNumeric {
                    row,
                    column: col.to_string(),
                    value: rec[idx].to_string(),
                })
            };
            matches.push(Match {
                date: parse_date(&rec[di]).ok_or_else(|| Error::InvalidRow {
                    row,
                    message: format!("unparseable date '{}'", &rec[di]),
                })?,
                home: rec[hi].trim().to_string(),
                away: rec[ai].trim().to_string(),
                home_goals: goals(hg, "home_goals")?,
                away_goals: goals(ag, "away_goals")?,
            });
        }
        Self::new(matches)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(f)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "home_team", "away_team", "home_goals", "away_goals"])?;
        for m in &self.matches {
            w.write_record([
                m.date.format("%Y-%m-%d").to_string(),
                m.home.clone(),
                m.away.clone(),
                m.home_goals.to_string(),
                m.away_goals.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn teams(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.matches.iter().flat_map(|m| [m.home.as_str(), m.away.as_str()]).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn latest_date(&self) -> Option<NaiveDate> {
        self.matches.iter().map(|m| m.date).max()
    }
}

fn ln_poisson(k: u32, log_rate: f64, rate: f64) -> f64 {
    f64::from(k) * log_rate - rate - lgamma(f64::from(k) + 1.0)
}

/// Log-probabilities of the `k` shared-goal terms, `k = 0..=min(z, y)`.
fn shared_terms(z: u32, y: u32, l1: f64, l2: f64, lc: f64) -> Vec<f64> {
    let (ll1, ll2) = (l1.ln(), l2.ln());
    let kmax = if lc > 0.0 { z.min(y) } else { 0 };
    let llc = if lc > 0.0 { lc.ln() } else { 0.0 };
    (0..=kmax)
        .map(|k| ln_poisson(z - k, ll1, l1) + ln_poisson(y - k, ll2, l2) + ln_poisson(k, llc, lc))
        .collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log of the bivariate Poisson probability of scores `(z, y)`.
pub fn bivpois_log_pmf(z: i64, y: i64, lambda1: f64, lambda2: f64, lambda_c: f64) -> Result<f64> {
    if z < 0 || y < 0 {
        return Err(Error::InvalidInput(format!("negative goal count ({z}, {y})")));
    }
    if !(lambda1 > 0.0 && lambda2 > 0.0 && lambda_c >= 0.0) || !(lambda1.is_finite() && lambda2.is_finite() && lambda_c.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid rates ({lambda1}, {lambda2}, {lambda_c})")));
    }
    Ok(log_sum_exp(&shared_terms(z as u32, y as u32, lambda1, lambda2, lambda_c)))
}

/// `(1/2)^(d/p)` for a match `d` days before the reference date.
pub fn recency_weight(match_date: NaiveDate, reference: NaiveDate, period_days: f64) -> Result<f64> {
    if match_date > reference {
        return Err(Error::FutureMatch {
            match_date,
            reference,
        });
    }
    if !(period_days > 0.0) {
        return Err(Error::Config(format!("period {period_days} must be positive")));
    }
    let d = (reference - match_date).num_days() as f64;
    Ok(0.5f64.powf(d / period_days))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamStrengths {
    pub intercept: f64,
    pub att: BTreeMap<String, f64>,
    pub def: BTreeMap<String, f64>,
    pub home_advantage: f64,
    /// Covariance rate `λ_C`.
    pub covariance: f64,
    pub reference_date: Option<NaiveDate>,
    /// `None` when explicit weights were supplied.
    pub period_days: Option<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl TeamStrengths {
    /// Expected goals `(λ_home, λ_away)` for a fixture.
    pub fn rates(&self, home: &str, away: &str) -> Result<(f64, f64)> {
        let get = |m: &BTreeMap<String, f64>, t: &str| m.get(t).copied().ok_or_else(|| Error::UnknownTeam(t.to_string()));
        Ok((
            (self.intercept + get(&self.att, home)? - get(&self.def, away)? + self.home_advantage).exp(),
            (self.intercept + get(&self.att, away)? - get(&self.def, home)?).exp(),
        ))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["team", "att", "def"])?;
        for (team, att) in &self.att {
            w.write_record([team.clone(), format!("{att}"), format!("{}", self.def[team])])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Parameter layout: `[β₀, att₁..att_{T−1}, def₁..def_{T−1}, home, u]` with
/// the last rating of each block minus the sum of the others and
/// `ψ = PSI_MIN + (PSI_MAX − PSI_MIN)·sigmoid(u)`.
pub(crate) struct Objective {
    teams: usize,
    fixtures: Vec<(usize, usize, u32, u32, f64)>,
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

impl Objective {
    pub(crate) fn new(table: &MatchTable, teams: &[String], weights: &[f64]) -> Self {
        let index: BTreeMap<&str, usize> = teams.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        Objective {
            teams: teams.len(),
            fixtures: table
                .matches
                .iter()
                .zip(weights)
                .map(|(m, &w)| (index[m.home.as_str()], index[m.away.as_str()], m.home_goals, m.away_goals, w))
                .collect(),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        2 * self.teams + 1
    }

    fn ratings(&self, free: &[f64]) -> Vec<f64> {
        let mut r = free.to_vec();
        r.push(-free.iter().sum::<f64>());
        r
    }

    fn unpack(&self, theta: &[f64]) -> (f64, Vec<f64>, Vec<f64>, f64, f64) {
        let t = self.teams;
        let att = self.ratings(&theta[1..t]);
        let def = self.ratings(&theta[t..2 * t - 1]);
        let psi = PSI_MIN + (PSI_MAX - PSI_MIN) * sigmoid(theta[2 * t]);
        (theta[0], att, def, theta[2 * t - 1], psi)
    }

    /// Weighted log-likelihood and its gradient.
    pub(crate) fn eval(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let t = self.teams;
        let (b0, att, def, home, psi) = self.unpack(theta);
        let lc = psi.exp();
        let mut ll = 0.0;
        let mut g_b0 = 0.0;
        let mut g_att = vec![0.0; t];
        let mut g_def = vec![0.0; t];
        let mut g_home = 0.0;
        let mut g_psi = 0.0;
        for &(i, j, z, y, w) in &self.fixtures {
            let l1 = (b0 + att[i] - def[j] + home).exp();
            let l2 = (b0 + att[j] - def[i]).exp();
            let terms = shared_terms(z, y, l1, l2, lc);
            let lse = log_sum_exp(&terms);
            ll += w * lse;
            let ek: f64 = terms.iter().enumerate().map(|(k, v)| k as f64 * (v - lse).exp()).sum();
            let g1 = w * (f64::from(z) - l1 - ek);
            let g2 = w * (f64::from(y) - l2 - ek);
            g_b0 += g1 + g2;
            g_home += g1;
            g_att[i] += g1;
            g_def[j] -= g1;
            g_att[j] += g2;
            g_def[i] -= g2;
            g_psi += w * (ek - lc);
        }
        let mut grad = Vec::with_capacity(self.dim());
        grad.push(g_b0);
        grad.extend((0..t - 1).map(|k| g_att[k] - g_att[t - 1]));
        grad.extend((0..t - 1).map(|k| g_def[k] - g_def[t - 1]));
        grad.push(g_home);
        let s = sigmoid(theta[2 * t]);
        grad.push(g_psi * (PSI_MAX - PSI_MIN) * s * (1.0 - s));
        (ll, grad)
    }
}

/// Components of the schedule graph (teams linked by a match).
fn components(table: &MatchTable, teams: &[String]) -> usize {
    let index: BTreeMap<&str, usize> = teams.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut parent: Vec<usize> = (0..teams.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for m in &table.matches {
        let a = root(&mut parent, index[m.home.as_str()]);
        let b = root(&mut parent, index[m.away.as_str()]);
        parent[a] = b;
    }
    (0..teams.len()).filter(|&i| root(&mut parent, i) == i).count()
}

/// Weighted log-likelihood and its gradient at `theta`, in the layout
/// `[β₀, att₁..att_{T−1}, def₁..def_{T−1}, home, u]` over the sorted team
/// names (the last team's ratings are minus the sum of the others, and
/// `λ_C = exp(PSI_MIN + (PSI_MAX − PSI_MIN)·sigmoid(u))`).
pub fn log_likelihood(table: &MatchTable, weights: &[f64], theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    if weights.len() != table.matches.len() {
        return Err(Error::InvalidInput("one weight per match required".into()));
    }
    let teams = table.teams();
    let obj = Objective::new(table, &teams, weights);
    if theta.len() != obj.dim() {
        return Err(Error::InvalidInput(format!("theta has {} entries, expected {}", theta.len(), obj.dim())));
    }
    Ok(obj.eval(theta))
}

/// Maximizes `Σ w_m log P(z_m, y_m)` by BFGS with an Armijo line search.
pub fn fit_team_strengths_weighted(table: &MatchTable, weights: &[f64]) -> Result<(TeamStrengths, Vec<f64>)> {
    if weights.len() != table.matches.len() {
        return Err(Error::InvalidInput("one weight per match required".into()));
    }
    let teams = table.teams();
    if teams.len() < 2 {
        return Err(Error::InvalidInput("need at least two teams".into()));
    }
    let c = components(table, &teams);
    if c > 1 {
        return Err(Error::DisconnectedSchedule { components: c });
    }
    let obj = Objective::new(table, &teams, weights);
    let n = obj.dim();
    // start: overall log scoring rate, small covariance
    let wsum: f64 = weights.iter().sum();
    let goals: f64 = table.matches.iter().zip(weights).map(|(m, w)| w * f64::from(m.home_goals + m.away_goals)).sum();
    let mut theta = vec![0.0; n];
    theta[0] = (goals / (2.0 * wsum)).max(0.05).ln();
    // ψ ≈ −5
    theta[n - 1] = ((-5.0 - PSI_MIN) / (PSI_MAX - PSI_MIN) / (1.0 - (-5.0 - PSI_MIN) / (PSI_MAX - PSI_MIN))).ln();

    let (mut f, mut g) = obj.eval(&theta);
    let mut trace = vec![f];
    let mut h_inv = DMatrix::<f64>::identity(n, n) / wsum.max(1.0);
    let mut iterations = 0;
    while g.iter().fold(0.0f64, |m, v| m.max(v.abs())) >= GRADIENT_TOLERANCE {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                what: "bivariate Poisson likelihood",
                iterations,
            });
        }
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        // ascent direction
        let mut dir = &h_inv * &gv;
        if dir.dot(&gv) <= 0.0 {
            h_inv = DMatrix::identity(n, n) / wsum.max(1.0);
            dir = &h_inv * &gv;
        }
        let slope = dir.dot(&gv);
        let gnorm = gv.norm();
        // near the optimum ℓ stops resolving progress; a smaller gradient then decides
        let stalled = |g: &[f64], f: f64| g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-7 * f.abs().max(1.0);
        let mut step = 1.0;
        let accepted = loop {
            let cand: Vec<f64> = theta.iter().zip(dir.iter()).map(|(t, d)| t + step * d).collect();
            let (cf, cg) = obj.eval(&cand);
            let flat = (cf - f).abs() <= 1e-12 * f.abs().max(1.0);
            let smaller = cg.iter().map(|v| v * v).sum::<f64>().sqrt() < gnorm;
            if cf.is_finite() && (cf >= f + 1e-4 * step * slope || (flat && smaller)) && cand != theta {
                break Some((cand, cf, cg));
            }
            step *= 0.5;
            if step < 1e-14 {
                break None;
            }
        };
        let Some((new_theta, nf, ng)) = accepted else {
            if stalled(&g, f) {
                return finish(table, &teams, &obj, theta, f, iterations, trace);
            }
            return Err(Error::NonConvergence {
                what: "bivariate Poisson likelihood",
                iterations,
            });
        };
        let s = DVector::from_iterator(n, new_theta.iter().zip(&theta).map(|(a, b)| a - b));
        // y for the minimization of −ℓ
        let yv = DVector::from_iterator(n, g.iter().zip(&ng).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        theta = new_theta;
        f = nf;
        g = ng;
        trace.push(f);
    }
    finish(table, &teams, &obj, theta, f, iterations, trace)
}

fn finish(
    table: &MatchTable,
    teams: &[String],
    obj: &Objective,
    theta: Vec<f64>,
    ll: f64,
    iterations: usize,
    trace: Vec<f64>,
) -> Result<(TeamStrengths, Vec<f64>)> {
    let (b0, att, def, home, psi) = obj.unpack(&theta);
    Ok((
        TeamStrengths {
            intercept: b0,
            att: teams.iter().cloned().zip(att).collect(),
            def: teams.iter().cloned().zip(def).collect(),
            home_advantage: home,
            covariance: psi.exp(),
            reference_date: table.latest_date(),
            period_days: None,
            log_likelihood: ll,
            iterations,
        },
        trace,
    ))
}

/// Recency-weighted fit. The reference date defaults to the latest match.
pub fn fit_team_strengths(table: &MatchTable, reference: Option<NaiveDate>, period_days: f64) -> Result<TeamStrengths> {
    let reference = match reference.or_else(|| table.latest_date()) {
        Some(d) => d,
        None => return Err(Error::InvalidInput("no matches".into())),
    };
    let weights = table
        .matches
        .iter()
        .map(|m| recency_weight(m.date, reference, period_days))
        .collect::<Result<Vec<f64>>>()?;
    let (mut s, _) = fit_team_strengths_weighted(table, &weights)?;
    s.reference_date = Some(reference);
    s.period_days = Some(period_days);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrengthSide {
    /// Defensive rating of the team facing the shot.
    Defending,
    /// Attacking rating of the shooting team.
    Attacking,
}

impl StrengthSide {
    pub fn column(self) -> &'static str {
        match self {
            StrengthSide::Defending => "opponent_def",
            StrengthSide::Attacking => "team_att",
        }
    }
}

/// Appends the team-strength feature named by [`StrengthSide::column`].
/// Offensive strength is a poor control for shooter metrics, so attacking
/// ratings on a `gax` pipeline need `allow_offensive`.
pub fn attach_strength_features(
    shots: &EventTable,
    strengths: &TeamStrengths,
    side: StrengthSide,
    metric: MetricKind,
    allow_offensive: bool,
) -> Result<EventTable> {
    if side == StrengthSide::Attacking && metric == MetricKind::Gax && !allow_offensive {
        return Err(Error::Config(
            "attacking-strength features are refused for gax pipelines; pass the override to force them".into(),
        ));
    }
    let mut values = Vec::with_capacity(shots.len());
    for (i, row) in shots.rows().iter().enumerate() {
        let (team, map) = match side {
            StrengthSide::Defending => (row.team_against.as_deref(), &strengths.def),
            StrengthSide::Attacking => (row.team_for.as_deref(), &strengths.att),
        };
        let team = team.ok_or_else(|| Error::InvalidRow {
            row: i + 1,
            message: format!("no team recorded for the {} side", side.column()),
        })?;
        values.push(*map.get(team).ok_or_else(|| Error::UnknownTeam(team.to_string()))?);
    }
    let out = shots.with_numeric_column(side.column(), &values)?;
    debug_assert!(out.rows().iter().all(|r| matches!(r.features.get(side.column()), Some(Value::Num(_)))));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Discipline, EventRow, FeatureSpec};
    use approx::assert_abs_diff_eq;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn ln_pois(k: i64, l: f64) -> f64 {
        k as f64 * l.ln() - l - lgamma(k as f64 + 1.0)
    }

    #[test]
    fn pmf_special_cases() {
        assert_abs_diff_eq!(bivpois_log_pmf(0, 0, 1.2, 0.7, 0.3).unwrap(), -(1.2 + 0.7 + 0.3), epsilon = 1e-15);
        for z in 0..10 {
            for y in 0..10 {
                let a = bivpois_log_pmf(z, y, 1.3 + z as f64 * 0.1, 0.8, 0.0).unwrap();
                let b = ln_pois(z, 1.3 + z as f64 * 0.1) + ln_pois(y, 0.8);
                assert!((a - b).abs() <= 1e-12, "{z},{y}");
            }
        }
        assert!(bivpois_log_pmf(-1, 0, 1.0, 1.0, 0.0).is_err());
        assert!(bivpois_log_pmf(1, 0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn pmf_matches_direct_sum() {
        // direct evaluation of the closed form, k = 0, 1
        let (l1, l2, lc) = (1.4f64, 0.9f64, 0.2f64);
        let pre = l1.powi(2) * l2 / 2.0 * (-(l1 + l2 + lc)).exp();
        let direct = pre * (1.0 + 2.0 * 1.0 * 1.0 * (lc / (l1 * l2)));
        assert_abs_diff_eq!(bivpois_log_pmf(2, 1, l1, l2, lc).unwrap(), direct.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(bivpois_log_pmf(2, 1, l1, l2, lc).unwrap(), -2.3498573415702805, epsilon = 1e-13);
    }

    #[test]
    fn pmf_sums_to_one() {
        let mut total = 0.0;
        for z in 0..60 {
            for y in 0..60 {
                total += bivpois_log_pmf(z, y, 1.7, 1.1, 0.4).unwrap().exp();
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn recency_weights() {
        assert_eq!(recency_weight(d("2020-01-01"), d("2020-01-01"), 500.0).unwrap(), 1.0);
        let base = d("2020-01-01");
        assert_eq!(recency_weight(base, base + chrono::Days::new(500), 500.0).unwrap(), 0.5);
        assert_eq!(recency_weight(base, base + chrono::Days::new(1000), 500.0).unwrap(), 0.25);
        assert!(matches!(recency_weight(d("2020-01-02"), base, 500.0), Err(Error::FutureMatch { .. })));
    }

    fn round_robin(scores: &[(u32, u32)]) -> MatchTable {
        let teams = ["A", "B", "C", "D"];
        let mut m = Vec::new();
        for (i, h) in teams.iter().enumerate() {
            for (j, a) in teams.iter().enumerate() {
                if i != j {
                    for &(hg, ag) in scores {
                        m.push(Match {
                            date: d("2021-03-01"),
                            home: h.to_string(),
                            away: a.to_string(),
                            home_goals: hg,
                            away_goals: ag,
                        });
                    }
                }
            }
        }
        MatchTable::new(m).unwrap()
    }

    #[test]
    fn symmetric_round_robin_gives_zero_ratings() {
        // every 1-1 would let the shared component absorb all goals (λ_C → 1,
        // β₀ → −∞); balanced scores keep the model identified
        let s = fit_team_strengths(&round_robin(&[(2, 0), (0, 2), (1, 1)]), None, 500.0).unwrap();
        for v in s.att.values().chain(s.def.values()) {
            assert!(v.abs() < 1e-6, "{v}");
        }
        assert!(s.home_advantage.abs() < 1e-6);
        assert!(s.att.values().sum::<f64>().abs() < 1e-8);
        assert!(s.def.values().sum::<f64>().abs() < 1e-8);
        assert!(s.covariance >= 0.0);
    }

    #[test]
    fn unit_weights_equal_unweighted() {
        let t = round_robin(&[(2, 1)]);
        let a = fit_team_strengths(&t, None, 500.0).unwrap();
        let (b, _) = fit_team_strengths_weighted(&t, &vec![1.0; t.matches.len()]).unwrap();
        assert_eq!(a.att, b.att);
        assert_eq!(a.home_advantage, b.home_advantage);
    }

    #[test]
    fn disconnected_schedule_is_rejected() {
        let mk = |h: &str, a: &str| Match {
            date: d("2021-01-01"),
            home: h.into(),
            away: a.into(),
            home_goals: 1,
            away_goals: 0,
        };
        let t = MatchTable::new(vec![mk("A", "B"), mk("B", "A"), mk("C", "D"), mk("D", "C")]).unwrap();
        assert!(matches!(fit_team_strengths(&t, None, 500.0), Err(Error::DisconnectedSchedule { components: 2 })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = round_robin(&[(2, 1)]);
        let mut m = t.matches.clone();
        for (k, x) in m.iter_mut().enumerate() {
            x.home_goals = (k % 4) as u32;
            x.away_goals = (k % 3) as u32;
        }
        let t = MatchTable::new(m).unwrap();
        let teams = t.teams();
        let w: Vec<f64> = (0..t.matches.len()).map(|k| 0.5 + (k % 5) as f64 * 0.1).collect();
        let obj = Objective::new(&t, &teams, &w);
        let mut rng = crate::seed::rng(4);
        use rand::Rng;
        for _ in 0..10 {
            let theta: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let (_, g) = obj.eval(&theta);
            for k in 0..theta.len() {
                let h = 1e-5;
                let mut a = theta.clone();
                let mut b = theta.clone();
                a[k] += h;
                b[k] -= h;
                let fd = (obj.eval(&a).0 - obj.eval(&b).0) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "component {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn attach_features() {
        let s = fit_team_strengths(&round_robin(&[(2, 1)]), None, 500.0).unwrap();
        let mut rows = Vec::new();
        for (i, (f, a)) in [("A", "B"), ("B", "A"), ("A", "B")].iter().enumerate() {
            let mut r = EventRow::new(f64::from(u8::from(i == 0)), "p");
            r.team_for = Some(f.to_string());
            r.team_against = Some(a.to_string());
            rows.push(r);
        }
        let shots = EventTable::new(Discipline::Shot, FeatureSpec::new(vec![]), rows).unwrap();
        let out = attach_strength_features(&shots, &s, StrengthSide::Defending, MetricKind::Gax, false).unwrap();
        let col: BTreeSet<u64> = out.numeric_column("opponent_def").unwrap().iter().map(|v| v.unwrap().to_bits()).collect();
        assert!(col.len() <= 2);
        assert!(attach_strength_features(&shots, &s, StrengthSide::Attacking, MetricKind::Gax, false).is_err());
        assert!(attach_strength_features(&shots, &s, StrengthSide::Attacking, MetricKind::Gsax, false).is_ok());
        let mut unknown = s.clone();
        unknown.def.remove("B");
        assert!(matches!(
            attach_strength_features(&shots, &unknown, StrengthSide::Defending, MetricKind::Gax, false),
            Err(Error::UnknownTeam(_))
        ));
    }

    #[test]
    fn strengths_csv_round_trip_of_matches() {
        let t = round_robin(&[(1, 0)]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(MatchTable::read(&buf[..]).unwrap(), t);
        let fd = "Date,HomeTeam,AwayTeam,FTHG,FTAG\n14/08/21,Brentford,Arsenal,2,0\n";
        let m = MatchTable::read(fd.as_bytes()).unwrap();
        assert_eq!(m.matches[0].home_goals, 2);
        assert_eq!(m.matches[0].date, d("2021-08-14"));
    }
}
