//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers to run a subset:
//! `cargo test --test acceptance -- 4 10`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rgax::events::{ColumnKind, ColumnSpec, Discipline, EventRow, EventTable, FeatureEncoder, FeatureSpec, Value};
use rgax::gcm::{confidence_interval, Direction, GcmResult, IntervalSpec, Sidedness};
use rgax::metrics::{compare_models_robustness, compute_classical, compute_residualized, MetricConfig, MetricKind};
use rgax::multiplicity::{adjust, AdjustmentMethod};
use rgax::regress::{FittedRegressor, Mtry, RegressorSpec};
use rgax::score::logistic_score;
use rgax::seed;
use rgax::sim::{
    brute_force_expected_conditional_cov, draw_pllm, league_truth, plug_in_gcm, run_calibration_cell, run_riax_calibration,
    simulate_cox, simulate_league, CalibrationCell, CalibrationResult, CoxSimConfig, DiscreteLaw, Estimator, LawPoint, PllmConfig,
    TARGET_ACTOR,
};
use rgax::stats::expit;
use rgax::survival::{compute_iax, compute_riax, fit_hazard, fit_nelson_aalen, martingale_residuals, HazardFamily, SurvivalTable};
use rgax::teams::{bivpois_log_pmf, fit_team_strengths_weighted, log_likelihood, recency_weight};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

// Tolerances and study sizes.
const SCORE_TOL: f64 = 1e-8;
const SCORE_BUDGET_SECS: f64 = 10.0;
const BAND: (f64, f64) = (0.025, 0.075);
const ALPHA: f64 = 0.05;
const ANCHOR_TOL: f64 = 1e-4;
const BRUTE_TOL: f64 = 1e-12;
const COVERAGE_MIN: f64 = 0.99;
const SIGN_MIN: f64 = 0.99;
const POWER_MIN: f64 = 0.8;
const FACTOR_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-5;
const RATING_TOL: f64 = 0.15;
const RECOVERY_MIN: f64 = 0.90;
const MARTINGALE_TOL: f64 = 1e-6;
const ADJUST_TOL: f64 = 1e-12;

fn band_ok(r: &CalibrationResult) -> bool {
    r.failures * 100 < r.replications && (BAND.0..=BAND.1).contains(&r.rejection_rate)
}

fn shown(r: &CalibrationResult) -> String {
    format!(
        "rate {:.3} over {} reps, {} failed, band [{}, {}], var(T) {:.3}",
        r.rejection_rate, r.replications, r.failures, BAND.0, BAND.1, r.statistic_variance
    )
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion_01() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for s in 0..20u64 {
        let cfg = PllmConfig {
            n: 1000,
            beta: 0.5,
            seed: seed::derive(101, s),
            ..PllmConfig::default()
        };
        let sample = draw_pllm(&cfg).map_err(err)?;
        let table = sample.to_event_table().map_err(err)?;
        let z = DMatrix::from_fn(sample.len(), 4, |i, j| if j == 0 { 1.0 } else { sample.z[(i, j - 1)] });
        let score = logistic_score(&sample.y, &sample.x, &z).map_err(err)?.score;
        let enc = FeatureEncoder::fit(&table).map_err(err)?;
        let model = RegressorSpec::Logistic.fit_table(&table, &enc, &table.indicator_outcomes(), 0).map_err(err)?;
        let gax = compute_classical(&table, TARGET_ACTOR, &model, false).map_err(err)?;
        worst = worst.max((score - gax).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= SCORE_TOL && secs < SCORE_BUDGET_SECS,
        format!("max |score - GAX| {worst:.2e} over 20 datasets, {secs:.2}s"),
    ))
}

fn calibration(name: &str, estimator: Estimator, beta: f64, reps: usize, direction: Direction, seed_value: u64) -> Result<CalibrationResult, String> {
    let pllm = PllmConfig {
        n: 2000,
        beta,
        seed: seed_value,
        ..PllmConfig::default()
    };
    let mut cell = CalibrationCell::new(name, pllm, estimator);
    cell.replications = reps;
    cell.alpha = ALPHA;
    cell.direction = direction;
    run_calibration_cell(&cell).map_err(err)
}

fn criterion_02() -> Outcome {
    let forest = Estimator::ForestOob {
        trees: 100,
        mtry: Mtry::All,
        depth: 5,
    };
    let r = calibration("forest-oob-null", forest, 0.0, 500, Direction::TwoSided, 1)?;
    Ok((band_ok(&r), shown(&r)))
}

fn criterion_03() -> Outcome {
    let r = calibration("oracle-outcome-constant-propensity", Estimator::OracleOutcomeConstantPropensity, 0.0, 500, Direction::TwoSided, 2)?;
    Ok((band_ok(&r), shown(&r)))
}

fn criterion_04() -> Outcome {
    let null = DiscreteLaw::logistic(0.0, &[(0.2, -1.0, 0.1), (0.5, 0.3, 0.6), (0.3, 2.0, 0.85)]).map_err(err)?;
    let null_value = brute_force_expected_conditional_cov(&null).map_err(err)?;
    let point = |weight| LawPoint {
        weight,
        propensity: 0.5,
        mean_treated: 0.9,
        mean_control: 0.5,
    };
    let worked = DiscreteLaw::new(vec![point(0.5), point(0.5)]).map_err(err)?;
    let truth = brute_force_expected_conditional_cov(&worked).map_err(err)?;

    let law = DiscreteLaw::logistic(0.8, &[(0.25, -1.0, 0.2), (0.25, 0.0, 0.5), (0.3, 0.5, 0.7), (0.2, 1.5, 0.4)]).map_err(err)?;
    let target = brute_force_expected_conditional_cov(&law).map_err(err)?;
    let mut covered = 0;
    for r in 0..1000u64 {
        let g = plug_in_gcm(&law, 5000, seed::derive(404, r)).map_err(err)?;
        if (g.mean_estimate - target).abs() <= 3.0 * g.sd_products / (g.n as f64).sqrt() {
            covered += 1;
        }
    }
    let coverage = covered as f64 / 1000.0;
    Ok((
        null_value == 0.0 && (truth - 0.1).abs() <= BRUTE_TOL && coverage >= COVERAGE_MIN,
        format!("null law {null_value:e}, worked law {truth:.15}, 3-SE coverage {coverage:.3}"),
    ))
}

fn criterion_05() -> Outcome {
    let forest = Estimator::ForestOob {
        trees: 100,
        mtry: Mtry::All,
        depth: 5,
    };
    let r = calibration("forest-oob-power", forest, 1.0, 200, Direction::Greater, 3)?;
    let sign = r.sign_agreement.unwrap_or(0.0);
    Ok((
        r.failures * 100 < r.replications && sign >= SIGN_MIN && r.rejection_rate >= POWER_MIN,
        format!("sign agreement {sign:.3}, one-sided power {:.3} over {} reps", r.rejection_rate, r.replications),
    ))
}

fn criterion_06() -> Outcome {
    let n = 1000usize;
    let (sum, sd_sum) = (9.969451, 2.773443);
    let sd = sd_sum / (n as f64).sqrt();
    let result = GcmResult {
        products: Vec::new(),
        n,
        sum_scale_estimate: sum,
        mean_estimate: sum / n as f64,
        sd_products: sd,
        sd_sum,
        statistic: sum / sd_sum,
        p_two_sided: 0.0,
        p_greater: 0.0,
        p_less: 0.0,
        sign_flip: false,
    };
    let spec = IntervalSpec::new(0.95, Sidedness::TwoSided).map_err(err)?.with_critical_value(1.96);
    let ci = confidence_interval(&result, &spec).map_err(err)?;
    let ok = (ci.lower - 4.533501).abs() <= ANCHOR_TOL && (ci.upper - 15.405400).abs() <= ANCHOR_TOL;
    Ok((ok, format!("[{:.6}, {:.6}]", ci.lower, ci.upper)))
}

/// Shots with two numeric context features, outcome from a logistic law.
fn random_shots(n: usize, actors: usize, on_target: bool, seed_value: u64) -> Result<EventTable, String> {
    let mut rng = seed::rng(seed_value);
    let rows = (0..n)
        .map(|_| {
            let d: f64 = rng.gen_range(4.0..30.0);
            let a: f64 = rng.gen_range(0.1..1.4);
            let y = f64::from(u8::from(rng.gen::<f64>() < expit(1.2 - 0.12 * d + 0.9 * a)));
            let mut row = EventRow::new(y, format!("p{:02}", rng.gen_range(0..actors)))
                .with_feature("dist", Value::Num(d))
                .with_feature("angle", Value::Num(a));
            row.on_target = on_target.then_some(true);
            row
        })
        .collect();
    let discipline = if on_target { Discipline::ShotOnTarget } else { Discipline::Shot };
    EventTable::new(discipline, FeatureSpec::numeric(&["dist", "angle"]), rows).map_err(err)
}

fn logistic_model(table: &EventTable, seed_value: u64) -> Result<FittedRegressor, String> {
    let enc = FeatureEncoder::fit(table).map_err(err)?;
    RegressorSpec::Logistic.fit_table(table, &enc, &table.indicator_outcomes(), seed_value).map_err(err)
}

fn criterion_07() -> Outcome {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for s in 0..5u64 {
        let shots = random_shots(800, 12, false, seed::derive(707, s))?;
        let model = logistic_model(&shots, s)?;
        let keepers = random_shots(600, 8, true, seed::derive(708, s))?;
        let kmodel = logistic_model(&keepers, s)?;
        let gax = MetricConfig::without_propensity(MetricKind::Gax);
        let gsax = MetricConfig::without_propensity(MetricKind::Gsax);
        for actor in shots.actors() {
            let (e, _) = compute_residualized(&shots, &actor, &model, &gax).map_err(err)?;
            let direct = compute_classical(&shots, &actor, &model, false).map_err(err)?;
            checked += 1;
            if e.residualized != e.classical || (direct - e.classical).abs() > 1e-12 * (1.0 + direct.abs()) {
                mismatches.push(format!("gax {actor}"));
            }
        }
        for actor in keepers.actors() {
            let (k, _) = compute_residualized(&keepers, &actor, &kmodel, &gsax).map_err(err)?;
            let (g, _) = compute_residualized(&keepers, &actor, &kmodel, &gax).map_err(err)?;
            checked += 1;
            if k.residualized != k.classical || k.classical != -g.classical || k.residualized != -g.residualized {
                mismatches.push(format!("gsax {actor}"));
            }
        }
        let spells = simulate_cox(&CoxSimConfig {
            n: 300,
            seed: seed::derive(709, s),
            ..CoxSimConfig::default()
        })
        .map_err(err)?;
        let iax = MetricConfig::without_propensity(MetricKind::Iax);
        for family in [HazardFamily::CoxBreslow, HazardFamily::NelsonAalen] {
            let hazard = fit_hazard(&spells, family).map_err(err)?;
            for actor in spells.actors.iter().collect::<std::collections::BTreeSet<_>>() {
                let (e, _) = compute_riax(&spells, actor, &hazard, &iax).map_err(err)?;
                let classical = compute_iax(&spells, actor, &hazard).map_err(err)?;
                checked += 1;
                if e.residualized != classical || e.classical != classical {
                    mismatches.push(format!("iax {actor}"));
                }
            }
        }
    }
    // one conceded shot at h = 0.9 is worth -0.1 to the keeper
    let one = EventTable::new(
        Discipline::ShotOnTarget,
        FeatureSpec::numeric(&["dist"]),
        vec![EventRow::new(1.0, "k").with_feature("dist", Value::Num(11.0))],
    )
    .map_err(err)?;
    let conceded = compute_classical(&one, "k", &FittedRegressor::constant(0.9, vec!["dist".into()]), true).map_err(err)?;
    let sign_ok = (conceded + 0.1).abs() <= 1e-15;
    Ok((
        mismatches.is_empty() && sign_ok,
        format!(
            "{checked} actor reductions bit-exact ({} mismatched), conceded-shot GSAX {conceded:.15}",
            mismatches.len()
        ),
    ))
}

fn ln_factorial(k: i64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

fn criterion_08() -> Outcome {
    // independence factorization
    let mut rng = seed::rng(808);
    let mut worst_factor = 0.0f64;
    for _ in 0..100 {
        let (z, y) = (rng.gen_range(0..8i64), rng.gen_range(0..8i64));
        let (l1, l2) = (rng.gen_range(0.05..4.0), rng.gen_range(0.05..4.0));
        let joint = bivpois_log_pmf(z, y, l1, l2, 0.0).map_err(err)?;
        let split = (z as f64 * f64::ln(l1) - l1 - ln_factorial(z)) + (y as f64 * f64::ln(l2) - l2 - ln_factorial(y));
        worst_factor = worst_factor.max((joint - split).abs() / split.abs().max(1.0));
    }

    // analytic against central-difference gradient
    let truth = league_truth(6, 0.1).map_err(err)?;
    let table = simulate_league(&truth, 300, 818).map_err(err)?;
    let weights = vec![1.0; table.matches.len()];
    let mut worst_grad = 0.0f64;
    for k in 0..5 {
        let theta: Vec<f64> = (0..13).map(|_| rng.gen_range(-0.4..0.4) + if k == 0 { 0.0 } else { 0.1 }).collect();
        let (_, g) = log_likelihood(&table, &weights, &theta).map_err(err)?;
        let gmax = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..theta.len() {
            let h = 1e-5;
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (log_likelihood(&table, &weights, &up).map_err(err)?.0 - log_likelihood(&table, &weights, &dn).map_err(err)?.0) / (2.0 * h);
            worst_grad = worst_grad.max((fd - g[j]).abs() / gmax);
        }
    }

    // recovery
    let mut hits: BTreeMap<String, usize> = BTreeMap::new();
    let mut joint = 0;
    let reps = 100;
    for r in 0..reps {
        let table = simulate_league(&truth, 600, seed::derive(2024, r)).map_err(err)?;
        let (fit, _) = fit_team_strengths_weighted(&table, &vec![1.0; table.matches.len()]).map_err(err)?;
        let mut all = true;
        for (kind, est, tru) in [("att", &fit.att, &truth.att), ("def", &fit.def, &truth.def)] {
            for (team, v) in tru {
                let ok = (est[team] - v).abs() <= RATING_TOL;
                all &= ok;
                *hits.entry(format!("{kind}:{team}")).or_default() += usize::from(ok);
            }
        }
        joint += usize::from(all);
    }
    let worst_rating = hits.values().copied().min().unwrap_or(0) as f64 / reps as f64;

    let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
    let base = d("2022-01-01");
    let w = recency_weight(base, base + chrono::Duration::days(500), 500.0).map_err(err)?;

    let ok = worst_factor <= FACTOR_TOL && worst_grad <= GRADIENT_REL_TOL && worst_rating >= RECOVERY_MIN && w == 0.5;
    Ok((
        ok,
        format!(
            "factorization {worst_factor:.1e}, gradient {worst_grad:.1e}, worst per-rating recovery {worst_rating:.2} (all ratings jointly {:.2}), w(500,500) {w}",
            joint as f64 / reps as f64
        ),
    ))
}

fn criterion_09() -> Outcome {
    let bare = SurvivalTable::new(vec![1.0, 2.0, 3.0], vec![true; 3], vec!["a".into(); 3], DMatrix::zeros(3, 0), Vec::new()).map_err(err)?;
    let na = fit_nelson_aalen(&bare).map_err(err)?.baseline_at(3.0);

    let spells = simulate_cox(&CoxSimConfig {
        n: 500,
        seed: 909,
        ..CoxSimConfig::default()
    })
    .map_err(err)?;
    let mut worst_sum = 0.0f64;
    for family in [HazardFamily::CoxBreslow, HazardFamily::NelsonAalen] {
        let m = fit_hazard(&spells, family).map_err(err)?;
        let s: f64 = martingale_residuals(&m, &spells).map_err(err)?.iter().sum();
        worst_sum = worst_sum.max(s.abs());
    }

    let cfg = CoxSimConfig {
        n: 500,
        seed: 5,
        ..CoxSimConfig::default()
    };
    let r = run_riax_calibration(&cfg, HazardFamily::CoxBreslow, 500, ALPHA).map_err(err)?;
    Ok((
        na == 11.0 / 6.0 && worst_sum <= MARTINGALE_TOL && band_ok(&r),
        format!("Nelson-Aalen at t=3 {na:.16}, |sum of martingale residuals| {worst_sum:.1e}, rIAX null {}", shown(&r)),
    ))
}

fn criterion_10() -> Outcome {
    let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ADJUST_TOL);
    let holm = adjust(&[0.01, 0.04], AdjustmentMethod::Holm).map_err(err)?;
    let bh = adjust(&[0.01, 0.02, 0.03, 0.04], AdjustmentMethod::BenjaminiHochberg).map_err(err)?;
    let by = adjust(&[0.01, 0.04], AdjustmentMethod::BenjaminiYekutieli).map_err(err)?;
    let examples = close(&holm, &[0.02, 0.04]) && close(&bh, &[0.04; 4]) && close(&by, &[0.03, 0.06]);

    let mut rng = seed::rng(1010);
    let mut violations = 0;
    let methods = [
        AdjustmentMethod::Holm,
        AdjustmentMethod::BenjaminiHochberg,
        AdjustmentMethod::BenjaminiYekutieli,
        AdjustmentMethod::None,
    ];
    for _ in 0..1000 {
        let m = rng.gen_range(1..=40);
        let p: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(0.2) { (rng.gen_range(0..5) as f64) / 20.0 } else { rng.gen::<f64>().powi(3) })
            .collect();
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        for method in methods {
            let a = adjust(&p, method).map_err(err)?;
            let b = adjust(&permuted, method).map_err(err)?;
            let bounded = a.iter().zip(&p).all(|(a, p)| a >= p && *a <= 1.0);
            let monotone = (0..m).all(|i| (0..m).all(|j| p[i] > p[j] || a[i] <= a[j]));
            let equivariant = perm.iter().enumerate().all(|(k, &i)| b[k] == a[i]);
            violations += usize::from(!(bounded && monotone && equivariant));
        }
    }
    Ok((
        examples && violations == 0,
        format!("Holm {holm:?}, BH {bh:?}, BY {by:?}, {violations} property violations over 1000 vectors x 4 methods"),
    ))
}

fn criterion_11() -> Outcome {
    // 8 strong, frequent shooters from good positions; 32 ordinary ones with 25 shots each
    let mut rng = seed::rng(1111);
    let mut rows = Vec::new();
    let mut shoot = |actor: String, shots: usize, strong: bool, rng: &mut seed::Rng| {
        for _ in 0..shots {
            let d: f64 = if strong { rng.gen_range(4.0..18.0) } else { rng.gen_range(6.0..30.0) };
            let a: f64 = rng.gen_range(0.1..1.4);
            let beta = if strong { 0.8 } else { 0.0 };
            let y = f64::from(u8::from(rng.gen::<f64>() < expit(beta + 1.2 - 0.15 * d + 0.8 * a)));
            rows.push(
                EventRow::new(y, actor.clone())
                    .with_feature("dist", Value::Num(d))
                    .with_feature("angle", Value::Num(a)),
            );
        }
    };
    for i in 0..8 {
        shoot(format!("strong{i:02}"), 150, true, &mut rng);
    }
    for i in 0..32 {
        shoot(format!("regular{i:02}"), 25, false, &mut rng);
    }
    let schema = FeatureSpec::new(vec![ColumnSpec::new("dist", ColumnKind::Numeric), ColumnSpec::new("angle", ColumnKind::Numeric)]);
    let table = EventTable::new(Discipline::Shot, schema, rows).map_err(err)?;
    let enc = FeatureEncoder::fit(&table).map_err(err)?;
    let fit_on = |sub: EventTable| RegressorSpec::Logistic.fit_table(&sub, &enc, &sub.indicator_outcomes(), 0).map_err(err);
    let mut keep = seed::rng(1112);
    let counts: BTreeMap<String, usize> = table.rows().iter().fold(BTreeMap::new(), |mut m, r| {
        *m.entry(r.actor_id.clone()).or_default() += 1;
        m
    });
    let models = vec![
        ("full".to_string(), fit_on(table.clone())?),
        ("half".to_string(), fit_on(table.filter_rows(|_| keep.gen_bool(0.5)).map_err(err)?)?),
        ("low-frequency".to_string(), fit_on(table.filter_rows(|r| counts[&r.actor_id] <= 30).map_err(err)?)?),
    ];
    let mut config = MetricConfig::new(MetricKind::Gax).with_forest(100, Mtry::All, 5);
    config.seed = 11;
    let actors = table.actors();
    let report = compare_models_robustness(&table, &actors, &models, &config).map_err(err)?;
    Ok((
        report.failures.is_empty() && report.residualized_dispersion <= report.classical_dispersion,
        format!(
            "dispersion residualized {:.4} vs classical {:.4} over {} actors",
            report.residualized_dispersion,
            report.classical_dispersion,
            report.actors.len()
        ),
    ))
}

fn run_cli(dir: &Path, threads: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rgax"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads)
        .args(args)
        .output()
        .map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("rgax {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap().flatten() {
        let p = entry.path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn criterion_12() -> Outcome {
    let commands: &[&[&str]] = &[
        &["simulate", "pllm", "--n", "800", "--seed", "7", "--out", "shots.csv"],
        &[
            "evaluate", "--events", "shots.csv", "--discipline", "shot", "--features", "z1,z2,z3", "--metric", "gax", "--train",
            "--grid", "quick", "--trees", "60", "--seed", "3", "--out", "gax",
        ],
        &["adjust", "--pvalues", "gax/report.csv", "--column", "p_raw", "--method", "by", "--out", "adjusted.csv"],
        &["simulate", "league", "--teams", "6", "--matches", "300", "--seed", "2", "--out", "matches.csv"],
        &["team-strength", "--matches", "matches.csv", "--out", "teams"],
        &["simulate", "cox", "--n", "300", "--seed", "1", "--out", "spells.csv"],
        &[
            "evaluate", "--events", "spells.csv", "--discipline", "injury-spell", "--features", "z1,z2", "--metric", "iax",
            "--trees", "60", "--grid", "quick", "--seed", "5", "--out", "iax",
        ],
        &[
            "simulate", "calibrate", "--estimator", "forest", "--n", "400", "--replications", "100", "--trees", "40", "--seed", "4",
            "--out", "calibration.csv",
        ],
    ];
    let root = tempfile::tempdir().map_err(err)?;
    let dirs = [root.path().join("t1"), root.path().join("t8")];
    for (dir, threads) in dirs.iter().zip(["1", "8"]) {
        fs::create_dir(dir).map_err(err)?;
        for args in commands {
            run_cli(dir, threads, args)?;
        }
    }
    let (a, b) = (files(&dirs[0]), files(&dirs[1]));
    let rel = |v: &[PathBuf], base: &Path| v.iter().map(|p| p.strip_prefix(base).unwrap().to_path_buf()).collect::<Vec<_>>();
    if rel(&a, &dirs[0]) != rel(&b, &dirs[1]) {
        return Ok((false, "output file sets differ".into()));
    }
    let differing: Vec<String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| fs::read(x).ok() != fs::read(y).ok())
        .map(|(x, _)| x.strip_prefix(&dirs[0]).unwrap().display().to_string())
        .collect();
    Ok((
        differing.is_empty(),
        format!("{} commands, {} files compared, differing: {differing:?}", commands.len(), a.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("score equivalence", criterion_01),
        ("type-I calibration, forest OOB", criterion_02),
        ("double robustness cell", criterion_03),
        ("expected conditional covariance oracle", criterion_04),
        ("sign and power", criterion_05),
        ("interval anchor", criterion_06),
        ("reduction identities", criterion_07),
        ("bivariate Poisson", criterion_08),
        ("survival", criterion_09),
        ("multiplicity", criterion_10),
        ("robustness across outcome models", criterion_11),
        ("CLI determinism across thread counts", criterion_12),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {n:>2} {name}: {} ({detail}; {:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
