use rgax::events::{filter_cohort, write_event_table, Discipline, FeatureEncoder, FeatureSpec, ParseOptions};
use rgax::metrics::{evaluate_all, MetricConfig, MetricKind};
use rgax::multiplicity::AdjustmentMethod;
use rgax::regress::{load_model, save_model, Loss, Mtry, RegressorSpec, TuningGrid};
use rgax::sim::{simulate_pllm, PllmConfig};
use rgax::survival::{evaluate_riax, fit_hazard, HazardFamily, SurvivalTable};
use rgax::teams::{attach_strength_features, fit_team_strengths, StrengthSide};

fn shots(beta: f64, seed: u64) -> rgax::events::EventTable {
    simulate_pllm(&PllmConfig {
        n: 600,
        beta,
        seed,
        ..PllmConfig::default()
    })
    .unwrap()
}

fn gbt() -> RegressorSpec {
    RegressorSpec::Gbt {
        grid: TuningGrid::single_gbt(0.1, 3),
        loss: Loss::Logistic,
    }
}

#[test]
fn csv_round_trip_train_and_evaluate() {
    let table = shots(0.5, 1);
    let mut buf = Vec::new();
    write_event_table(&table, &mut buf).unwrap();
    let schema = FeatureSpec::numeric(&["z1", "z2", "z3"]);
    let parsed = ParseOptions::default().read(buf.as_slice(), &schema, Discipline::Shot).unwrap();
    assert_eq!(parsed.len(), table.len());
    assert_eq!(parsed.outcomes(), table.outcomes());

    let enc = FeatureEncoder::fit(&parsed).unwrap();
    let model = gbt().fit_table(&parsed, &enc, &parsed.indicator_outcomes(), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded.predict(&parsed).unwrap(), model.predict(&parsed).unwrap());

    let mut config = MetricConfig::new(MetricKind::Gax).with_forest(60, Mtry::Sqrt, 4);
    config.adjustment = AdjustmentMethod::Holm;
    let cohort = filter_cohort(&parsed, 20, 1);
    let report = evaluate_all(&parsed, &cohort, &loaded, &config).unwrap();
    assert_eq!(report.actors.len(), 2);
    assert!(report.failures.is_empty());
    let top = report.actors.iter().find(|a| a.rank == 1).unwrap();
    assert!(report.actors.iter().all(|a| a.residualized <= top.residualized));
    for a in &report.actors {
        assert!(a.p_adjusted >= a.p_raw);
        assert!(a.ci_lower.unwrap() <= a.residualized && a.residualized <= a.ci_upper.unwrap());
    }
    assert_eq!(rgax::metrics::EvaluationReport::from_json(&report.to_json().unwrap()).unwrap(), report);
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}

#[test]
fn row_order_does_not_change_results() {
    let table = shots(0.0, 2);
    let enc = FeatureEncoder::fit(&table).unwrap();
    let model = RegressorSpec::Logistic.fit_table(&table, &enc, &table.indicator_outcomes(), 0).unwrap();
    let config = MetricConfig::new(MetricKind::Gax).with_forest(40, Mtry::All, 3);
    let cohort = table.actors();
    let order: Vec<usize> = (0..table.len()).rev().collect();
    let a = evaluate_all(&table, &cohort, &model, &config).unwrap();
    let b = evaluate_all(&table.permuted(&order).unwrap(), &cohort, &model, &config).unwrap();
    assert_eq!(a.actors, b.actors);
}

#[test]
fn defending_strength_feature_feeds_the_outcome_model() {
    use chrono::NaiveDate;
    use rgax::events::{EventRow, EventTable, Value};
    use rgax::sim::{league_truth, simulate_league};

    let matches = simulate_league(&league_truth(4, 0.1).unwrap(), 120, 9).unwrap();
    let strengths = fit_team_strengths(&matches, None, 500.0).unwrap();
    let teams: Vec<String> = strengths.def.keys().cloned().collect();
    let rows = (0..200)
        .map(|i| {
            let mut r = EventRow::new(f64::from(u8::from((i * 7919) % 11 < 3)), format!("s{}", i % 5)).with_feature("dist", Value::Num(5.0 + (i % 17) as f64));
            r.team_against = Some(teams[i % teams.len()].clone());
            r.date = NaiveDate::from_ymd_opt(2021, 1, 1);
            r
        })
        .collect();
    let table = EventTable::new(Discipline::Shot, FeatureSpec::numeric(&["dist"]), rows).unwrap();
    let with = attach_strength_features(&table, &strengths, StrengthSide::Defending, MetricKind::Gax, false).unwrap();
    assert!(with.schema().get(StrengthSide::Defending.column()).is_some());
    assert!(attach_strength_features(&table, &strengths, StrengthSide::Attacking, MetricKind::Gax, false).is_err());
    let enc = FeatureEncoder::fit(&with).unwrap();
    let model = RegressorSpec::Logistic.fit_table(&with, &enc, &with.indicator_outcomes(), 0).unwrap();
    assert_eq!(model.feature_names().len(), 2);
}

#[test]
fn injury_pipeline_reports_every_actor() {
    let spells = rgax::sim::simulate_cox(&rgax::sim::CoxSimConfig {
        n: 200,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let table = spells.to_event_table().unwrap();
    let back = SurvivalTable::from_events(&table, None).unwrap();
    assert_eq!(back.times, spells.times);
    let hazard = fit_hazard(&back, HazardFamily::CoxBreslow).unwrap();
    let mut config = MetricConfig::new(MetricKind::Iax);
    config.propensity = RegressorSpec::Logistic;
    config.cross_fitting = rgax::metrics::CrossFitting::None;
    let report = evaluate_riax(&back, &table.actors(), &hazard, &config).unwrap();
    assert_eq!(report.actors.len(), 2);
    // two actors partition the rows, so their classical sums cancel
    let total: f64 = report.actors.iter().map(|a| a.classical).sum();
    assert!(total.abs() < 1e-6);
}
