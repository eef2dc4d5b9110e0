//! Event tables: the rows every metric is computed from.
//!
//! A row is one evaluation unit (a shot, a pass, an injury spell) with an
//! outcome, the acting player, and context features. The table is immutable
//! once built.

mod csv_io;
mod encode;
mod geometry;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{parse_event_table, write_event_table, ParseOptions};
pub use encode::{EncodedColumn, FeatureEncoder};
pub use geometry::{derive_on_target, engineer_geometry, GoalFrame, Pitch};

/// What kind of unit a table holds. Determines the outcome domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discipline {
    Shot,
    ShotOnTarget,
    BasketballShot,
    Pass,
    InjurySpell,
}

impl Discipline {
    pub fn as_str(self) -> &'static str {
        match self {
            Discipline::Shot => "shot",
            Discipline::ShotOnTarget => "shot-on-target",
            Discipline::BasketballShot => "basketball-shot",
            Discipline::Pass => "pass",
            Discipline::InjurySpell => "injury-spell",
        }
    }

    /// Checks an outcome value against this discipline's domain.
    pub fn accepts_outcome(self, y: f64) -> bool {
        match self {
            Discipline::Shot | Discipline::ShotOnTarget | Discipline::Pass => y == 0.0 || y == 1.0,
            Discipline::BasketballShot => matches!(y, v if v == 0.0 || v == 1.0 || v == 2.0 || v == 3.0),
            Discipline::InjurySpell => y.is_finite() && y > 0.0,
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Discipline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "shot" => Discipline::Shot,
            "shot-on-target" => Discipline::ShotOnTarget,
            "basketball-shot" => Discipline::BasketballShot,
            "pass" => Discipline::Pass,
            "injury-spell" => Discipline::InjurySpell,
            other => return Err(Error::UnknownDiscipline(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Binary,
    /// Parsed as ISO dates and exposed to regressors as days since 1970-01-01.
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSpec {
            name: name.into(),
            kind,
        }
    }
}

/// Ordered feature columns of a table.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub columns: Vec<ColumnSpec>,
}

impl FeatureSpec {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        FeatureSpec { columns }
    }

    /// All-numeric spec from column names.
    pub fn numeric<S: AsRef<str>>(names: &[S]) -> Self {
        FeatureSpec::new(
            names
                .iter()
                .map(|n| ColumnSpec::new(n.as_ref(), ColumnKind::Numeric))
                .collect(),
        )
    }

    /// The engineered shot features used by the xG models.
    pub fn shot_features() -> Self {
        use ColumnKind::*;
        let cols: [(&str, ColumnKind); 19] = [
            ("shot.type.name", Categorical),
            ("shot.technique.name", Categorical),
            ("shot.body_part.name", Categorical),
            ("DistToGoal", Numeric),
            ("DistToKeeper", Numeric),
            ("DistSGK", Numeric),
            ("distance.ToD1", Numeric),
            ("distance.ToD2", Numeric),
            ("distance.ToD1.360", Numeric),
            ("distance.ToD2.360", Numeric),
            ("AngleToGoal", Numeric),
            ("AngleToKeeper", Numeric),
            ("AngleDeviation", Numeric),
            ("angle", Numeric),
            ("AttackersBehindBall", Numeric),
            ("DefendersInCone", Numeric),
            ("DefendersBehindBall", Numeric),
            ("density", Numeric),
            ("density.incone", Numeric),
        ];
        FeatureSpec::new(cols.iter().map(|(n, k)| ColumnSpec::new(*n, *k)).collect())
    }

    /// Shot features plus the two end-location offsets used by post-shot models.
    pub fn post_shot_features() -> Self {
        let mut spec = Self::shot_features();
        spec.columns.push(ColumnSpec::new("end_y", ColumnKind::Numeric));
        spec.columns.push(ColumnSpec::new("end_z", ColumnKind::Numeric));
        spec
    }

    /// The three-feature baseline: location, goal angle and body part.
    pub fn classic_features() -> Self {
        FeatureSpec::new(vec![
            ColumnSpec::new("DistToGoal", ColumnKind::Numeric),
            ColumnSpec::new("angle", ColumnKind::Numeric),
            ColumnSpec::new("shot.body_part.name", ColumnKind::Categorical),
        ])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// The same spec restricted to the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        names
            .iter()
            .map(|n| {
                self.get(n)
                    .cloned()
                    .ok_or_else(|| Error::MissingColumn((*n).to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(FeatureSpec::new)
    }
}

/// One cell of a feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(String),
    Missing,
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    /// Binary success flag, basketball points, or observed time for injury spells.
    pub outcome: f64,
    pub actor_id: String,
    pub features: BTreeMap<String, Value>,
    pub date: Option<NaiveDate>,
    pub team_for: Option<String>,
    pub team_against: Option<String>,
    pub on_target: Option<bool>,
    /// Event indicator for injury spells (`false` means right-censored).
    pub event: Option<bool>,
    pub season: Option<String>,
}

impl EventRow {
    pub fn new(outcome: f64, actor_id: impl Into<String>) -> Self {
        EventRow {
            outcome,
            actor_id: actor_id.into(),
            features: BTreeMap::new(),
            date: None,
            team_for: None,
            team_against: None,
            on_target: None,
            event: None,
            season: None,
        }
    }

    pub fn with_feature(mut self, name: impl Into<String>, value: Value) -> Self {
        self.features.insert(name.into(), value);
        self
    }

    pub fn num(&self, column: &str) -> Option<f64> {
        self.features.get(column).and_then(Value::as_num)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTable {
    discipline: Discipline,
    schema: FeatureSpec,
    rows: Vec<EventRow>,
    levels: BTreeMap<String, Vec<String>>,
}

impl EventTable {
    /// Validates rows against the schema and discipline and collects categorical levels.
    pub fn new(discipline: Discipline, schema: FeatureSpec, rows: Vec<EventRow>) -> Result<Self> {
        let mut levels: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if row.actor_id.is_empty() {
                return Err(Error::InvalidRow {
                    row: i,
                    message: "empty actor id".into(),
                });
            }
            if !discipline.accepts_outcome(row.outcome) {
                return Err(Error::InvalidRow {
                    row: i,
                    message: format!("outcome {} is invalid for discipline {discipline}", row.outcome),
                });
            }
            if discipline == Discipline::InjurySpell && row.event.is_none() {
                return Err(Error::InvalidRow {
                    row: i,
                    message: "injury spell without event flag".into(),
                });
            }
            for col in &schema.columns {
                let value = row
                    .features
                    .get(&col.name)
                    .ok_or_else(|| Error::InvalidRow {
                        row: i,
                        message: format!("no value for column `{}`", col.name),
                    })?;
                match (col.kind, value) {
                    (_, Value::Missing) => {}
                    (ColumnKind::Categorical, Value::Cat(level)) => {
                        levels.entry(col.name.clone()).or_default().insert(level.clone());
                    }
                    (ColumnKind::Categorical, Value::Num(_)) => {
                        return Err(Error::InvalidRow {
                            row: i,
                            message: format!("categorical column `{}` holds a number", col.name),
                        })
                    }
                    (_, Value::Num(x)) if !x.is_finite() => {
                        return Err(Error::InvalidRow {
                            row: i,
                            message: format!("non-finite value in `{}`", col.name),
                        })
                    }
                    (ColumnKind::Binary, Value::Num(x)) if *x != 0.0 && *x != 1.0 => {
                        return Err(Error::InvalidRow {
                            row: i,
                            message: format!("binary column `{}` holds {x}", col.name),
                        })
                    }
                    (_, Value::Num(_)) => {}
                    (_, Value::Cat(s)) => {
                        return Err(Error::NonNumeric {
                            row: i,
                            column: col.name.clone(),
                            value: s.clone(),
                        })
                    }
                }
            }
        }
        Ok(EventTable {
            discipline,
            schema,
            rows,
            levels: levels
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
        })
    }

    pub fn discipline(&self) -> Discipline {
        self.discipline
    }

    pub fn schema(&self) -> &FeatureSpec {
        &self.schema
    }

    pub fn rows(&self) -> &[EventRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Observed levels of a categorical column, sorted.
    pub fn levels(&self, column: &str) -> &[String] {
        self.levels.get(column).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.outcome).collect()
    }

    /// Outcomes collapsed to success indicators (`y > 0`).
    pub fn indicator_outcomes(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| if r.outcome > 0.0 { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn positive_count(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome > 0.0).count()
    }

    /// Numeric view of one feature column (missing cells are `None`).
    pub fn numeric_column(&self, column: &str) -> Result<Vec<Option<f64>>> {
        if self.schema.get(column).is_none() {
            return Err(Error::MissingColumn(column.to_string()));
        }
        Ok(self.rows.iter().map(|r| r.num(column)).collect())
    }

    pub fn actors(&self) -> BTreeSet<String> {
        self.rows.iter().map(|r| r.actor_id.clone()).collect()
    }

    pub fn has_actor(&self, actor: &str) -> bool {
        self.rows.iter().any(|r| r.actor_id == actor)
    }

    /// Rows whose shot ended on target, relabelled as an on-target table.
    /// Rows with unknown on-target status are dropped.
    pub fn on_target_only(&self) -> Result<EventTable> {
        let rows = self
            .rows
            .iter()
            .filter(|r| r.on_target == Some(true))
            .cloned()
            .collect();
        EventTable::new(Discipline::ShotOnTarget, self.schema.clone(), rows)
    }

    /// New table with the rows for which `keep` returns true.
    pub fn filter_rows(&self, mut keep: impl FnMut(&EventRow) -> bool) -> Result<EventTable> {
        let rows = self.rows.iter().filter(|r| keep(r)).cloned().collect();
        EventTable::new(self.discipline, self.schema.clone(), rows)
    }

    /// Rows re-ordered by `order` (a permutation of row indices).
    pub fn permuted(&self, order: &[usize]) -> Result<EventTable> {
        let rows = order.iter().map(|&i| self.rows[i].clone()).collect();
        EventTable::new(self.discipline, self.schema.clone(), rows)
    }

    /// Adds (or replaces) a numeric feature column.
    pub fn with_numeric_column(&self, name: &str, values: &[f64]) -> Result<EventTable> {
        if values.len() != self.rows.len() {
            return Err(Error::InvalidInput(format!(
                "column `{name}` has {} values for {} rows",
                values.len(),
                self.rows.len()
            )));
        }
        let mut schema = self.schema.clone();
        if schema.get(name).is_none() {
            schema.columns.push(ColumnSpec::new(name, ColumnKind::Numeric));
        }
        let rows = self
            .rows
            .iter()
            .zip(values)
            .map(|(r, v)| {
                let mut r = r.clone();
                r.features.insert(name.to_string(), Value::Num(*v));
                r
            })
            .collect();
        EventTable::new(self.discipline, schema, rows)
    }

    /// Same rows and features under a different discipline tag.
    pub fn with_discipline(&self, discipline: Discipline) -> Result<EventTable> {
        EventTable::new(discipline, self.schema.clone(), self.rows.clone())
    }
}

/// Actors with at least `min_units` rows and at least `min_positive` positive outcomes.
pub fn filter_cohort(table: &EventTable, min_units: usize, min_positive: usize) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for row in table.rows() {
        let e = counts.entry(row.actor_id.as_str()).or_default();
        e.0 += 1;
        if row.outcome > 0.0 {
            e.1 += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(_, (n, pos))| *n >= min_units && *pos >= min_positive)
        .map(|(a, _)| a.to_string())
        .collect()
}

/// One-vs-rest indicator of the rows taken by `actor`.
pub fn actor_indicator(table: &EventTable, actor: &str) -> Result<Vec<f64>> {
    if !table.has_actor(actor) {
        return Err(Error::UnknownActor(actor.to_string()));
    }
    Ok(table
        .rows()
        .iter()
        .map(|r| if r.actor_id == actor { 1.0 } else { 0.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_with_counts(counts: &[(&str, usize, usize)]) -> EventTable {
        let mut rows = Vec::new();
        for (actor, n, goals) in counts {
            for j in 0..*n {
                let y = if j < *goals { 1.0 } else { 0.0 };
                rows.push(EventRow::new(y, *actor).with_feature("d", Value::Num(j as f64)));
            }
        }
        EventTable::new(Discipline::Shot, FeatureSpec::numeric(&["d"]), rows).unwrap()
    }

    #[test]
    fn cohort_filter_applies_both_thresholds() {
        let t = table_with_counts(&[("a", 25, 0), ("b", 20, 1), ("c", 19, 5), ("d", 40, 3)]);
        let c = filter_cohort(&t, 20, 1);
        assert_eq!(c.into_iter().collect::<Vec<_>>(), vec!["b", "d"]);
        assert_eq!(filter_cohort(&t, 20, 0).len(), 3);
        assert!(filter_cohort(&t, 41, 0).is_empty());
    }

    #[test]
    fn cohort_of_728_shooters() {
        // 728 qualifying shooters plus near misses on each threshold.
        let mut counts: Vec<(String, usize, usize)> =
            (0..728).map(|i| (format!("p{i}"), 20 + i % 7, 1 + i % 3)).collect();
        counts.extend((0..50).map(|i| (format!("few{i}"), 19, 4)));
        counts.extend((0..30).map(|i| (format!("blank{i}"), 30, 0)));
        let refs: Vec<(&str, usize, usize)> =
            counts.iter().map(|(a, n, g)| (a.as_str(), *n, *g)).collect();
        let t = table_with_counts(&refs);
        assert_eq!(filter_cohort(&t, 20, 1).len(), 728);
    }

    #[test]
    fn indicator_counts_actor_rows() {
        let t = table_with_counts(&[("a", 5, 1), ("b", 95, 10)]);
        let x = actor_indicator(&t, "a").unwrap();
        assert_eq!(x.len(), 100);
        assert_eq!(x.iter().sum::<f64>(), 5.0);
        assert!(matches!(actor_indicator(&t, "zz"), Err(Error::UnknownActor(_))));
        let solo = table_with_counts(&[("a", 4, 1)]);
        assert!(actor_indicator(&solo, "a").unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_invalid_outcomes_and_empty_actor() {
        let spec = FeatureSpec::default();
        assert!(EventTable::new(Discipline::Shot, spec.clone(), vec![EventRow::new(2.0, "a")]).is_err());
        assert!(EventTable::new(Discipline::BasketballShot, spec.clone(), vec![EventRow::new(3.0, "a")]).is_ok());
        assert!(EventTable::new(Discipline::Shot, spec, vec![EventRow::new(1.0, "")]).is_err());
    }

    #[test]
    fn discipline_round_trips_through_strings() {
        for d in [
            Discipline::Shot,
            Discipline::ShotOnTarget,
            Discipline::BasketballShot,
            Discipline::Pass,
            Discipline::InjurySpell,
        ] {
            assert_eq!(d.as_str().parse::<Discipline>().unwrap(), d);
        }
        assert!(matches!("hockey".parse::<Discipline>(), Err(Error::UnknownDiscipline(_))));
    }
}
