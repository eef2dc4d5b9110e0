use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{
    derive_on_target, ColumnKind, Discipline, EventRow, EventTable, FeatureSpec, GoalFrame, Value,
};
use crate::error::{Error, Result};

/// Knobs for CSV ingestion beyond the feature schema.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Column holding the evaluated actor. Goalkeeper tables point this at the keeper id.
    pub actor_column: String,
    /// Cell values read as missing.
    pub missing_markers: Vec<String>,
    /// Frame used when `on_target` must be derived from `end_y` / `end_z`.
    pub goal_frame: GoalFrame,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            actor_column: "actor_id".into(),
            missing_markers: vec![String::new(), "NA".into()],
            goal_frame: GoalFrame::default(),
        }
    }
}

/// Reads an event CSV from disk with default options.
pub fn parse_event_table(path: impl AsRef<Path>, schema: &FeatureSpec, discipline: Discipline) -> Result<EventTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ParseOptions::default().read(file, schema, discipline)
}

impl ParseOptions {
    pub fn parse_path(&self, path: impl AsRef<Path>, schema: &FeatureSpec, discipline: Discipline) -> Result<EventTable> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        self.read(file, schema, discipline)
    }

    pub fn read<R: Read>(&self, reader: R, schema: &FeatureSpec, discipline: Discipline) -> Result<EventTable> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
        let col = |name: &str| index.get(name).copied();
        let require = |name: &str| col(name).ok_or_else(|| Error::MissingColumn(name.to_string()));

        let injury = discipline == Discipline::InjurySpell;
        let outcome_idx = require(if injury { "time" } else { "outcome" })?;
        let event_idx = if injury { Some(require("event")?) } else { None };
        let actor_idx = require(&self.actor_column)?;
        let feature_idx = schema
            .columns
            .iter()
            .map(|c| require(&c.name))
            .collect::<Result<Vec<_>>>()?;
        let date_idx = col("date");
        let team_for_idx = col("team_for");
        let team_against_idx = col("team_against");
        let on_target_idx = col("on_target");
        let season_idx = col("season");
        let end_idx = match (col("end_y"), col("end_z")) {
            (Some(y), Some(z)) => Some((y, z)),
            _ => None,
        };

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let cell = |idx: usize| rec.get(idx).unwrap_or("").trim();
            let is_missing = |s: &str| self.missing_markers.iter().any(|m| m == s);
            let number = |idx: usize, name: &str| -> Result<Option<f64>> {
                let s = cell(idx);
                if is_missing(s) {
                    return Ok(None);
                }
                s.parse::<f64>().map(Some).map_err(|_| Error::NonNumeric {
                    row: i,
                    column: name.to_string(),
                    value: s.to_string(),
                })
            };
            let text = |idx: Option<usize>| idx.map(cell).filter(|s| !is_missing(s)).map(str::to_string);

            let outcome = number(outcome_idx, if injury { "time" } else { "outcome" })?.ok_or_else(|| {
                Error::InvalidRow {
                    row: i,
                    message: "missing outcome".into(),
                }
            })?;
            let mut row = EventRow::new(outcome, cell(actor_idx));
            for (spec, &idx) in schema.columns.iter().zip(&feature_idx) {
                let raw = cell(idx);
                let value = if is_missing(raw) {
                    Value::Missing
                } else {
                    match spec.kind {
                        ColumnKind::Categorical => Value::Cat(raw.to_string()),
                        ColumnKind::Numeric | ColumnKind::Binary => {
                            Value::Num(number(idx, &spec.name)?.expect("non-missing"))
                        }
                        ColumnKind::Date => Value::Num(f64::from(parse_date(raw, i, &spec.name)?.to_epoch_days())),
                    }
                };
                row.features.insert(spec.name.clone(), value);
            }
            row.date = match text(date_idx) {
                Some(s) => Some(parse_date(&s, i, "date")?),
                None => None,
            };
            row.team_for = text(team_for_idx);
            row.team_against = text(team_against_idx);
            row.season = text(season_idx);
            row.on_target = match text(on_target_idx) {
                Some(s) => Some(parse_flag(&s, i, "on_target")?),
                None => match end_idx {
                    Some((y, z)) => match (number(y, "end_y")?, number(z, "end_z")?) {
                        (Some(ey), Some(ez)) => Some(derive_on_target(ey, ez, &self.goal_frame)),
                        _ => None,
                    },
                    None => None,
                },
            };
            if let Some(idx) = event_idx {
                row.event = Some(parse_flag(cell(idx), i, "event")?);
            }
            rows.push(row);
        }

        let table = EventTable::new(discipline, schema.clone(), rows)?;
        if discipline == Discipline::ShotOnTarget {
            if let Some(i) = table.rows().iter().position(|r| r.on_target == Some(false)) {
                return Err(Error::InvalidRow {
                    row: i,
                    message: "off-target shot in an on-target table".into(),
                });
            }
        }
        Ok(table)
    }
}

fn parse_date(s: &str, row: usize, column: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::InvalidRow {
        row,
        message: format!("column `{column}`: `{s}` is not a YYYY-MM-DD date"),
    })
}

fn parse_flag(s: &str, row: usize, column: &str) -> Result<bool> {
    match s {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        _ => Err(Error::InvalidRow {
            row,
            message: format!("column `{column}`: `{s}` is not a 0/1 flag"),
        }),
    }
}

/// Writes a table in the canonical column order: outcome (or time, event),
/// actor_id, date, team_for, team_against, on_target, season, then features.
///
/// Numbers are printed in shortest round-trip form, so re-parsing reproduces
/// every numeric value bit for bit.
pub fn write_event_table<W: Write>(table: &EventTable, writer: W) -> Result<()> {
    let injury = table.discipline() == Discipline::InjurySpell;
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = Vec::new();
    if injury {
        header.extend(["time".into(), "event".into()]);
    } else {
        header.push("outcome".into());
    }
    header.extend(
        ["actor_id", "date", "team_for", "team_against", "on_target", "season"]
            .iter()
            .map(|s| s.to_string()),
    );
    header.extend(table.schema().names().map(str::to_string));
    wtr.write_record(&header)?;

    for row in table.rows() {
        let mut rec: Vec<String> = vec![row.outcome.to_string()];
        if injury {
            rec.push(flag(row.event));
        }
        rec.push(row.actor_id.clone());
        rec.push(row.date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default());
        rec.push(row.team_for.clone().unwrap_or_default());
        rec.push(row.team_against.clone().unwrap_or_default());
        rec.push(flag(row.on_target));
        rec.push(row.season.clone().unwrap_or_default());
        for spec in &table.schema().columns {
            rec.push(match row.features.get(&spec.name) {
                Some(Value::Num(x)) if spec.kind == ColumnKind::Date => {
                    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
                    (epoch + chrono::Duration::days(*x as i64)).format("%Y-%m-%d").to_string()
                }
                Some(Value::Num(x)) => x.to_string(),
                Some(Value::Cat(s)) => s.clone(),
                Some(Value::Missing) | None => String::new(),
            });
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

fn flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}
