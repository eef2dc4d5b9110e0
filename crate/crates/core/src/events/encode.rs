use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ColumnKind, EventRow, EventTable, Value};
use crate::error::{Error, Result};
use crate::stats::median;

pub const MISSING_LEVEL: &str = "missing";

/// How one table column maps onto design-matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncodedColumn {
    /// Missing cells take `fill`, the training-set median.
    Numeric { name: String, fill: f64 },
    /// Treatment coding: one indicator per level after the first. Missing and
    /// unseen values map to the `missing` level when training saw one, and to
    /// the reference level otherwise.
    Categorical { name: String, levels: Vec<String> },
}

impl EncodedColumn {
    fn source(&self) -> &str {
        match self {
            EncodedColumn::Numeric { name, .. } | EncodedColumn::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            EncodedColumn::Numeric { .. } => 1,
            EncodedColumn::Categorical { levels, .. } => levels.len().saturating_sub(1),
        }
    }
}

/// Turns table features into a dense numeric design, frozen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    columns: Vec<EncodedColumn>,
}

impl FeatureEncoder {
    /// Encoder over every schema column of `table`.
    pub fn fit(table: &EventTable) -> Result<Self> {
        let names: Vec<&str> = table.schema().names().collect();
        Self::fit_columns(table, &names)
    }

    pub fn fit_columns(table: &EventTable, names: &[&str]) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for &name in names {
            let spec = table
                .schema()
                .get(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            columns.push(match spec.kind {
                ColumnKind::Categorical => {
                    let mut levels: Vec<String> = table.levels(name).to_vec();
                    let saw_missing = table
                        .rows()
                        .iter()
                        .any(|r| matches!(r.features.get(name), Some(Value::Missing) | None));
                    if saw_missing && !levels.iter().any(|l| l == MISSING_LEVEL) {
                        levels.push(MISSING_LEVEL.to_string());
                    }
                    EncodedColumn::Categorical {
                        name: name.to_string(),
                        levels,
                    }
                }
                _ => {
                    let observed: Vec<f64> = table.rows().iter().filter_map(|r| r.num(name)).collect();
                    EncodedColumn::Numeric {
                        name: name.to_string(),
                        fill: median(&observed).unwrap_or(0.0),
                    }
                }
            });
        }
        Ok(FeatureEncoder { columns })
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    /// Source column names, in order.
    pub fn source_columns(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.source().to_string()).collect()
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(EncodedColumn::width).sum()
    }

    /// Design column names: numeric columns keep their name, indicators read `column=level`.
    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.columns {
            match c {
                EncodedColumn::Numeric { name, .. } => out.push(name.clone()),
                EncodedColumn::Categorical { name, levels } => {
                    out.extend(levels.iter().skip(1).map(|l| format!("{name}={l}")))
                }
            }
        }
        out
    }

    /// Encoder without the named source columns.
    pub fn without(&self, names: &[&str]) -> FeatureEncoder {
        FeatureEncoder {
            columns: self
                .columns
                .iter()
                .filter(|c| !names.contains(&c.source()))
                .cloned()
                .collect(),
        }
    }

    pub fn check_schema(&self, table: &EventTable) -> Result<()> {
        for c in &self.columns {
            let spec = table.schema().get(c.source()).ok_or_else(|| {
                Error::SchemaMismatch(format!("table lacks training column `{}`", c.source()))
            })?;
            let categorical = spec.kind == ColumnKind::Categorical;
            if categorical != matches!(c, EncodedColumn::Categorical { .. }) {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` changed kind since training",
                    c.source()
                )));
            }
        }
        Ok(())
    }

    pub fn encode_row(&self, row: &EventRow, out: &mut [f64]) {
        let mut k = 0;
        for c in &self.columns {
            match c {
                EncodedColumn::Numeric { name, fill } => {
                    out[k] = row.num(name).unwrap_or(*fill);
                    k += 1;
                }
                EncodedColumn::Categorical { name, levels } => {
                    let w = levels.len().saturating_sub(1);
                    out[k..k + w].iter_mut().for_each(|v| *v = 0.0);
                    let value = match row.features.get(name) {
                        Some(Value::Cat(s)) => Some(s.as_str()),
                        _ => None,
                    };
                    let pos = value
                        .and_then(|s| levels.iter().position(|l| l == s))
                        .or_else(|| levels.iter().position(|l| l == MISSING_LEVEL));
                    if let Some(p) = pos {
                        if p > 0 {
                            out[k + p - 1] = 1.0;
                        }
                    }
                    k += w;
                }
            }
        }
    }

    /// Dense `rows x width` design.
    pub fn transform(&self, table: &EventTable) -> Result<DMatrix<f64>> {
        self.check_schema(table)?;
        let width = self.width();
        let mut m = DMatrix::zeros(table.len(), width);
        let mut buf = vec![0.0; width];
        for (i, row) in table.rows().iter().enumerate() {
            self.encode_row(row, &mut buf);
            for (j, v) in buf.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }
}
