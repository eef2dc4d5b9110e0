//! Adjusted p-values for reports that test many actors at once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AdjustmentMethod {
    /// Step-down family-wise error control.
    Holm,
    /// Step-up false discovery rate control.
    #[default]
    BenjaminiHochberg,
    /// Step-up FDR control under arbitrary dependence.
    BenjaminiYekutieli,
    None,
}

impl AdjustmentMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AdjustmentMethod::Holm => "holm",
            AdjustmentMethod::BenjaminiHochberg => "benjamini-hochberg",
            AdjustmentMethod::BenjaminiYekutieli => "benjamini-yekutieli",
            AdjustmentMethod::None => "none",
        }
    }
}

impl fmt::Display for AdjustmentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdjustmentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "holm" => Ok(AdjustmentMethod::Holm),
            "bh" | "benjamini-hochberg" | "fdr" => Ok(AdjustmentMethod::BenjaminiHochberg),
            "by" | "benjamini-yekutieli" => Ok(AdjustmentMethod::BenjaminiYekutieli),
            "none" => Ok(AdjustmentMethod::None),
            other => Err(Error::Config(format!("unknown adjustment method '{other}'"))),
        }
    }
}

/// Adjusted p-values in input order. Ties keep their input order.
pub fn adjust(pvalues: &[f64], method: AdjustmentMethod) -> Result<Vec<f64>> {
    if let Some((i, p)) = pvalues.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("p-value {p} at position {i} outside [0, 1]")));
    }
    let m = pvalues.len();
    if m == 0 || method == AdjustmentMethod::None {
        return Ok(pvalues.to_vec());
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mf = m as f64;
    let mut out = vec![0.0; m];
    match method {
        AdjustmentMethod::Holm => {
            let mut running = 0.0f64;
            for (rank, &i) in order.iter().enumerate() {
                running = running.max(((mf - rank as f64) * pvalues[i]).min(1.0));
                out[i] = running;
            }
        }
        AdjustmentMethod::BenjaminiHochberg | AdjustmentMethod::BenjaminiYekutieli => {
            let c = if method == AdjustmentMethod::BenjaminiYekutieli {
                (1..=m).map(|i| 1.0 / i as f64).sum()
            } else {
                1.0
            };
            let mut running = f64::INFINITY;
            for (rank, &i) in order.iter().enumerate().rev() {
                running = running.min(c * (mf * pvalues[i] / (rank + 1) as f64).max(pvalues[i]));
                out[i] = running.min(1.0);
            }
        }
        AdjustmentMethod::None => unreachable!(),
    }
    Ok(out)
}
