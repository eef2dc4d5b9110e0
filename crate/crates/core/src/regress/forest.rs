//! Bagged regression forests tuned on out-of-bag loss.

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedMatrix, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::seed;
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub mtry: usize,
    pub max_depth: usize,
    pub min_node_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        s / self.trees.len() as f64
    }
}

pub(crate) struct ForestFit {
    pub forest: Forest,
    pub oob: Vec<f64>,
    pub oob_loss: f64,
}

/// Grows `params.trees` trees on bootstrap samples of size n. Tree `t` draws
/// from a generator seeded by `(seed, t)`, so the result does not depend on
/// how trees are scheduled across threads.
pub(crate) fn fit_forest_cell(data: &BinnedMatrix, y: &[f64], params: &ForestParams, seed_value: u64) -> Result<ForestFit> {
    let n = data.rows();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        mtry: params.mtry,
        min_samples_leaf: params.min_node_size.max(1),
        min_child_weight: 0.0,
        hessian_floor: 1e-12,
    };
    let ones = vec![1.0; n];
    let grown: Vec<(Tree, Vec<u32>)> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed_value, t as u64));
            let mut counts = vec![0u32; n];
            let mut samples = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                counts[i] += 1;
                samples.push(i as u32);
            }
            samples.sort_unstable();
            let tree = grow_tree(data, y, &ones, &samples, tree_params, &mut rng);
            let oob: Vec<u32> = (0..n as u32).filter(|&i| counts[i as usize] == 0).collect();
            (tree, oob)
        })
        .collect();

    let mut sum = vec![0.0; n];
    let mut count = vec![0u32; n];
    for (tree, oob) in &grown {
        for &i in oob {
            sum[i as usize] += tree.predict_binned(data, i as usize);
            count[i as usize] += 1;
        }
    }
    if let Some(row) = count.iter().position(|&c| c == 0) {
        return Err(Error::NeverOutOfBag {
            row,
            trees: params.trees,
        });
    }
    let oob: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let sq: Vec<f64> = oob.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).collect();
    Ok(ForestFit {
        forest: Forest {
            trees: grown.into_iter().map(|(t, _)| t).collect(),
        },
        oob,
        oob_loss: mean(&sq),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OobCell {
    pub mtry: usize,
    pub max_depth: usize,
    pub oob_loss: f64,
}

pub(crate) struct ForestSelection {
    pub fit: ForestFit,
    pub chosen: ForestParams,
    pub table: Vec<OobCell>,
}

/// Evaluates every `(mtry, depth)` cell and keeps the one with the lowest OOB loss.
pub(crate) fn select_forest(
    x: &DMatrix<f64>,
    y: &[f64],
    mtrys: &[usize],
    depths: &[usize],
    trees: usize,
    min_node_size: usize,
    seed_value: u64,
) -> Result<ForestSelection> {
    if x.nrows() < 10 {
        return Err(Error::InvalidInput(format!("a forest needs at least 10 rows, got {}", x.nrows())));
    }
    if mtrys.is_empty() || depths.is_empty() || trees == 0 {
        return Err(Error::Config("empty forest grid".into()));
    }
    let data = BinnedMatrix::new(x);
    let mut best: Option<(ForestFit, ForestParams)> = None;
    let mut table = Vec::new();
    for &mtry in mtrys {
        for &depth in depths {
            let params = ForestParams {
                trees,
                mtry,
                max_depth: depth,
                min_node_size,
            };
            let fit = fit_forest_cell(&data, y, &params, seed_value)?;
            table.push(OobCell {
                mtry,
                max_depth: depth,
                oob_loss: fit.oob_loss,
            });
            if best.as_ref().map_or(true, |(b, _)| fit.oob_loss < b.oob_loss) {
                best = Some((fit, params));
            }
        }
    }
    let (fit, chosen) = best.expect("non-empty grid");
    Ok(ForestSelection { fit, chosen, table })
}
