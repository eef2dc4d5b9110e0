//! Gradient-boosted trees with k-fold cross-validated early stopping.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, BinnedMatrix, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::seed;
use crate::stats::{expit, logit, mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Bernoulli deviance on the log-odds scale, Newton leaf weights.
    Logistic,
    /// Least squares on the response scale.
    Squared,
}

const PROB_EPS: f64 = 1e-12;

impl Loss {
    fn base_score(self, y: &[f64]) -> f64 {
        let m = mean(y);
        match self {
            Loss::Squared => m,
            Loss::Logistic => logit(m.clamp(PROB_EPS, 1.0 - PROB_EPS)),
        }
    }

    /// Maps the raw ensemble score to the response scale.
    pub fn link_inverse(self, f: f64) -> f64 {
        match self {
            Loss::Squared => f,
            Loss::Logistic => expit(f),
        }
    }

    fn grad_hess(self, y: f64, f: f64) -> (f64, f64) {
        match self {
            Loss::Squared => (y - f, 1.0),
            Loss::Logistic => {
                let p = expit(f);
                (y - p, p * (1.0 - p))
            }
        }
    }

    fn loss(self, y: f64, f: f64) -> f64 {
        match self {
            Loss::Squared => (y - f) * (y - f),
            Loss::Logistic => {
                let p = expit(f).clamp(PROB_EPS, 1.0 - PROB_EPS);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
        }
    }

    fn mean_loss(self, y: &[f64], f: &[f64], rows: &[u32]) -> f64 {
        let v: Vec<f64> = rows
            .iter()
            .map(|&i| self.loss(y[i as usize], f[i as usize]))
            .collect();
        mean(&v)
    }
}

/// One cell of the boosting grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub hessian_floor: f64,
}

impl BoostParams {
    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            mtry: usize::MAX,
            min_samples_leaf: 1,
            min_child_weight: self.min_child_weight,
            hessian_floor: self.hessian_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub loss: Loss,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl Booster {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.loss.link_inverse(self.raw_score(row))
    }
}

/// Result of one boosting run on a subset of rows.
struct Run {
    booster: Booster,
    /// Mean training loss after 0, 1, 2, ... rounds.
    train_curve: Vec<f64>,
    /// Mean validation loss after 0, 1, 2, ... rounds (empty without validation rows).
    valid_curve: Vec<f64>,
}

/// Boosts on `train` rows, tracking loss on `valid` rows.
///
/// Stops after `max_rounds`, when a tree finds no split, or when validation
/// loss has not improved for `patience` rounds.
fn boost(
    data: &BinnedMatrix,
    y: &[f64],
    train: &[u32],
    valid: &[u32],
    loss: Loss,
    params: &BoostParams,
    max_rounds: usize,
    patience: Option<usize>,
) -> Run {
    let n = data.rows();
    let train_y: Vec<f64> = train.iter().map(|&i| y[i as usize]).collect();
    let base = loss.base_score(&train_y);
    let mut f = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::new();
    let mut train_curve = vec![loss.mean_loss(y, &f, train)];
    let mut valid_curve = Vec::new();
    if !valid.is_empty() {
        valid_curve.push(loss.mean_loss(y, &f, valid));
    }
    let mut best = (valid_curve.first().copied().unwrap_or(f64::INFINITY), 0usize);
    // trees never sample features here, so the generator is unused
    let mut rng = seed::rng(0);

    for round in 1..=max_rounds {
        for &i in train {
            let (g, h) = loss.grad_hess(y[i as usize], f[i as usize]);
            grad[i as usize] = g;
            hess[i as usize] = h;
        }
        let mut tree = grow_tree(data, &grad, &hess, train, params.tree_params(), &mut rng);
        if tree.is_stump_free() {
            break;
        }
        tree.scale(params.learning_rate);
        for i in 0..n {
            f[i] += tree.predict_binned(data, i);
        }
        trees.push(tree);
        train_curve.push(loss.mean_loss(y, &f, train));
        if !valid.is_empty() {
            let v = loss.mean_loss(y, &f, valid);
            valid_curve.push(v);
            if v < best.0 {
                best = (v, round);
            } else if let Some(p) = patience {
                if round - best.1 >= p {
                    break;
                }
            }
        }
    }
    Run {
        booster: Booster {
            loss,
            base_score: base,
            learning_rate: params.learning_rate,
            trees,
        },
        train_curve,
        valid_curve,
    }
}

/// Cross-validation summary for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub best_rounds: usize,
    pub mean_valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtSelection {
    pub booster: Booster,
    pub chosen: CvCell,
    pub cv_table: Vec<CvCell>,
    /// Training-loss curve of the final refit.
    pub train_curve: Vec<f64>,
}

/// Contiguous folds over a seeded shuffle of the rows.
pub(crate) fn fold_assignment(n: usize, folds: usize, seed_value: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed_value));
    let mut fold = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        fold[i] = rank * folds / n;
    }
    fold
}

pub(crate) struct GbtOptions<'a> {
    pub learning_rates: &'a [f64],
    pub max_depths: &'a [usize],
    pub folds: usize,
    pub patience: usize,
    pub max_rounds: usize,
    pub min_child_weight: f64,
    pub hessian_floor: f64,
    pub seed: u64,
}

pub(crate) fn select_gbt(x: &DMatrix<f64>, y: &[f64], loss: Loss, opts: &GbtOptions<'_>) -> Result<GbtSelection> {
    let n = x.nrows();
    if opts.learning_rates.is_empty() || opts.max_depths.is_empty() {
        return Err(Error::Config("empty boosting grid".into()));
    }
    if opts.folds < 2 {
        return Err(Error::Config("boosting needs at least 2 CV folds".into()));
    }
    if n < 2 * opts.folds {
        return Err(Error::InvalidInput(format!(
            "{n} rows is too few for {}-fold cross-validation",
            opts.folds
        )));
    }
    if loss == Loss::Logistic && y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput("logistic boosting needs targets in [0, 1]".into()));
    }
    let data = BinnedMatrix::new(x);
    let fold = fold_assignment(n, opts.folds, opts.seed);
    let splits: Vec<(Vec<u32>, Vec<u32>)> = (0..opts.folds)
        .map(|k| {
            let (mut tr, mut va) = (Vec::new(), Vec::new());
            for i in 0..n {
                if fold[i] == k { va.push(i as u32) } else { tr.push(i as u32) }
            }
            (tr, va)
        })
        .collect();

    let cells: Vec<(f64, usize)> = opts
        .learning_rates
        .iter()
        .flat_map(|&lr| opts.max_depths.iter().map(move |&d| (lr, d)))
        .collect();
    let params_for = |lr: f64, depth: usize| BoostParams {
        learning_rate: lr,
        max_depth: depth,
        min_child_weight: opts.min_child_weight,
        hessian_floor: opts.hessian_floor,
    };

    let cv_table: Vec<CvCell> = cells
        .par_iter()
        .map(|&(lr, depth)| {
            let params = params_for(lr, depth);
            let curves: Vec<Vec<f64>> = splits
                .iter()
                .map(|(tr, va)| {
                    boost(&data, y, tr, va, loss, &params, opts.max_rounds, Some(opts.patience)).valid_curve
                })
                .collect();
            let longest = curves.iter().map(Vec::len).max().unwrap_or(1);
            let mean_curve: Vec<f64> = (0..longest)
                .map(|r| {
                    let v: Vec<f64> = curves.iter().map(|c| c[r.min(c.len() - 1)]).collect();
                    mean(&v)
                })
                .collect();
            let (best_rounds, mean_valid_loss) = mean_curve
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (r, &v)| if v < acc.1 { (r, v) } else { acc });
            CvCell {
                learning_rate: lr,
                max_depth: depth,
                best_rounds,
                mean_valid_loss,
            }
        })
        .collect();

    let chosen = cv_table
        .iter()
        .fold(None::<&CvCell>, |best, c| match best {
            Some(b) if b.mean_valid_loss <= c.mean_valid_loss => Some(b),
            _ => Some(c),
        })
        .expect("non-empty grid")
        .clone();

    let all: Vec<u32> = (0..n as u32).collect();
    let run = boost(
        &data,
        y,
        &all,
        &[],
        loss,
        &params_for(chosen.learning_rate, chosen.max_depth),
        chosen.best_rounds,
        None,
    );
    Ok(GbtSelection {
        booster: run.booster,
        chosen,
        cv_table,
        train_curve: run.train_curve,
    })
}

/// Plain boosting run without cross-validation, for tests of the training curve.
#[cfg(test)]
fn boost_fixed(x: &DMatrix<f64>, y: &[f64], loss: Loss, params: BoostParams, rounds: usize) -> (Booster, Vec<f64>) {
    let data = BinnedMatrix::new(x);
    let all: Vec<u32> = (0..x.nrows() as u32).collect();
    let run = boost(&data, y, &all, &[], loss, &params, rounds, None);
    (run.booster, run.train_curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(lr: f64, depth: usize) -> BoostParams {
        BoostParams {
            learning_rate: lr,
            max_depth: depth,
            min_child_weight: 0.0,
            hessian_floor: 1e-6,
        }
    }

    #[test]
    fn single_stump_recovers_step() {
        let n = 40;
        let x = DMatrix::from_fn(n, 1, |i, _| (i % 2) as f64);
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 1 { 5.5 } else { -1.25 }).collect();
        let (b, _) = boost_fixed(&x, &y, Loss::Squared, params(1.0, 1), 10);
        assert_eq!(b.trees.len(), 1);
        assert_abs_diff_eq!(b.predict_row(&[1.0]), 5.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.predict_row(&[0.0]), -1.25, epsilon = 1e-12);
    }

    #[test]
    fn training_loss_non_increasing() {
        let n = 300;
        let x = DMatrix::from_fn(n, 2, |i, j| ((i * (13 + 17 * j)) % 101) as f64 / 100.0);
        let y: Vec<f64> = (0..n)
            .map(|i| if (x[(i, 0)] * 6.0).sin() + x[(i, 1)] > 0.6 + ((i * 31) % 7) as f64 / 20.0 { 1.0 } else { 0.0 })
            .collect();
        for loss in [Loss::Logistic, Loss::Squared] {
            let (_, curve) = boost_fixed(&x, &y, loss, params(0.1, 3), 100);
            assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{loss:?}");
            assert!(curve.last().unwrap() < &curve[0]);
        }
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_assignment(103, 5, 9);
        for k in 0..5 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!((20..=21).contains(&c));
        }
    }
}
