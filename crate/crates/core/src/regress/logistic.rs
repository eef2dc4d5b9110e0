//! Maximum-likelihood logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::expit;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;
/// Linear predictors beyond this magnitude put fitted probabilities within
/// ~1e-13 of 0 or 1; reaching it without converging means separation.
const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Log-likelihood after every accepted step, starting at the zero vector.
    pub log_likelihood_trace: Vec<f64>,
}

impl LogisticFit {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        expit(self.linear_predictor(row))
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().map(|&e| expit(e)).collect()
    }
}

fn log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    // y·η − log(1 + e^η), written to stay finite for large |η|
    eta.iter()
        .zip(y)
        .map(|(&e, &t)| {
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            t * e - softplus
        })
        .sum()
}

/// Indices of columns that are (numerically) linear combinations of earlier ones.
pub(crate) fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut v = col.clone();
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        // second pass for numerical orthogonality
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let rn = v.norm();
        if norm == 0.0 || rn <= 1e-9 * norm.max(1.0) {
            bad.push(j);
        } else {
            basis.push(v / rn);
        }
    }
    bad
}

/// Fits `P(y = 1 | x) = expit(xᵀγ)`. The design must carry its own intercept column.
///
/// Newton steps are halved until the log-likelihood does not decrease, so the
/// trace is monotone. Iteration stops once the largest coefficient change
/// drops below `1e-8` or after 100 steps.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64]) -> Result<LogisticFit> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    fit_logistic_named(x, y, &names)
}

pub fn fit_logistic_named(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LogisticFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} targets for {n} rows", y.len())));
    }
    if let Some(bad) = y.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::InvalidInput(format!("logistic target {bad} outside [0, 1]")));
    }
    let bad = collinear_columns(x);
    if !bad.is_empty() {
        return Err(Error::RankDeficient {
            columns: bad.into_iter().map(|j| names[j].clone()).collect(),
        });
    }

    let mut beta = DVector::zeros(p);
    let mut eta = x * &beta;
    let mut ll = log_likelihood(&eta, y);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let prob: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let mut xtwx = DMatrix::zeros(p, p);
        let mut score = DVector::zeros(p);
        for i in 0..n {
            let w = prob[i] * (1.0 - prob[i]);
            let r = y[i] - prob[i];
            let row = x.row(i);
            for a in 0..p {
                let xa = row[a];
                score[a] += xa * r;
                if w > 0.0 {
                    for b in a..p {
                        xtwx[(a, b)] += w * xa * row[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(a, b)] = xtwx[(b, a)];
            }
        }
        let max_eta = eta.amax();
        let Some(chol) = xtwx.cholesky() else {
            if max_eta > SEPARATION_ETA {
                return Err(Error::Separation { norm: beta.amax() });
            }
            return Err(Error::NonConvergence {
                what: "logistic IRLS (singular information matrix)",
                iterations,
            });
        };
        let step = chol.solve(&score);

        let mut t = 1.0;
        let (new_beta, new_eta, new_ll) = loop {
            let cand = &beta + &step * t;
            let cand_eta = x * &cand;
            let cand_ll = log_likelihood(&cand_eta, y);
            if cand_ll >= ll || t < 1e-10 {
                break (cand, cand_eta, cand_ll);
            }
            t *= 0.5;
        };
        let change = (&new_beta - &beta).amax();
        if new_ll < ll {
            // step halving exhausted: we are at the optimum to working precision
            converged = true;
            break;
        }
        beta = new_beta;
        eta = new_eta;
        ll = new_ll;
        trace.push(ll);
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }

    if eta.amax() > SEPARATION_ETA && (!converged || ll > -1e-6) {
        return Err(Error::Separation { norm: beta.amax() });
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "logistic IRLS",
            iterations,
        });
    }
    Ok(LogisticFit {
        coefficients: beta.iter().copied().collect(),
        log_likelihood: ll,
        iterations,
        log_likelihood_trace: trace,
    })
}
