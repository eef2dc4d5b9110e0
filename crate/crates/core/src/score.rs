//! The logistic score for a binary actor indicator, evaluated at the
//! restricted fit where the indicator's coefficient is zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::fit_logistic;
use crate::stats::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTestResult {
    /// `Σ_j (Y_j − expit(Z_jᵀγ̂)) X_j`.
    pub score: f64,
    /// Restricted estimate of the `Z` coefficients.
    pub gamma: Vec<f64>,
    pub log_likelihood: f64,
    pub n: usize,
    /// Fitted probabilities `expit(Z_jᵀγ̂)`.
    pub fitted: Vec<f64>,
}

/// Fits `Y ~ Z` by logistic regression and returns the score of the
/// coefficient on `X` at that fit. `z` must include an intercept column if
/// one is wanted.
pub fn logistic_score(y: &[f64], x: &[f64], z: &DMatrix<f64>) -> Result<ScoreTestResult> {
    if x.len() != y.len() || z.nrows() != y.len() {
        return Err(Error::InvalidInput(format!(
            "lengths differ: y {}, x {}, z {}",
            y.len(),
            x.len(),
            z.nrows()
        )));
    }
    let fit = fit_logistic(z, y)?;
    let fitted = fit.predict(z);
    let terms: Vec<f64> = y.iter().zip(&fitted).zip(x).map(|((t, p), x)| (t - p) * x).collect();
    Ok(ScoreTestResult {
        score: pairwise_sum(&terms),
        gamma: fit.coefficients,
        log_likelihood: fit.log_likelihood,
        n: y.len(),
        fitted,
    })
}
