//! The generalised covariance measure: residual products, their sample mean
//! and variance, a normal-reference statistic, p-values and intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{norm_cdf, norm_quantile, norm_sf, pairwise_sum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmResult {
    /// `R_i = (Y_i − ĥ(Z_i))(X_i − f̂(Z_i))`, negated when `sign_flip` is set.
    pub products: Vec<f64>,
    pub n: usize,
    /// `Σ R_i`, the residualized metric on the original scale.
    pub sum_scale_estimate: f64,
    pub mean_estimate: f64,
    /// Empirical standard deviation of the products (divisor `n`).
    pub sd_products: f64,
    /// `√n · sd_products`, the standard error of the sum.
    pub sd_sum: f64,
    /// `√n · mean / sd_products`.
    pub statistic: f64,
    pub p_two_sided: f64,
    pub p_greater: f64,
    pub p_less: f64,
    pub sign_flip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// `[estimate − z·sd, +∞)`.
    LowerOneSided,
    /// `(−∞, estimate + z·sd]`.
    UpperOneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub level: f64,
    pub sidedness: Sidedness,
    /// Non-nil shift on the sum scale; only used by [`non_nil_test`] callers
    /// that read it from the spec.
    pub rho0: f64,
    /// Explicit critical value replacing the normal quantile, e.g. the
    /// rounded `1.96` used in many published tables.
    pub critical_value: Option<f64>,
}

impl Default for IntervalSpec {
    fn default() -> Self {
        IntervalSpec {
            level: 0.95,
            sidedness: Sidedness::TwoSided,
            rho0: 0.0,
            critical_value: None,
        }
    }
}

impl IntervalSpec {
    pub fn new(level: f64, sidedness: Sidedness) -> Result<Self> {
        let spec = IntervalSpec {
            level,
            sidedness,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_critical_value(mut self, z: f64) -> Self {
        self.critical_value = Some(z);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("interval level {} outside (0, 1)", self.level)));
        }
        if let Some(z) = self.critical_value {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::Config(format!("critical value {z} must be positive")));
            }
        }
        Ok(())
    }

    pub fn critical(&self) -> f64 {
        self.critical_value.unwrap_or_else(|| match self.sidedness {
            Sidedness::TwoSided => norm_quantile(0.5 * (1.0 + self.level)),
            _ => norm_quantile(self.level),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

fn p_values(t: f64) -> (f64, f64, f64) {
    let greater = norm_sf(t);
    let less = norm_cdf(t);
    (greater, less, (2.0 * greater.min(less)).min(1.0))
}

/// Sample GCM from outcome residuals `r_y` and propensity residuals `r_x`.
pub fn gcm_from_residuals(r_y: &[f64], r_x: &[f64], sign_flip: bool) -> Result<GcmResult> {
    if r_y.len() != r_x.len() {
        return Err(Error::InvalidInput(format!(
            "residual columns differ in length ({} vs {})",
            r_y.len(),
            r_x.len()
        )));
    }
    let s = if sign_flip { -1.0 } else { 1.0 };
    gcm_from_products(r_y.iter().zip(r_x).map(|(a, b)| s * a * b).collect(), sign_flip)
}

/// Same as [`gcm_from_residuals`] for products that are already formed (and
/// already sign-adjusted).
pub fn gcm_from_products(products: Vec<f64>, sign_flip: bool) -> Result<GcmResult> {
    let n = products.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 products, got {n}")));
    }
    if let Some(bad) = products.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite residual product {bad}")));
    }
    let nf = n as f64;
    let sum = pairwise_sum(&products);
    let mean = sum / nf;
    let centered: Vec<f64> = products.iter().map(|r| (r - mean) * (r - mean)).collect();
    let sd = (pairwise_sum(&centered) / nf).sqrt();
    if sd == 0.0 || products.iter().all(|&r| r == products[0]) {
        return Err(Error::DegenerateVariance { actor: None });
    }
    let statistic = nf.sqrt() * mean / sd;
    let (p_greater, p_less, p_two_sided) = p_values(statistic);
    Ok(GcmResult {
        n,
        sum_scale_estimate: sum,
        mean_estimate: mean,
        sd_products: sd,
        sd_sum: nf.sqrt() * sd,
        statistic,
        p_two_sided,
        p_greater,
        p_less,
        sign_flip,
        products,
    })
}

/// Interval for the sum-scale estimate.
pub fn confidence_interval(result: &GcmResult, spec: &IntervalSpec) -> Result<Interval> {
    spec.validate()?;
    if !(result.sd_sum > 0.0) {
        return Err(Error::DegenerateVariance { actor: None });
    }
    let half = spec.critical() * result.sd_sum;
    let est = result.sum_scale_estimate;
    Ok(match spec.sidedness {
        Sidedness::TwoSided => Interval {
            lower: est - half,
            upper: est + half,
        },
        Sidedness::LowerOneSided => Interval {
            lower: est - half,
            upper: f64::INFINITY,
        },
        Sidedness::UpperOneSided => Interval {
            lower: f64::NEG_INFINITY,
            upper: est + half,
        },
    })
}

/// p-value against `H0: ρ = rho0` using `T' = (Σ R − rho0) / sd_sum`.
pub fn non_nil_test(result: &GcmResult, rho0: f64, direction: Direction) -> Result<f64> {
    if !(result.sd_sum > 0.0) {
        return Err(Error::DegenerateVariance { actor: None });
    }
    if rho0 == 0.0 {
        return Ok(match direction {
            Direction::Greater => result.p_greater,
            Direction::Less => result.p_less,
            Direction::TwoSided => result.p_two_sided,
        });
    }
    let t = (result.sum_scale_estimate - rho0) / result.sd_sum;
    let (g, l, two) = p_values(t);
    Ok(match direction {
        Direction::Greater => g,
        Direction::Less => l,
        Direction::TwoSided => two,
    })
}
