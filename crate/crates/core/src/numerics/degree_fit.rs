//! Least-squares fits of a degree distribution to a power law
//! (log-log space) and to an exponential (semi-log space).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest distinct degree values accepted by the fit.
pub const MIN_DISTINCT_DEGREES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionModel {
    PowerLaw,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistributionFit {
    /// `(degree, probability)` for every observed degree, ascending.
    pub empirical: Vec<(usize, f64)>,
    /// γ in `p(d) ∝ d^(−γ)`.
    pub power_law_exponent: f64,
    pub power_law_intercept: f64,
    /// Sum of squared errors in log space.
    pub power_law_residual: f64,
    /// β in `p(d) ∝ exp(−β d)`.
    pub exponential_rate: f64,
    pub exponential_intercept: f64,
    pub exponential_residual: f64,
}

impl DegreeDistributionFit {
    pub fn preferred(&self) -> DistributionModel {
        if self.power_law_residual <= self.exponential_residual {
            DistributionModel::PowerLaw
        } else {
            DistributionModel::Exponential
        }
    }

    pub fn power_law(&self, d: usize) -> f64 {
        (self.power_law_intercept - self.power_law_exponent * (d as f64).ln()).exp()
    }

    pub fn exponential(&self, d: usize) -> f64 {
        (self.exponential_intercept - self.exponential_rate * d as f64).exp()
    }
}

/// Simple regression `y = a + b x`; returns `(a, b, sse)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse = x.iter().zip(y).map(|(xv, yv)| (yv - a - b * xv).powi(2)).sum();
    (a, b, sse)
}

/// Fits both models to the empirical pmf of `degrees` (degree 0 ignored).
pub fn fit_degree_distribution(degrees: &[usize]) -> Result<DegreeDistributionFit> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in degrees.iter().filter(|&&d| d > 0) {
        *counts.entry(d).or_default() += 1;
    }
    if counts.len() < MIN_DISTINCT_DEGREES {
        return Err(Error::FitInfeasible(format!(
            "{} distinct positive degrees, need at least {MIN_DISTINCT_DEGREES}",
            counts.len()
        )));
    }
    let total: usize = counts.values().sum();
    let empirical: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(d, c)| (d, c as f64 / total as f64))
        .collect();
    let log_p: Vec<f64> = empirical.iter().map(|(_, p)| p.ln()).collect();
    let log_d: Vec<f64> = empirical.iter().map(|(d, _)| (*d as f64).ln()).collect();
    let lin_d: Vec<f64> = empirical.iter().map(|(d, _)| *d as f64).collect();
    let (pa, pb, pr) = line_fit(&log_d, &log_p);
    let (ea, eb, er) = line_fit(&lin_d, &log_p);
    Ok(DegreeDistributionFit {
        empirical,
        power_law_exponent: -pb,
        power_law_intercept: pa,
        power_law_residual: pr,
        exponential_rate: -eb,
        exponential_intercept: ea,
        exponential_residual: er,
    })
}
