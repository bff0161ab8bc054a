//! Discretised length-of-stay distributions.
//!
//! `cdf[k]` is the probability a patient has left within `k` days of
//! admission. Distributions derived from continuous laws have `cdf[0] = 0`,
//! so a patient always occupies a bed on the day they arrive. Mass beyond
//! the truncation horizon is folded into the last day.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation horizon used when none is given.
pub const DEFAULT_LOS_HORIZON: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosDistribution {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl LosDistribution {
    /// Builds a distribution from day probabilities `pmf[0..=H]`.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::invalid("length of stay pmf is empty"));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("length of stay pmf has negative or non-finite entries"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "length of stay pmf sums to {total}, expected 1"
            )));
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(LosDistribution { pmf, cdf })
    }

    /// A fixed stay of exactly `days` days.
    pub fn point_mass(days: usize) -> Self {
        let horizon = days.max(1);
        let mut pmf = vec![0.0; horizon + 1];
        pmf[days] = 1.0;
        let cdf = (0..=horizon).map(|k| if k >= days { 1.0 } else { 0.0 }).collect();
        LosDistribution { pmf, cdf }
    }

    pub fn horizon(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability of leaving exactly `lag` days after admission.
    pub fn leaving_at(&self, lag: usize) -> f64 {
        self.pmf.get(lag).copied().unwrap_or(0.0)
    }

    /// Smallest day `t` with `L(t) >= 0.5`.
    pub fn median_day(&self) -> usize {
        self.cdf
            .iter()
            .position(|&c| c >= 0.5)
            .unwrap_or(self.horizon())
    }
}

/// Discretises a Weibull law with scale `lambda` (days) and shape `k`.
pub fn discretize_weibull(lambda: f64, k: f64, horizon: usize) -> Result<LosDistribution> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!(
            "weibull parameters must be positive, got lambda={lambda}, k={k}"
        )));
    }
    if horizon < 1 {
        return Err(Error::invalid("length of stay horizon must be at least 1 day"));
    }
    let cdf_at = |t: f64| 1.0 - (-(t / lambda).powf(k)).exp();
    let mut cdf: Vec<f64> = (0..=horizon).map(|t| cdf_at(t as f64)).collect();
    cdf[horizon] = 1.0;
    let mut pmf = vec![0.0; horizon + 1];
    for t in 1..=horizon {
        pmf[t] = cdf[t] - cdf[t - 1];
    }
    Ok(LosDistribution { pmf, cdf })
}

/// Share of a day's admissions still present `lag` days later. A patient is
/// always counted on the admission day itself.
pub fn remaining_fraction(los: &LosDistribution, lag: usize) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let k = lag.min(los.horizon());
    (1.0 - los.cdf[k]).clamp(0.0, 1.0)
}

/// Stays for a three-stage care path: a fixed ward stay before the core
/// stage, the core stage itself, and a fixed ward stay afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct CarePathLos {
    pub pre: LosDistribution,
    pub core: LosDistribution,
    pub post: LosDistribution,
}

pub fn shifted_care_path_los(
    base: &LosDistribution,
    pre_days: usize,
    post_days: usize,
) -> CarePathLos {
    CarePathLos {
        pre: LosDistribution::point_mass(pre_days),
        core: base.clone(),
        post: LosDistribution::point_mass(post_days),
    }
}
