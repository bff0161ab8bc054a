//! Reconstruction of admissions and initial-patient discharges from a
//! reported active-census series, and cleaning of reporting spikes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::los::{remaining_fraction, LosDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusSeries {
    pub location: String,
    pub values: Vec<f64>,
}

impl CensusSeries {
    pub fn new(location: impl Into<String>, values: Vec<f64>) -> Self {
        CensusSeries {
            location: location.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub admissions: Vec<f64>,
    pub initial_census: f64,
    pub initial_discharges: Vec<f64>,
    /// Euclidean distance between the simulated and reported series.
    pub residual: f64,
    pub iterations: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn correct_once(values: &[f64], window: usize, k: f64) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut out = values.to_vec();
    let mut buf = Vec::with_capacity(window);
    for t in 0..n {
        let lo = t.saturating_sub(half);
        let hi = (t + half + 1).min(n);
        buf.clear();
        buf.extend_from_slice(&out[lo..hi]);
        let med = median(&mut buf);
        for v in buf.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = median(&mut buf);
        // a zero MAD makes any departure from the median an outlier
        if (out[t] - med).abs() > k * mad {
            out[t] = med;
        }
    }
    out
}

/// Replaces values that sit more than `k` median absolute deviations from
/// the median of their centred window. Windows are truncated at the series
/// ends. Sweeps update in place and repeat until nothing changes, so the
/// result is a fixed point.
pub fn correct_outliers(series: &CensusSeries, window: usize, k: f64) -> Result<CensusSeries> {
    if series.values.is_empty() {
        return Err(Error::invalid("cannot correct an empty census series"));
    }
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!("window must be odd and at least 3, got {window}")));
    }
    if !(k >= 0.0) {
        return Err(Error::invalid("outlier threshold must be non-negative"));
    }
    let mut current = series.values.clone();
    for _ in 0..(100 + 10 * current.len()) {
        let next = correct_once(&current, window, k);
        if next == current {
            break;
        }
        current = next;
    }
    Ok(CensusSeries {
        location: series.location.clone(),
        values: current,
    })
}

/// Active patients per day with no transfers:
/// `(p0 - sum_{t'<=t} d(t')) + sum_{t'<=t} (1 - L(t - t')) a(t')`.
pub fn simulate_census(
    admissions: &[f64],
    initial_census: f64,
    initial_discharges: &[f64],
    los: &LosDistribution,
) -> Result<Vec<f64>> {
    if admissions.len() != initial_discharges.len() {
        return Err(Error::invalid(format!(
            "admissions ({}) and discharges ({}) differ in length",
            admissions.len(),
            initial_discharges.len()
        )));
    }
    if initial_census < 0.0 || admissions.iter().chain(initial_discharges).any(|&v| v < 0.0) {
        return Err(Error::invalid("census inputs must be non-negative"));
    }
    let horizon = admissions.len();
    let weights: Vec<f64> = (0..horizon).map(|lag| remaining_fraction(los, lag)).collect();
    let mut out = Vec::with_capacity(horizon);
    let mut remaining_initial = initial_census;
    for t in 0..horizon {
        remaining_initial -= initial_discharges[t];
        let arrivals: f64 = (0..=t).map(|s| weights[t - s] * admissions[s]).sum();
        out.push(remaining_initial + arrivals);
    }
    Ok(out)
}

/// Seeded random search for admissions and initial discharges whose
/// simulated census best matches `series` in the Euclidean norm. The
/// initial census is pinned to the first reported value.
pub fn estimate_admissions(
    series: &CensusSeries,
    los: &LosDistribution,
    iterations: usize,
    seed: u64,
) -> Result<EstimationResult> {
    let target = &series.values;
    let horizon = target.len();
    if horizon == 0 {
        return Err(Error::invalid("census series is empty"));
    }
    if iterations == 0 {
        return Err(Error::invalid("at least one iteration is required"));
    }
    if target.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("census values must be non-negative"));
    }

    let p0 = target[0];
    let weights: Vec<f64> = (0..horizon).map(|lag| remaining_fraction(los, lag)).collect();
    let mut admissions: Vec<f64> = (0..horizon)
        .map(|t| if t == 0 { 0.0 } else { (target[t] - target[t - 1]).max(0.0) })
        .collect();
    let mut discharges = vec![0.0; horizon];
    let mut discharged = 0.0;

    let sim = simulate_census(&admissions, p0, &discharges, los)?;
    let mut resid: Vec<f64> = sim.iter().zip(target).map(|(s, y)| s - y).collect();
    let mut sse: f64 = resid.iter().map(|r| r * r).sum();

    let peak = target.iter().cloned().fold(0.0, f64::max);
    let start_scale = (0.1 * peak).max(0.1);
    let end_scale = 0.1f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut trial = vec![0.0; horizon];

    for it in 0..iterations {
        if sse == 0.0 {
            break;
        }
        let frac = if iterations > 1 { it as f64 / (iterations - 1) as f64 } else { 1.0 };
        let scale = start_scale * (end_scale / start_scale).powf(frac);
        let day = rng.random_range(0..horizon);
        let perturb_admission = rng.random_bool(0.5);
        let step = scale * unit.sample(&mut rng);

        let (delta, sign) = if perturb_admission {
            let old = admissions[day];
            ((old + step).max(0.0) - old, 1.0)
        } else {
            let old = discharges[day];
            let cap = (p0 - (discharged - old)).max(0.0);
            ((old + step).clamp(0.0, cap) - old, -1.0)
        };
        if delta == 0.0 {
            continue;
        }
        let mut new_sse = sse;
        for t in day..horizon {
            let w = if perturb_admission { weights[t - day] } else { 1.0 };
            let r = resid[t] + sign * delta * w;
            trial[t] = r;
            new_sse += r * r - resid[t] * resid[t];
        }
        if new_sse < sse {
            resid[day..horizon].copy_from_slice(&trial[day..horizon]);
            sse = new_sse.max(0.0);
            if perturb_admission {
                admissions[day] += delta;
            } else {
                discharges[day] += delta;
                discharged += delta;
            }
        }
    }

    // recompute from scratch so the reported residual carries no drift
    let sim = simulate_census(&admissions, p0, &discharges, los)?;
    let residual = sim
        .iter()
        .zip(target)
        .map(|(s, y)| (s - y).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(EstimationResult {
        admissions,
        initial_census: p0,
        initial_discharges: discharges,
        residual,
        iterations,
    })
}
