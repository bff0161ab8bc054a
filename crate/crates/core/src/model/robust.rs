//! Budget-of-uncertainty robust counterpart with a closed-form worst case
//! per overflow row.

use serde::{Deserialize, Serialize};

use super::patients::{assemble, RobustShift};
use super::{apply_operational_options, BuiltModel, ObjectiveKind, OperationalOptions};
use crate::error::{Error, Result};
use crate::los::{remaining_fraction, LosDistribution};
use crate::network::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    /// Number of days per location whose admissions may deviate.
    pub gamma: f64,
    pub enabled: bool,
}

impl RobustConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        RobustConfig { gamma, enabled: true }
    }

    pub fn check(&self, inst: &ProblemInstance) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("`gamma` must be non-negative, got {}", self.gamma)));
        }
        if self.gamma > inst.horizon as f64 {
            return Err(Error::invalid(format!(
                "`gamma` {} exceeds the horizon of {} days",
                self.gamma, inst.horizon
            )));
        }
        if inst.deviation.is_none() {
            return Err(Error::invalid(
                "robust model requires admission `deviation` bounds",
            ));
        }
        if inst.n_groups() != 1 {
            return Err(Error::invalid("robust model supports a single patient group"));
        }
        Ok(())
    }
}

/// Worst-case admissions for the census on day `t` (zero-based): nominal
/// plus the upward deviation on the `min(gamma, t + 1)` days with the
/// largest surviving contribution `(1 - L(t - t')) * upper[t']`. Ties go to
/// the earlier day; a fractional budget deviates the next day partially.
pub fn worst_case_admissions(
    nominal: &[f64],
    upper_dev: &[f64],
    los: &LosDistribution,
    t: usize,
    gamma: f64,
) -> Vec<f64> {
    let days = t + 1;
    let mut out: Vec<f64> = nominal[..days].to_vec();
    let mut order: Vec<(usize, f64)> = (0..days)
        .map(|tp| (tp, remaining_fraction(los, t - tp) * upper_dev[tp]))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut budget = gamma.max(0.0).min(days as f64);
    for (tp, _) in order {
        if budget <= 0.0 {
            break;
        }
        let share = budget.min(1.0);
        out[tp] += share * upper_dev[tp];
        budget -= share;
    }
    out
}

/// [`worst_case_admissions`] for location `i` of a single-group instance.
pub fn worst_case_for(inst: &ProblemInstance, i: usize, t: usize, gamma: f64) -> Result<Vec<f64>> {
    let dev = inst
        .deviation
        .as_ref()
        .ok_or_else(|| Error::invalid("instance has no admission `deviation` bounds"))?;
    if t >= inst.horizon || i >= inst.n_locations() {
        return Err(Error::invalid("location or day out of range"));
    }
    Ok(worst_case_admissions(
        inst.admissions.series(0, i),
        dev.upper.series(0, i),
        &inst.los[0],
        t,
        gamma,
    ))
}

/// Same rows and columns as the nominal model; sent caps use the lower
/// admission bound and each overflow row its own worst case.
pub fn build_robust(
    inst: &ProblemInstance,
    objective: &ObjectiveKind,
    options: &OperationalOptions,
    robust: &RobustConfig,
) -> Result<BuiltModel> {
    robust.check(inst)?;
    let dev = inst.deviation.as_ref().expect("checked");
    let (n, tl) = (inst.n_locations(), inst.horizon);
    let los = &inst.los[0];
    let mut alpha_shift = vec![0.0; n * tl];
    let mut sent_cap = vec![0.0; n * tl];
    // the cap must hold on every realisation a budget reaches; with no
    // budget only the nominal one
    let down_share = robust.gamma.min(1.0);
    for i in 0..n {
        let nominal = inst.admissions.series(0, i);
        let upper = dev.upper.series(0, i);
        let lower = dev.lower.series(0, i);
        for t in 0..tl {
            let wc = worst_case_admissions(nominal, upper, los, t, robust.gamma);
            alpha_shift[i * tl + t] = (0..=t)
                .map(|tp| remaining_fraction(los, t - tp) * (wc[tp] - nominal[tp]))
                .sum();
            sent_cap[i * tl + t] = (nominal[t] - down_share * lower[t]).max(0.0);
        }
    }
    let shift = RobustShift { alpha_shift, sent_cap };
    let mut built = assemble(inst, objective, Some(&shift))?;
    apply_operational_options(&mut built, inst, options)?;
    Ok(built)
}
