//! Census re-evaluation and solution metrics against the no-transfer
//! baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Table3;
use crate::los::remaining_fraction;
use crate::network::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub group: usize,
    pub from: usize,
    pub to: usize,
    pub day: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceEntry {
    pub from: usize,
    pub to: usize,
    pub day: usize,
    pub amount: f64,
}

/// Transfers indexed by position in the instance tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub transfers: Vec<PlanEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_transfers: Option<Vec<ResourceEntry>>,
}

impl TransferPlan {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn total_transferred(&self) -> f64 {
        self.transfers.iter().fold(0.0, |acc, e| acc + e.amount)
    }

    /// Checks indices, edges and signs against `inst`.
    pub fn check(&self, inst: &ProblemInstance) -> Result<()> {
        let (n, tl, ng) = (inst.n_locations(), inst.horizon, inst.n_groups());
        let adj = &inst.system.adjacency;
        for e in &self.transfers {
            if e.group >= ng || e.from >= n || e.to >= n || e.day >= tl {
                return Err(Error::invalid(format!(
                    "transfer ({}, {}, {}, {}) is outside the instance dimensions",
                    e.group, e.from, e.to, e.day
                )));
            }
            if !(e.amount >= 0.0 && e.amount.is_finite()) {
                return Err(Error::invalid(format!("transfer amount {} is negative", e.amount)));
            }
            if !adj.allows(e.from, e.to) {
                return Err(Error::invalid(format!(
                    "transfer from `{}` to `{}` is not an allowed edge",
                    inst.system.locations[e.from].id, inst.system.locations[e.to].id
                )));
            }
        }
        for e in self.resource_transfers.iter().flatten() {
            if e.from >= n || e.to >= n || e.day >= tl {
                return Err(Error::invalid("resource transfer is outside the instance dimensions"));
            }
            if !(e.amount >= 0.0 && e.amount.is_finite()) {
                return Err(Error::invalid("resource transfer amount is negative"));
            }
            if !adj.allows(e.from, e.to) {
                return Err(Error::invalid("resource transfer uses a disallowed edge"));
            }
        }
        Ok(())
    }
}

/// Re-evaluated census of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    /// `[g][i][t]` active patients.
    pub alpha: Table3,
    /// `[g][i][t]` patients entering the group.
    pub chi: Table3,
    /// `[g][i][t]` patients leaving the group.
    pub gamma: Table3,
    /// `[g][i][t]` active patients plus those sent away that day.
    pub group_occupancy: Table3,
    /// `[b][i][t]`
    pub occupancy: Table3,
    /// `[b][i][t]` active patients without the sender's transfer-day count.
    pub bed_alpha: Table3,
}

pub fn compute_census(inst: &ProblemInstance, plan: &TransferPlan) -> Result<Census> {
    let (n, tl, ng, nb) = (inst.n_locations(), inst.horizon, inst.n_groups(), inst.n_bed_types());
    if inst.admissions.dims() != (ng, n, tl)
        || inst.initial_discharges.dims() != (ng, n, tl)
        || inst.initial_census.dims() != (ng, n)
        || inst.los.len() != ng
    {
        return Err(Error::invalid("instance tables do not match its dimensions"));
    }
    plan.check(inst)?;
    let order = inst
        .topological_groups()
        .ok_or_else(|| Error::invalid("group graph not an in-forest"))?;
    let beds: Vec<usize> = inst
        .group_bed_types()
        .into_iter()
        .map(|b| b.ok_or_else(|| Error::invalid("group with unknown bed type")))
        .collect::<Result<_>>()?;

    let mut net = Table3::zeros(ng, n, tl);
    let mut sent = Table3::zeros(ng, n, tl);
    for e in &plan.transfers {
        net.add(e.group, e.to, e.day, e.amount);
        net.add(e.group, e.from, e.day, -e.amount);
        sent.add(e.group, e.from, e.day, e.amount);
    }

    let mut alpha = Table3::zeros(ng, n, tl);
    let mut chi = Table3::zeros(ng, n, tl);
    let mut gamma = Table3::zeros(ng, n, tl);
    for &g in &order {
        let preds = inst.predecessors(g);
        let los = &inst.los[g];
        for i in 0..n {
            let mut remaining_initial = inst.initial_census.get(g, i);
            for t in 0..tl {
                let upstream: f64 = preds.iter().map(|&h| gamma.get(h, i, t)).sum();
                chi.set(g, i, t, inst.admissions.get(g, i, t) + upstream + net.get(g, i, t));
                let d = inst.initial_discharges.get(g, i, t);
                remaining_initial -= d;
                let mut leaving = d;
                let mut active = remaining_initial;
                for tp in 0..=t {
                    let c = chi.get(g, i, tp);
                    leaving += los.leaving_at(t - tp) * c;
                    active += remaining_fraction(los, t - tp) * c;
                }
                gamma.set(g, i, t, leaving);
                alpha.set(g, i, t, active);
            }
        }
    }

    let mut group_occupancy = Table3::zeros(ng, n, tl);
    let mut occupancy = Table3::zeros(nb, n, tl);
    let mut bed_alpha = Table3::zeros(nb, n, tl);
    for g in 0..ng {
        for i in 0..n {
            for t in 0..tl {
                let a = alpha.get(g, i, t);
                let o = a + sent.get(g, i, t);
                group_occupancy.set(g, i, t, o);
                occupancy.add(beds[g], i, t, o);
                bed_alpha.add(beds[g], i, t, a);
            }
        }
    }
    Ok(Census {
        alpha,
        chi,
        gamma,
        group_occupancy,
        occupancy,
        bed_alpha,
    })
}

/// `(baseline - value) / baseline`, or 0 without a positive baseline.
pub fn reduction(baseline: f64, value: f64) -> f64 {
    if baseline > 0.0 {
        (baseline - value) / baseline
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferDenominator {
    /// Admissions over the horizon plus the initial census.
    #[default]
    AdmissionsPlusInitial,
    Admissions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsOptions {
    pub denominator: TransferDenominator,
    /// Overflow values below this count as zero in the nonzero statistics.
    pub overflow_threshold: f64,
    pub transfer_threshold: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            denominator: TransferDenominator::AdmissionsPlusInitial,
            overflow_threshold: 0.5,
            transfer_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BedTypeMetrics {
    pub bed_type: String,
    pub total_overflow: f64,
    pub baseline_overflow: f64,
    pub median_load: f64,
    pub mean_load: f64,
    pub max_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceMetrics {
    pub total_shortage: f64,
    pub baseline_shortage: f64,
    pub shortage_reduction: f64,
    pub total_transferred: f64,
}

/// Fractions are reported in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_overflow: f64,
    pub baseline_overflow: f64,
    pub overflow_reduction: f64,
    pub median_nonzero_overflow: f64,
    pub mean_nonzero_overflow: f64,
    pub max_nonzero_overflow: f64,
    pub median_load: f64,
    pub mean_load: f64,
    pub max_load: f64,
    pub percent_node_days_overflow: f64,
    pub total_transferred: f64,
    pub percent_patients_transferred: f64,
    pub median_nonzero_transfer: f64,
    pub mean_nonzero_transfer: f64,
    pub max_nonzero_transfer: f64,
    pub percent_node_days_transfer: f64,
    pub system_wide_overflow: f64,
    pub per_bed_type: Vec<BedTypeMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<ResourceMetrics>,
}

/// `(median, mean, max)`, zeros for an empty sample.
fn stats(values: &mut [f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    let median = if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    };
    let mean = values.iter().sum::<f64>() / k as f64;
    (median, mean, values[k - 1])
}

fn used_bed_types(inst: &ProblemInstance) -> Vec<bool> {
    let mut used = vec![false; inst.n_bed_types()];
    for b in inst.group_bed_types().into_iter().flatten() {
        used[b] = true;
    }
    used
}

fn overflow_of(inst: &ProblemInstance, occ: &Table3, b: usize) -> f64 {
    let (n, tl) = (inst.n_locations(), inst.horizon);
    let mut total = 0.0;
    for i in 0..n {
        let cap = inst.system.capacity.get(b, i);
        for t in 0..tl {
            total += (occ.get(b, i, t) - cap).max(0.0);
        }
    }
    total
}

/// Total overflow had every location pooled its patients and beds, with no
/// transfers. A lower bound on the overflow of any plan.
pub fn system_wide_overflow(inst: &ProblemInstance) -> Result<f64> {
    let census = compute_census(inst, &TransferPlan::empty())?;
    let (n, tl) = (inst.n_locations(), inst.horizon);
    let mut total = 0.0;
    for b in 0..inst.n_bed_types() {
        let cap: f64 = (0..n).map(|i| inst.system.capacity.get(b, i)).sum();
        for t in 0..tl {
            let patients: f64 = (0..n).map(|i| census.occupancy.get(b, i, t)).sum();
            total += (patients - cap).max(0.0);
        }
    }
    Ok(total)
}

/// Resource shortage `sum max(0, q - eta)` given the bed census and
/// resource transfers.
fn shortage(inst: &ProblemInstance, bed_alpha: &Table3, moves: &[ResourceEntry]) -> Option<f64> {
    let supply = inst.system.nurse_supply.as_ref()?;
    let ratio = inst.nurse_ratio.as_ref()?;
    let (n, tl) = (inst.n_locations(), inst.horizon);
    let mut net = vec![0.0; n * tl];
    for e in moves {
        net[e.to * tl + e.day] += e.amount;
        net[e.from * tl + e.day] -= e.amount;
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut eta = supply[i];
        for t in 0..tl {
            if let Some(ext) = &inst.external_resource_supply {
                eta += ext.get(i, t);
            }
            eta += net[i * tl + t];
            let q: f64 = (0..inst.n_bed_types()).map(|b| ratio[b] * bed_alpha.get(b, i, t)).sum();
            total += (q - eta).max(0.0);
        }
    }
    Some(total)
}

pub fn compute_metrics(inst: &ProblemInstance, plan: &TransferPlan) -> Result<MetricsReport> {
    compute_metrics_with(inst, plan, &MetricsOptions::default())
}

pub fn compute_metrics_with(
    inst: &ProblemInstance,
    plan: &TransferPlan,
    opts: &MetricsOptions,
) -> Result<MetricsReport> {
    let census = compute_census(inst, plan)?;
    let base = compute_census(inst, &TransferPlan::empty())?;
    let (n, tl, nb) = (inst.n_locations(), inst.horizon, inst.n_bed_types());
    let used = used_bed_types(inst);

    let mut per_bed_type = Vec::new();
    let mut loads = Vec::new();
    let mut total_overflow = 0.0;
    let mut baseline_overflow = 0.0;
    for b in (0..nb).filter(|&b| used[b]) {
        let over = overflow_of(inst, &census.occupancy, b);
        let base_over = overflow_of(inst, &base.occupancy, b);
        total_overflow += over;
        baseline_overflow += base_over;
        let mut bl = Vec::new();
        for i in 0..n {
            let cap = inst.system.capacity.get(b, i);
            if cap <= 0.0 {
                continue;
            }
            for t in 0..tl {
                bl.push(census.occupancy.get(b, i, t) / cap);
            }
        }
        loads.extend_from_slice(&bl);
        let (median_load, mean_load, max_load) = stats(&mut bl);
        per_bed_type.push(BedTypeMetrics {
            bed_type: inst.system.bed_types[b].id.clone(),
            total_overflow: over,
            baseline_overflow: base_over,
            median_load,
            mean_load,
            max_load,
        });
    }

    let mut node_day_overflow = Vec::new();
    for i in 0..n {
        for t in 0..tl {
            let o: f64 = (0..nb)
                .filter(|&b| used[b])
                .map(|b| (census.occupancy.get(b, i, t) - inst.system.capacity.get(b, i)).max(0.0))
                .sum();
            node_day_overflow.push(o);
        }
    }
    let node_days = (n * tl).max(1) as f64;
    let mut nonzero: Vec<f64> = node_day_overflow
        .iter()
        .copied()
        .filter(|&o| o >= opts.overflow_threshold)
        .collect();
    let percent_node_days_overflow = nonzero.len() as f64 / node_days;
    let (median_nonzero_overflow, mean_nonzero_overflow, max_nonzero_overflow) = stats(&mut nonzero);
    let (median_load, mean_load, max_load) = stats(&mut loads);

    // transfers summed over groups per (from, to, day)
    let mut pair = vec![0.0; n * n * tl];
    let mut active = vec![0.0; n * tl];
    for e in &plan.transfers {
        pair[(e.from * n + e.to) * tl + e.day] += e.amount;
        active[e.from * tl + e.day] += e.amount;
        active[e.to * tl + e.day] += e.amount;
    }
    let mut moves: Vec<f64> = pair.into_iter().filter(|&v| v > opts.transfer_threshold).collect();
    let (median_nonzero_transfer, mean_nonzero_transfer, max_nonzero_transfer) = stats(&mut moves);
    let percent_node_days_transfer =
        active.iter().filter(|&&v| v > opts.transfer_threshold).count() as f64 / node_days;
    let total_transferred = plan.total_transferred();
    let denominator = match opts.denominator {
        TransferDenominator::Admissions => inst.total_admissions(),
        TransferDenominator::AdmissionsPlusInitial => inst.total_admissions() + inst.total_initial_census(),
    };
    let percent_patients_transferred = if denominator > 0.0 {
        total_transferred / denominator
    } else {
        0.0
    };

    let resources = match &plan.resource_transfers {
        Some(moves) => {
            let total = shortage(inst, &census.bed_alpha, moves);
            let baseline = shortage(inst, &base.bed_alpha, &[]);
            match (total, baseline) {
                (Some(total_shortage), Some(baseline_shortage)) => Some(ResourceMetrics {
                    total_shortage,
                    baseline_shortage,
                    shortage_reduction: reduction(baseline_shortage, total_shortage),
                    total_transferred: moves.iter().fold(0.0, |acc, e| acc + e.amount),
                }),
                _ => None,
            }
        }
        None => None,
    };

    Ok(MetricsReport {
        total_overflow,
        baseline_overflow,
        overflow_reduction: reduction(baseline_overflow, total_overflow),
        median_nonzero_overflow,
        mean_nonzero_overflow,
        max_nonzero_overflow,
        median_load,
        mean_load,
        max_load,
        percent_node_days_overflow,
        total_transferred,
        percent_patients_transferred,
        median_nonzero_transfer,
        mean_nonzero_transfer,
        max_nonzero_transfer,
        percent_node_days_transfer,
        system_wide_overflow: system_wide_overflow(inst)?,
        per_bed_type,
        resources,
    })
}
