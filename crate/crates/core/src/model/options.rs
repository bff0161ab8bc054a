//! Optional operational constraints and penalties layered on a built
//! patient model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BuiltModel, LinExpr, Relation, VarId, VarKind};
use crate::error::{Error, Result};
use crate::geo::distance_matrix;
use crate::network::ProblemInstance;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperationalOptions {
    pub integer_transfers: bool,
    /// Never push a location above `max(b, census without transfers)`.
    pub forbid_new_overflow: bool,
    pub sent_penalty: f64,
    pub total_transfer_cap: Option<f64>,
    pub per_transfer_cap: Option<f64>,
    pub smoothing_penalty: f64,
    pub setup_cost: f64,
    /// Days after sending during which a location may not receive, and
    /// vice versa.
    pub switch_window: Option<usize>,
    pub distance_penalty: f64,
    /// Each transfer is either zero or at least this large.
    pub min_transfer: Option<f64>,
    /// Fraction of beds held back, in `[0, 1)`.
    pub capacity_buffer: f64,
    pub balance_threshold: Option<f64>,
    pub balance_penalty: f64,
    /// Locations short of the resource keep at least their initial supply.
    pub nurse_guards: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Base,
    Operational,
}

impl Preset {
    pub fn options(self) -> OperationalOptions {
        match self {
            Preset::Base => OperationalOptions::default(),
            Preset::Operational => OperationalOptions {
                sent_penalty: 0.01,
                smoothing_penalty: 0.01,
                forbid_new_overflow: true,
                capacity_buffer: 0.05,
                ..OperationalOptions::default()
            },
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Preset::Base),
            "operational" => Ok(Preset::Operational),
            other => Err(Error::invalid(format!("unknown preset `{other}`"))),
        }
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("`{name}` must be a non-negative number, got {v}")));
    }
    Ok(())
}

impl OperationalOptions {
    pub fn check(&self) -> Result<()> {
        nonneg("sent_penalty", self.sent_penalty)?;
        nonneg("smoothing_penalty", self.smoothing_penalty)?;
        nonneg("setup_cost", self.setup_cost)?;
        nonneg("distance_penalty", self.distance_penalty)?;
        nonneg("balance_penalty", self.balance_penalty)?;
        if let Some(v) = self.total_transfer_cap {
            nonneg("total_transfer_cap", v)?;
        }
        if let Some(v) = self.per_transfer_cap {
            nonneg("per_transfer_cap", v)?;
        }
        if let Some(v) = self.balance_threshold {
            nonneg("balance_threshold", v)?;
        }
        if let Some(v) = self.min_transfer {
            nonneg("min_transfer", v)?;
            if let Some(cap) = self.per_transfer_cap {
                if v > cap {
                    return Err(Error::invalid(format!(
                        "`min_transfer` {v} exceeds `per_transfer_cap` {cap}"
                    )));
                }
            }
            if self.integer_transfers {
                return Err(Error::invalid(
                    "`min_transfer` cannot be combined with `integer_transfers`",
                ));
            }
        }
        if !(0.0..1.0).contains(&self.capacity_buffer) {
            return Err(Error::invalid(format!(
                "`capacity_buffer` must lie in [0, 1), got {}",
                self.capacity_buffer
            )));
        }
        Ok(())
    }

    pub fn is_mixed_integer(&self) -> bool {
        self.integer_transfers
            || self.setup_cost > 0.0
            || self.switch_window.is_some()
            || self.min_transfer.is_some()
    }
}

/// Small linking constant for indicator rows: `m * (total flow) < 1`
/// whenever flows are bounded by total admissions.
pub(crate) fn small_m(inst: &ProblemInstance) -> f64 {
    1.0 / (inst.total_admissions() + 1.0)
}

/// Extends `built` with every enabled option. With all options off the
/// model is returned unchanged.
pub fn apply_operational_options(
    built: &mut BuiltModel,
    inst: &ProblemInstance,
    options: &OperationalOptions,
) -> Result<()> {
    options.check()?;
    let m = small_m(inst);
    let big_m = 1.0;
    let BuiltModel { model, layout } = built;
    let (n, tl) = (layout.n_locations, layout.horizon);
    let nb = layout.n_bed_types;

    if options.capacity_buffer > 0.0 {
        let scale = 1.0 - options.capacity_buffer;
        layout.capacity_scale = scale;
        for b in 0..nb {
            for i in 0..n {
                let cut = options.capacity_buffer * inst.system.capacity.get(b, i);
                for t in 0..tl {
                    if let Some(&row) = layout.overflow_rows.get(layout.bit(b, i, t)) {
                        model.constraints[row].rhs -= cut;
                    }
                }
            }
        }
    }
    let scale = layout.capacity_scale;

    let transfers = layout.transfers.clone();

    if options.integer_transfers {
        for tv in &transfers {
            model.var_mut(tv.var).kind = VarKind::Integer;
        }
    }

    if let Some(cap) = options.per_transfer_cap {
        for tv in &transfers {
            let v = model.var_mut(tv.var);
            v.upper = v.upper.min(cap);
        }
    }

    if let Some(min) = options.min_transfer {
        for tv in &transfers {
            let cap = layout.sent_cap[layout.git(tv.group, tv.from, tv.day)];
            let v = model.var_mut(tv.var);
            v.upper = v.upper.min(cap);
            if min > 0.0 && v.upper >= min {
                v.kind = VarKind::SemiContinuous { min };
            } else if min > 0.0 {
                v.upper = 0.0;
            }
        }
    }

    if options.forbid_new_overflow {
        for b in 0..nb {
            for i in 0..n {
                let cap = scale * inst.system.capacity.get(b, i);
                for t in 0..tl {
                    let e = &layout.bed_alpha[layout.bit(b, i, t)];
                    if e.terms.is_empty() {
                        continue;
                    }
                    // the expression's constant is the census without transfers
                    let bound = cap.max(e.constant);
                    model.add_constraint(format!("no_new_overflow[{b},{i},{t}]"), e, Relation::LessEq, bound);
                }
            }
        }
    }

    if options.sent_penalty > 0.0 {
        for tv in &transfers {
            model.objective.add_term(tv.var, options.sent_penalty);
        }
    }

    if let Some(cap) = options.total_transfer_cap {
        let mut e = LinExpr::new();
        for tv in &transfers {
            e.add_term(tv.var, 1.0);
        }
        model.add_constraint("total_transfer_cap", &e, Relation::LessEq, cap);
    }

    // transfers grouped by ordered pair and day, summed over groups
    let mut pair_day: BTreeMap<(usize, usize), Vec<Vec<VarId>>> = BTreeMap::new();
    for tv in &transfers {
        pair_day
            .entry((tv.from, tv.to))
            .or_insert_with(|| vec![Vec::new(); tl])[tv.day]
            .push(tv.var);
    }

    if options.smoothing_penalty > 0.0 {
        for (&(i, j), days) in &pair_day {
            for t in 1..tl {
                let d = model.add_continuous(format!("delta[{i},{j},{t}]"), 0.0, f64::INFINITY);
                model.objective.add_term(d, options.smoothing_penalty);
                let mut diff = LinExpr::new();
                for &v in &days[t] {
                    diff.add_term(v, 1.0);
                }
                for &v in &days[t - 1] {
                    diff.add_term(v, -1.0);
                }
                let mut up = diff.clone();
                up.add_term(d, -1.0);
                model.add_constraint(format!("smooth_up[{i},{j},{t}]"), &up, Relation::LessEq, 0.0);
                let mut down = LinExpr::new();
                down.add_scaled(&diff, -1.0).add_term(d, -1.0);
                model.add_constraint(format!("smooth_down[{i},{j},{t}]"), &down, Relation::LessEq, 0.0);
            }
        }
    }

    if options.setup_cost > 0.0 {
        for (&(i, j), days) in &pair_day {
            let rho = model.add_binary(format!("rho[{i},{j}]"));
            model.objective.add_term(rho, options.setup_cost);
            let mut on = LinExpr::new();
            let mut off = LinExpr::var(rho);
            for &v in days.iter().flatten() {
                on.add_term(v, m);
                off.add_term(v, -big_m);
            }
            on.add_term(rho, -1.0);
            model.add_constraint(format!("setup_on[{i},{j}]"), &on, Relation::LessEq, 0.0);
            model.add_constraint(format!("setup_off[{i},{j}]"), &off, Relation::LessEq, 0.0);
        }
    }

    if let Some(window) = options.switch_window {
        let mut sent: Vec<Vec<Vec<VarId>>> = vec![vec![Vec::new(); tl]; n];
        let mut recv: Vec<Vec<Vec<VarId>>> = vec![vec![Vec::new(); tl]; n];
        for tv in &transfers {
            sent[tv.from][tv.day].push(tv.var);
            recv[tv.to][tv.day].push(tv.var);
        }
        for i in 0..n {
            if sent[i].iter().all(Vec::is_empty) && recv[i].iter().all(Vec::is_empty) {
                continue;
            }
            let mut nu_send = Vec::with_capacity(tl);
            let mut nu_recv = Vec::with_capacity(tl);
            for t in 0..tl {
                let a = model.add_binary(format!("nu[0,{i},{t}]"));
                let b = model.add_binary(format!("nu[1,{i},{t}]"));
                for (flag, flows, tag) in [(a, &sent[i][t], "send"), (b, &recv[i][t], "recv")] {
                    let mut e = LinExpr::new();
                    for &v in flows {
                        e.add_term(v, m);
                    }
                    e.add_term(flag, -1.0);
                    model.add_constraint(format!("switch_{tag}[{i},{t}]"), &e, Relation::LessEq, 0.0);
                }
                nu_send.push(a);
                nu_recv.push(b);
            }
            for t in 0..tl {
                let end = (t + window).min(tl - 1);
                let mut no_recv = LinExpr::var(nu_send[t]);
                let mut no_send = LinExpr::var(nu_recv[t]);
                for tp in t..=end {
                    for &v in &recv[i][tp] {
                        no_recv.add_term(v, m);
                    }
                    for &v in &sent[i][tp] {
                        no_send.add_term(v, m);
                    }
                }
                model.add_constraint(format!("switch_after_send[{i},{t}]"), &no_recv, Relation::LessEq, 1.0);
                model.add_constraint(format!("switch_after_recv[{i},{t}]"), &no_send, Relation::LessEq, 1.0);
            }
        }
    }

    if options.distance_penalty > 0.0 && !transfers.is_empty() {
        let dist = distance_matrix(&inst.system.locations)?;
        for tv in &transfers {
            let c = options.distance_penalty * dist[tv.from][tv.to];
            model.objective.add_term(tv.var, c);
        }
    }

    if let (Some(threshold), true) = (options.balance_threshold, options.balance_penalty > 0.0) {
        let used: Vec<bool> = {
            let mut u = vec![false; nb];
            for b in inst.group_bed_types().into_iter().flatten() {
                u[b] = true;
            }
            u
        };
        for b in (0..nb).filter(|&b| used[b]) {
            for i in 0..n {
                let cap = scale * inst.system.capacity.get(b, i);
                if cap <= 0.0 {
                    continue;
                }
                for t in 0..tl {
                    let phi = model.add_continuous(format!("phi[{b},{i},{t}]"), 0.0, f64::INFINITY);
                    model.objective.add_term(phi, options.balance_penalty);
                    let mut e = LinExpr::new();
                    e.add_scaled(&layout.occupancy[layout.bit(b, i, t)], 1.0 / cap);
                    e.add_term(phi, -1.0);
                    model.add_constraint(format!("balance[{b},{i},{t}]"), &e, Relation::LessEq, threshold);
                }
            }
        }
    }

    model.objective.compact();
    Ok(())
}
