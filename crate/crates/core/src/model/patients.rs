//! Patient redistribution: the single-group base model and the care-path
//! group model share one assembler. With one group the group recursion
//! collapses to the closed-form census of the base model.

use super::{
    apply_operational_options, BuiltModel, Layout, LinExpr, LinearModel, ObjectiveKind,
    OperationalOptions, Relation, TransferVar, VarId,
};
use crate::error::{Error, Result};
use crate::los::remaining_fraction;
use crate::network::ProblemInstance;

/// Robust adjustments for a single-group instance: a constant added to
/// each `alpha[0][i][t]` and replacement sent-cap right-hand sides.
pub(crate) struct RobustShift {
    pub alpha_shift: Vec<f64>,
    pub sent_cap: Vec<f64>,
}

pub(crate) fn assemble(
    inst: &ProblemInstance,
    objective: &ObjectiveKind,
    robust: Option<&RobustShift>,
) -> Result<BuiltModel> {
    let mut built = assemble_block(inst, true, robust)?;
    let overflow_cost = match *objective {
        ObjectiveKind::MinOverflow => 1.0,
        ObjectiveKind::LoadBalance => 0.0,
        ObjectiveKind::Combined { patient, .. } => patient,
    };
    add_overflow(&mut built, inst, overflow_cost);
    if matches!(objective, ObjectiveKind::LoadBalance) {
        add_load_balance(&mut built, inst)?;
    }
    Ok(built)
}

/// Transfer variables, sent caps and the census expressions.
pub(crate) fn assemble_block(
    inst: &ProblemInstance,
    transfers: bool,
    robust: Option<&RobustShift>,
) -> Result<BuiltModel> {
    let order = inst
        .topological_groups()
        .ok_or_else(|| Error::invalid("group graph not an in-forest"))?;
    let bed_of: Vec<usize> = inst
        .group_bed_types()
        .into_iter()
        .enumerate()
        .map(|(g, b)| b.ok_or_else(|| Error::invalid(format!("group {g} has an unknown bed type"))))
        .collect::<Result<_>>()?;
    let (n, tl, ng, nb) = (inst.n_locations(), inst.horizon, inst.n_groups(), inst.n_bed_types());
    let mut layout = Layout {
        n_groups: ng,
        n_locations: n,
        n_bed_types: nb,
        horizon: tl,
        capacity_scale: 1.0,
        ..Layout::default()
    };
    let mut model = LinearModel::new();
    let adj = &inst.system.adjacency;

    // s[g,i,j,t]
    let tidx = |g: usize, i: usize, j: usize, t: usize| ((g * n + i) * n + j) * tl + t;
    let mut svar: Vec<Option<VarId>> = vec![None; if transfers { ng * n * n * tl } else { 0 }];
    layout.sent_cap = vec![0.0; ng * n * tl];
    for g in 0..ng {
        if !inst.is_entry_group(g) {
            continue;
        }
        for i in 0..n {
            for t in 0..tl {
                let cap = match robust {
                    Some(r) => r.sent_cap[i * tl + t],
                    None => inst.admissions.get(g, i, t),
                };
                layout.sent_cap[(g * n + i) * tl + t] = cap;
            }
        }
        if !transfers {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                if !adj.allows(i, j) {
                    continue;
                }
                for t in 0..tl {
                    let var = model.add_continuous(format!("s[{g},{i},{j},{t}]"), 0.0, f64::INFINITY);
                    svar[tidx(g, i, j, t)] = Some(var);
                    layout.transfers.push(TransferVar {
                        group: g,
                        from: i,
                        to: j,
                        day: t,
                        var,
                    });
                }
            }
        }
    }
    let s_at = |g: usize, i: usize, j: usize, t: usize| -> Option<VarId> {
        if svar.is_empty() {
            None
        } else {
            svar[tidx(g, i, j, t)]
        }
    };

    // sent caps
    if transfers {
        for g in (0..ng).filter(|&g| inst.is_entry_group(g)) {
            for i in 0..n {
                if !(0..n).any(|j| adj.allows(i, j)) {
                    continue;
                }
                for t in 0..tl {
                    let mut e = LinExpr::new();
                    for j in 0..n {
                        if let Some(v) = s_at(g, i, j, t) {
                            e.add_term(v, 1.0);
                        }
                    }
                    model.add_constraint(
                        format!("sent[{g},{i},{t}]"),
                        &e,
                        Relation::LessEq,
                        layout.sent_cap[(g * n + i) * tl + t],
                    );
                }
            }
        }
    }

    // census recursion in topological order
    let cells = ng * n * tl;
    layout.alpha = vec![LinExpr::new(); cells];
    layout.chi = vec![LinExpr::new(); cells];
    layout.gamma = vec![LinExpr::new(); cells];
    for &g in &order {
        let preds = inst.predecessors(g);
        let los = &inst.los[g];
        let rem: Vec<f64> = (0..tl).map(|lag| remaining_fraction(los, lag)).collect();
        for i in 0..n {
            let mut discharged = 0.0;
            for t in 0..tl {
                let mut chi = LinExpr::constant(inst.admissions.get(g, i, t));
                for &h in &preds {
                    let up = &layout.gamma[layout.git(h, i, t)];
                    chi.add_scaled(up, 1.0);
                }
                for j in 0..n {
                    if let Some(v) = s_at(g, j, i, t) {
                        chi.add_term(v, 1.0);
                    }
                    if let Some(v) = s_at(g, i, j, t) {
                        chi.add_term(v, -1.0);
                    }
                }
                chi.compact();
                let k = layout.git(g, i, t);
                layout.chi[k] = chi;

                let d = inst.initial_discharges.get(g, i, t);
                discharged += d;
                let mut gamma = LinExpr::constant(d);
                let mut alpha = LinExpr::constant(inst.initial_census.get(g, i) - discharged);
                for tp in 0..=t {
                    let c = &layout.chi[layout.git(g, i, tp)];
                    gamma.add_scaled(c, los.leaving_at(t - tp));
                    alpha.add_scaled(c, rem[t - tp]);
                }
                if let Some(r) = robust {
                    alpha.add_constant(r.alpha_shift[i * tl + t]);
                }
                layout.gamma[k] = gamma.compacted();
                layout.alpha[k] = alpha.compacted();
            }
        }
    }

    // bed-type aggregates
    layout.bed_alpha = vec![LinExpr::new(); nb * n * tl];
    layout.occupancy = vec![LinExpr::new(); nb * n * tl];
    for g in 0..ng {
        let b = bed_of[g];
        for i in 0..n {
            for t in 0..tl {
                let k = layout.bit(b, i, t);
                let a = layout.alpha[layout.git(g, i, t)].clone();
                layout.bed_alpha[k].add_scaled(&a, 1.0);
                layout.occupancy[k].add_scaled(&a, 1.0);
                for j in 0..n {
                    if let Some(v) = s_at(g, i, j, t) {
                        layout.occupancy[k].add_term(v, 1.0);
                    }
                }
            }
        }
    }
    for e in layout.bed_alpha.iter_mut().chain(layout.occupancy.iter_mut()) {
        e.compact();
    }

    Ok(BuiltModel { model, layout })
}

/// `occupancy - omega <= b` for every bed type, location and day.
pub(crate) fn add_overflow(built: &mut BuiltModel, inst: &ProblemInstance, cost: f64) {
    let BuiltModel { model, layout } = built;
    let (n, tl, nb) = (layout.n_locations, layout.horizon, layout.n_bed_types);
    for b in 0..nb {
        for i in 0..n {
            for t in 0..tl {
                let w = model.add_continuous(format!("omega[{b},{i},{t}]"), 0.0, f64::INFINITY);
                if cost != 0.0 {
                    model.objective.add_term(w, cost);
                }
                let mut e = layout.occupancy[layout.bit(b, i, t)].clone();
                e.add_term(w, -1.0);
                let row = model.add_constraint(
                    format!("overflow[{b},{i},{t}]"),
                    &e,
                    Relation::LessEq,
                    inst.system.capacity.get(b, i),
                );
                layout.omega.push(w);
                layout.overflow_rows.push(row);
            }
        }
    }
}

fn used_bed_types(inst: &ProblemInstance) -> Vec<bool> {
    let mut used = vec![false; inst.n_bed_types()];
    for b in inst.group_bed_types().into_iter().flatten() {
        used[b] = true;
    }
    used
}

/// Absolute deviation of each load `occupancy / b` from the mean load of
/// its bed type on that day.
fn add_load_balance(built: &mut BuiltModel, inst: &ProblemInstance) -> Result<()> {
    let used = used_bed_types(inst);
    let BuiltModel { model, layout } = built;
    let (n, tl, nb) = (layout.n_locations, layout.horizon, layout.n_bed_types);
    for b in (0..nb).filter(|&b| used[b]) {
        for i in 0..n {
            if inst.system.capacity.get(b, i) <= 0.0 {
                return Err(Error::invalid(format!(
                    "location `{}` has no `{}` beds; load balancing divides by capacity",
                    inst.system.locations[i].id, inst.system.bed_types[b].id
                )));
            }
        }
        for t in 0..tl {
            let loads: Vec<LinExpr> = (0..n)
                .map(|i| {
                    let mut l = LinExpr::new();
                    l.add_scaled(&layout.occupancy[layout.bit(b, i, t)], 1.0 / inst.system.capacity.get(b, i));
                    l
                })
                .collect();
            let mut mean = LinExpr::new();
            for l in &loads {
                mean.add_scaled(l, 1.0 / n as f64);
            }
            for (i, l) in loads.iter().enumerate() {
                let lam = model.add_continuous(format!("lambda[{b},{i},{t}]"), 0.0, f64::INFINITY);
                model.objective.add_term(lam, 1.0);
                let mut up = l.clone();
                up.add_scaled(&mean, -1.0).add_term(lam, -1.0);
                model.add_constraint(format!("lb_up[{b},{i},{t}]"), &up, Relation::LessEq, 0.0);
                let mut down = mean.clone();
                down.add_scaled(l, -1.0).add_term(lam, -1.0);
                model.add_constraint(format!("lb_down[{b},{i},{t}]"), &down, Relation::LessEq, 0.0);
                layout.lambda.push(lam);
            }
        }
    }
    Ok(())
}

/// Single-group model with closed-form census.
pub fn build_base(
    inst: &ProblemInstance,
    objective: &ObjectiveKind,
    options: &OperationalOptions,
) -> Result<BuiltModel> {
    if inst.n_groups() != 1 {
        return Err(Error::invalid(format!(
            "base model needs exactly one patient group, found {}; use the group model",
            inst.n_groups()
        )));
    }
    let mut built = assemble(inst, objective, None)?;
    apply_operational_options(&mut built, inst, options)?;
    Ok(built)
}

/// Care-path model over an in-forest of patient groups.
pub fn build_group(
    inst: &ProblemInstance,
    objective: &ObjectiveKind,
    options: &OperationalOptions,
) -> Result<BuiltModel> {
    let mut built = assemble(inst, objective, None)?;
    apply_operational_options(&mut built, inst, options)?;
    Ok(built)
}
