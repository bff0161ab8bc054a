//! Resource (nurse) redistribution, alone or combined with patients.

use super::patients::{assemble, assemble_block};
use super::{
    apply_operational_options, require_nurse_data, BuiltModel, LinExpr, ObjectiveKind,
    OperationalOptions, Relation, VarId,
};
use crate::error::Result;
use crate::network::ProblemInstance;

/// Adds `sigma`, supply and demand expressions and the shortage block to a
/// model whose census expressions are already laid out. Demand uses the
/// (possibly transfer-dependent) census of each bed type.
pub(crate) fn attach(
    built: &mut BuiltModel,
    inst: &ProblemInstance,
    objective: &ObjectiveKind,
    options: &OperationalOptions,
) -> Result<()> {
    require_nurse_data(inst)?;
    let weight = match *objective {
        ObjectiveKind::Combined { nurse, .. } => nurse,
        _ => 1.0,
    };
    let supply0 = inst.system.nurse_supply.as_ref().expect("checked");
    let ratio = inst.nurse_ratio.as_ref().expect("checked");
    let ext = inst.external_resource_supply.as_ref();
    let BuiltModel { model, layout } = built;
    let (n, tl, nb) = (layout.n_locations, layout.horizon, layout.n_bed_types);
    let adj = &inst.system.adjacency;

    let mut sigma: Vec<Option<VarId>> = vec![None; n * n * tl];
    for i in 0..n {
        for j in 0..n {
            if !adj.allows(i, j) {
                continue;
            }
            for t in 0..tl {
                let v = model.add_continuous(format!("sigma[{i},{j},{t}]"), 0.0, f64::INFINITY);
                sigma[(i * n + j) * tl + t] = Some(v);
                layout.resource_transfers.push((i, j, t, v));
            }
        }
    }
    let sig = |i: usize, j: usize, t: usize| sigma[(i * n + j) * tl + t];

    layout.supply = vec![LinExpr::new(); n * tl];
    layout.demand = vec![LinExpr::new(); n * tl];
    for i in 0..n {
        let mut eta = LinExpr::constant(supply0[i]);
        for t in 0..tl {
            if let Some(e) = ext {
                eta.add_constant(e.get(i, t));
            }
            // supply on hand before the day's transfers
            let pre = eta.clone();
            let mut out = LinExpr::new();
            for j in 0..n {
                if let Some(v) = sig(j, i, t) {
                    eta.add_term(v, 1.0);
                }
                if let Some(v) = sig(i, j, t) {
                    eta.add_term(v, -1.0);
                    out.add_term(v, 1.0);
                }
            }
            eta.compact();
            if !out.terms.is_empty() {
                let mut row = out;
                row.add_scaled(&pre, -1.0);
                model.add_constraint(format!("resource_sent[{i},{t}]"), &row, Relation::LessEq, 0.0);
            }
            let mut q = LinExpr::new();
            for b in 0..nb {
                if ratio[b] != 0.0 {
                    q.add_scaled(&layout.bed_alpha[layout.bit(b, i, t)], ratio[b]);
                }
            }
            q.compact();
            layout.supply[i * tl + t] = eta.clone();
            layout.demand[i * tl + t] = q;
        }
    }

    // bound on |q - eta| for the indicator rows
    let qmax = ratio.iter().cloned().fold(0.0, f64::max);
    let patients = inst.total_admissions() + inst.total_initial_census();
    let ext_total: f64 = ext.map(|e| e.values().iter().sum()).unwrap_or(0.0);
    let bound = qmax * patients + supply0.iter().sum::<f64>() + ext_total + 1.0;
    let m = 1.0 / bound;

    for i in 0..n {
        for t in 0..tl {
            let k = i * tl + t;
            let theta = model.add_continuous(format!("theta[{i},{t}]"), 0.0, f64::INFINITY);
            if weight != 0.0 {
                model.objective.add_term(theta, weight);
            }
            let mut gap = layout.demand[k].clone();
            gap.add_scaled(&layout.supply[k], -1.0);
            let mut row = gap.clone();
            row.add_term(theta, -1.0);
            model.add_constraint(format!("shortage[{i},{t}]"), &row, Relation::LessEq, 0.0);
            layout.shortage.push(theta);

            if options.nurse_guards {
                let kappa = model.add_binary(format!("kappa[{i},{t}]"));
                let mut lo = LinExpr::new();
                lo.add_scaled(&gap, m).add_term(kappa, -1.0);
                model.add_constraint(format!("kappa_on[{i},{t}]"), &lo, Relation::LessEq, 0.0);
                let mut hi = LinExpr::var(kappa);
                hi.add_scaled(&gap, -m);
                model.add_constraint(format!("kappa_off[{i},{t}]"), &hi, Relation::LessEq, 1.0);
                let mut keep = LinExpr::new();
                keep.add_term(kappa, supply0[i]).add_scaled(&layout.supply[k], -1.0);
                model.add_constraint(format!("keep_supply[{i},{t}]"), &keep, Relation::LessEq, 0.0);
            }
        }
    }
    model.objective.compact();
    Ok(())
}

/// Resource transfers against the no-transfer patient census.
pub fn build_resource(inst: &ProblemInstance, options: &OperationalOptions) -> Result<BuiltModel> {
    require_nurse_data(inst)?;
    options.check()?;
    let mut built = assemble_block(inst, false, None)?;
    attach(&mut built, inst, &ObjectiveKind::MinOverflow, options)?;
    Ok(built)
}

/// Patients and resources together with objective
/// `patient * sum(omega) + nurse * sum(theta)`.
pub fn build_combined(
    inst: &ProblemInstance,
    patient: f64,
    nurse: f64,
    options: &OperationalOptions,
) -> Result<BuiltModel> {
    require_nurse_data(inst)?;
    let objective = ObjectiveKind::Combined { patient, nurse };
    objective.check()?;
    let mut built = assemble(inst, &objective, None)?;
    attach(&mut built, inst, &objective, options)?;
    apply_operational_options(&mut built, inst, options)?;
    Ok(built)
}
