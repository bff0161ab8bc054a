//! Builders translating a [`ProblemInstance`] into a [`LinearModel`].
//!
//! Variable names are structured with zero-based indices into the
//! instance tables: `s[g,i,j,t]`, `omega[b,i,t]`, `sigma[i,j,t]`,
//! `theta[i,t]`, `lambda[b,i,t]`, `delta[i,j,t]`, `rho[i,j]`,
//! `nu[k,i,t]`, `kappa[i,t]` and `phi[b,i,t]`.

mod linear;
mod options;
mod patients;
mod resource;
mod robust;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{PlanEntry, ResourceEntry, TransferPlan};
use crate::network::ProblemInstance;
use crate::validate::validate_instance;

pub use linear::{Constraint, LinExpr, LinearModel, Relation, VarId, VarKind, Variable};
pub use options::{apply_operational_options, OperationalOptions, Preset};
pub use patients::{build_base, build_group};
pub use resource::{build_combined, build_resource};
pub use robust::{build_robust, worst_case_admissions, worst_case_for, RobustConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    #[default]
    MinOverflow,
    LoadBalance,
    Combined { patient: f64, nurse: f64 },
}

impl ObjectiveKind {
    pub fn check(&self) -> Result<()> {
        if let ObjectiveKind::Combined { patient, nurse } = *self {
            if !(patient >= 0.0 && nurse >= 0.0) || !patient.is_finite() || !nurse.is_finite() {
                return Err(Error::invalid("combined objective weights must be non-negative"));
            }
            if patient == 0.0 && nurse == 0.0 {
                return Err(Error::invalid("combined objective weights cannot both be zero"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    pub instance: ProblemInstance,
    #[serde(default)]
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub options: OperationalOptions,
    #[serde(default)]
    pub robust: RobustConfig,
    #[serde(default)]
    pub include_resources: bool,
}

impl SolveRequest {
    pub fn new(instance: ProblemInstance) -> Self {
        SolveRequest {
            instance,
            objective: ObjectiveKind::MinOverflow,
            options: OperationalOptions::default(),
            robust: RobustConfig::default(),
            include_resources: false,
        }
    }
}

/// A patient transfer variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferVar {
    pub group: usize,
    pub from: usize,
    pub to: usize,
    pub day: usize,
    pub var: VarId,
}

/// Where each modelling quantity lives inside a built [`LinearModel`].
/// Per-cell tables are flattened row-major over the listed index order.
#[derive(Debug, Clone, Default)]
pub struct Layout {
    pub n_groups: usize,
    pub n_locations: usize,
    pub n_bed_types: usize,
    pub horizon: usize,
    pub transfers: Vec<TransferVar>,
    /// `[g][i][t]`, entry groups only; the right-hand side of the sent cap.
    pub sent_cap: Vec<f64>,
    /// `[g][i][t]`
    pub alpha: Vec<LinExpr>,
    pub chi: Vec<LinExpr>,
    pub gamma: Vec<LinExpr>,
    /// `[b][i][t]`: active patients summed over the groups of a bed type.
    pub bed_alpha: Vec<LinExpr>,
    /// `[b][i][t]`: `bed_alpha` plus patients sent away that day.
    pub occupancy: Vec<LinExpr>,
    /// `[b][i][t]`, empty when the model has no overflow block.
    pub omega: Vec<VarId>,
    pub overflow_rows: Vec<usize>,
    /// `[b][i][t]`, load-balancing deviations.
    pub lambda: Vec<VarId>,
    /// `(from, to, day, var)`
    pub resource_transfers: Vec<(usize, usize, usize, VarId)>,
    /// `[i][t]`
    pub shortage: Vec<VarId>,
    pub supply: Vec<LinExpr>,
    pub demand: Vec<LinExpr>,
    /// Capacity multiplier applied by the buffer option.
    pub capacity_scale: f64,
}

impl Layout {
    pub fn git(&self, g: usize, i: usize, t: usize) -> usize {
        (g * self.n_locations + i) * self.horizon + t
    }

    pub fn bit(&self, b: usize, i: usize, t: usize) -> usize {
        (b * self.n_locations + i) * self.horizon + t
    }

    pub fn it(&self, i: usize, t: usize) -> usize {
        i * self.horizon + t
    }
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: LinearModel,
    pub layout: Layout,
}

impl BuiltModel {
    /// Reads the transfer plan out of a solution vector; amounts below
    /// `1e-9` are dropped.
    pub fn plan(&self, values: &[f64]) -> TransferPlan {
        let mut plan = TransferPlan::default();
        for tv in &self.layout.transfers {
            let v = values.get(tv.var.0).copied().unwrap_or(0.0);
            if v > 1e-9 {
                plan.transfers.push(PlanEntry {
                    group: tv.group,
                    from: tv.from,
                    to: tv.to,
                    day: tv.day,
                    amount: v,
                });
            }
        }
        if !self.layout.resource_transfers.is_empty() {
            let mut res = Vec::new();
            for &(from, to, day, var) in &self.layout.resource_transfers {
                let v = values.get(var.0).copied().unwrap_or(0.0);
                if v > 1e-9 {
                    res.push(ResourceEntry { from, to, day, amount: v });
                }
            }
            plan.resource_transfers = Some(res);
        }
        plan
    }
}

fn require_nurse_data(inst: &ProblemInstance) -> Result<()> {
    if inst.system.nurse_supply.is_none() {
        return Err(Error::invalid("resource model requires `nurse_supply`"));
    }
    if inst.nurse_ratio.is_none() {
        return Err(Error::invalid("resource model requires `nurse_ratio`"));
    }
    Ok(())
}

/// Validates the request and builds the matching formulation.
pub fn build_model(req: &SolveRequest) -> Result<BuiltModel> {
    let inst = &req.instance;
    let report = validate_instance(inst);
    if !report.ok {
        return Err(Error::Validation(report));
    }
    req.objective.check()?;
    req.options.check()?;
    let resources = req.include_resources || matches!(req.objective, ObjectiveKind::Combined { .. });
    if resources {
        require_nurse_data(inst)?;
    }
    if req.robust.enabled {
        req.robust.check(inst)?;
        let mut built = build_robust(inst, &req.objective, &req.options, &req.robust)?;
        if resources {
            resource::attach(&mut built, inst, &req.objective, &req.options)?;
        }
        return Ok(built);
    }
    if resources {
        let mut built = patients::assemble(inst, &req.objective, None)?;
        resource::attach(&mut built, inst, &req.objective, &req.options)?;
        apply_operational_options(&mut built, inst, &req.options)?;
        return Ok(built);
    }
    if inst.n_groups() == 1 {
        build_base(inst, &req.objective, &req.options)
    } else {
        build_group(inst, &req.objective, &req.options)
    }
}
