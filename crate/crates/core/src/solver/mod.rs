//! Embedded LP/MIP engine behind a single `solve(model)` seam.

mod lp_format;
mod mip;
mod simplex;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinearModel;

pub use lp_format::write_lp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration_limit",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub nodes: usize,
    pub wall_time_ms: f64,
    /// Best proven lower bound (equal to the objective for solved LPs).
    pub best_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    /// Indexed like `LinearModel::variables`.
    pub values: Vec<f64>,
    /// Row multipliers for pure LPs, indexed like `LinearModel::constraints`.
    pub dual_values: Option<Vec<f64>>,
    pub stats: SolveStats,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_values(&self) -> bool {
        !self.values.is_empty() && self.objective.is_finite()
    }

    pub fn value(&self, model: &LinearModel, name: &str) -> Option<f64> {
        model.var_id(name).and_then(|v| self.values.get(v.0).copied())
    }

    pub fn named_values(&self, model: &LinearModel) -> BTreeMap<String, f64> {
        model
            .variables
            .iter()
            .zip(&self.values)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub integrality_tol: f64,
    /// Relative gap `(incumbent - bound) / max(1, |incumbent|)` at which
    /// branch-and-bound stops.
    pub gap_tolerance: f64,
    pub node_limit: usize,
    pub iteration_limit: Option<usize>,
    pub time_limit_secs: Option<f64>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub refactor_interval: usize,
    /// Nodes between best-bound restarts of the depth-first search.
    pub restart_interval: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            integrality_tol: 1e-6,
            gap_tolerance: 1e-6,
            node_limit: 200_000,
            iteration_limit: None,
            time_limit_secs: None,
            bland_after: 1000,
            refactor_interval: 100,
            restart_interval: 1000,
        }
    }
}

impl SolverSettings {
    fn deadline(&self, start: Instant) -> Option<Instant> {
        self.time_limit_secs
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(|s| start + Duration::from_secs_f64(s))
    }
}

/// A solver engine. Implement this to plug in an external LP/MIP code.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &LinearModel) -> Result<Solution>;
}

#[derive(Debug, Clone, Default)]
pub struct EmbeddedSolver {
    pub settings: SolverSettings,
}

impl EmbeddedSolver {
    pub fn new(settings: SolverSettings) -> Self {
        EmbeddedSolver { settings }
    }
}

impl SolverBackend for EmbeddedSolver {
    fn name(&self) -> &str {
        "embedded"
    }

    fn solve(&self, model: &LinearModel) -> Result<Solution> {
        if model.is_mixed_integer() {
            solve_mip_with(model, &self.settings)
        } else {
            solve_lp_with(model, &self.settings)
        }
    }
}

pub fn solve_lp(model: &LinearModel) -> Result<Solution> {
    solve_lp_with(model, &SolverSettings::default())
}

pub fn solve_lp_with(model: &LinearModel, settings: &SolverSettings) -> Result<Solution> {
    if let Some(v) = model.variables.iter().find(|v| v.kind.is_discrete()) {
        return Err(Error::invalid(format!(
            "solve_lp called on a model with discrete variable `{}`",
            v.name
        )));
    }
    model.check()?;
    let start = Instant::now();
    let lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let out = simplex::solve_relaxation(model, &lower, &upper, settings, settings.deadline(start));
    log::debug!(
        "lp: {} vars, {} rows, status {}, {} pivots",
        model.num_vars(),
        model.num_constraints(),
        out.status,
        out.iterations
    );
    let solved = out.status == Status::Optimal;
    Ok(Solution {
        status: out.status,
        objective: out.objective,
        values: if solved { out.x } else { Vec::new() },
        dual_values: solved.then_some(out.duals),
        stats: SolveStats {
            iterations: out.iterations,
            nodes: 0,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            best_bound: if solved { out.objective } else { f64::NAN },
        },
    })
}

pub fn solve_mip(model: &LinearModel, gap_tolerance: f64, node_limit: usize) -> Result<Solution> {
    let settings = SolverSettings {
        gap_tolerance,
        node_limit,
        ..SolverSettings::default()
    };
    solve_mip_with(model, &settings)
}

pub fn solve_mip_with(model: &LinearModel, settings: &SolverSettings) -> Result<Solution> {
    model.check()?;
    if !model.is_mixed_integer() {
        return solve_lp_with(model, settings);
    }
    Ok(mip::branch_and_bound(model, settings))
}

/// Dual objective `y'b + sum of reduced-cost bound terms` for an LP
/// solution carrying row multipliers. Equals the primal objective at an
/// optimal basis.
pub fn dual_objective(model: &LinearModel, duals: &[f64]) -> f64 {
    let mut reduced: Vec<f64> = vec![0.0; model.num_vars()];
    for &(v, c) in &model.objective.terms {
        reduced[v.0] += c;
    }
    let mut value = model.objective.constant;
    for (con, &y) in model.constraints.iter().zip(duals) {
        value += y * con.rhs;
        for &(v, a) in &con.terms {
            reduced[v.0] -= y * a;
        }
    }
    for (var, &d) in model.variables.iter().zip(&reduced) {
        if d > 0.0 {
            value += d * var.lower;
        } else if d < 0.0 {
            value += d * var.upper;
        }
    }
    value
}
