//! Build, solve and score a [`SolveRequest`] in one call.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{compute_census, compute_metrics_with, Census, MetricsOptions, MetricsReport, TransferPlan};
use crate::model::{build_model, BuiltModel, SolveRequest};
use crate::solver::{Solution, SolverBackend};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub solution: Solution,
    pub plan: TransferPlan,
    pub metrics: MetricsReport,
    pub census: Census,
    pub baseline_census: Census,
}

/// Fails with [`Error::Solver`] when the backend returns no usable point.
/// A node or time limit with an incumbent still yields a plan; the
/// solution status says so.
pub fn run_request(
    req: &SolveRequest,
    backend: &dyn SolverBackend,
    metrics: &MetricsOptions,
) -> Result<(BuiltModel, RunOutcome)> {
    let built = build_model(req)?;
    let solution = backend.solve(&built.model)?;
    if !solution.has_values() {
        return Err(Error::Solver(format!(
            "{} solver finished with status {}",
            backend.name(),
            solution.status
        )));
    }
    let plan = built.plan(&solution.values);
    let report = compute_metrics_with(&req.instance, &plan, metrics)?;
    let census = compute_census(&req.instance, &plan)?;
    let baseline_census = compute_census(&req.instance, &TransferPlan::empty())?;
    Ok((
        built,
        RunOutcome {
            solution,
            plan,
            metrics: report,
            census,
            baseline_census,
        },
    ))
}
