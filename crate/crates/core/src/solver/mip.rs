//! LP-based branch-and-bound for integer, binary and semi-continuous
//! variables.

use std::time::Instant;

use super::simplex::solve_relaxation;
use super::{Solution, SolveStats, SolverSettings, Status};
use crate::model::{LinearModel, VarKind};

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Relaxation value of the parent, a valid bound for this subtree.
    bound: f64,
}

enum Branch {
    Integer { var: usize, value: f64 },
    SemiContinuous { var: usize, min: f64 },
}

fn root_bounds(model: &LinearModel) -> (Vec<f64>, Vec<f64>) {
    let mut lower = Vec::with_capacity(model.num_vars());
    let mut upper = Vec::with_capacity(model.num_vars());
    for v in &model.variables {
        let (mut l, mut u) = (v.lower, v.upper);
        match v.kind {
            VarKind::Binary => {
                l = l.max(0.0).ceil();
                u = u.min(1.0).floor();
            }
            VarKind::Integer => {
                l = (l - 1e-9).ceil();
                u = (u + 1e-9).floor();
            }
            VarKind::SemiContinuous { .. } => {
                // relaxation allows the gap (0, min)
                l = l.min(0.0);
            }
            VarKind::Continuous => {}
        }
        lower.push(l);
        upper.push(u);
    }
    (lower, upper)
}

fn pick_branch(model: &LinearModel, x: &[f64], lower: &[f64], tol: f64) -> Option<Branch> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, v) in model.variables.iter().enumerate() {
        if matches!(v.kind, VarKind::Integer | VarKind::Binary) {
            let f = x[k] - x[k].floor();
            let dist = f.min(1.0 - f);
            if dist > tol && best.is_none_or(|(_, d, _)| dist > d) {
                best = Some((k, dist, x[k]));
            }
        }
    }
    if let Some((var, _, value)) = best {
        return Some(Branch::Integer { var, value });
    }
    let mut worst: Option<(usize, f64, f64)> = None;
    for (k, v) in model.variables.iter().enumerate() {
        if let VarKind::SemiContinuous { min } = v.kind {
            // already forced on or off in this subtree
            if lower[k] >= min - tol {
                continue;
            }
            let gap = x[k].min(min - x[k]);
            if x[k] > tol && x[k] < min - tol && worst.is_none_or(|(_, g, _)| gap > g) {
                worst = Some((k, gap, min));
            }
        }
    }
    worst.map(|(var, _, min)| Branch::SemiContinuous { var, min })
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    (incumbent - bound).max(0.0) / incumbent.abs().max(1.0)
}

fn tidy(model: &LinearModel, x: &mut [f64]) {
    for (k, v) in model.variables.iter().enumerate() {
        match v.kind {
            VarKind::Integer | VarKind::Binary => x[k] = x[k].round(),
            VarKind::SemiContinuous { .. } if x[k].abs() < 1e-9 => x[k] = 0.0,
            _ => {}
        }
    }
}

/// Rounds the integer variables of a relaxed point, fixes them, and solves
/// for the rest. Returns a feasible point when that works.
fn round_and_fix(
    model: &LinearModel,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    round: fn(f64) -> f64,
    settings: &SolverSettings,
    deadline: Option<Instant>,
) -> Option<(f64, Vec<f64>, usize)> {
    let (mut lo, mut hi) = (lower.to_vec(), upper.to_vec());
    for (k, v) in model.variables.iter().enumerate() {
        match v.kind {
            VarKind::Integer | VarKind::Binary => {
                let r = round(x[k]).clamp(lower[k], upper[k]);
                lo[k] = r;
                hi[k] = r;
            }
            VarKind::SemiContinuous { min } if lower[k] < min => {
                if x[k] < 0.5 * min {
                    lo[k] = 0.0;
                    hi[k] = 0.0;
                } else {
                    lo[k] = min;
                }
            }
            _ => {}
        }
    }
    let lp = solve_relaxation(model, &lo, &hi, settings, deadline);
    if lp.status != Status::Optimal {
        return None;
    }
    let mut x = lp.x;
    tidy(model, &mut x);
    Some((model.objective_value(&x), x, lp.iterations))
}

/// Nodes between rounding attempts after the root.
const HEURISTIC_INTERVAL: usize = 50;

pub(crate) fn branch_and_bound(model: &LinearModel, settings: &SolverSettings) -> Solution {
    let start = Instant::now();
    let deadline = settings.deadline(start);
    let (lower, upper) = root_bounds(model);
    let mut open = vec![Node {
        lower,
        upper,
        bound: f64::NEG_INFINITY,
    }];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut unbounded = false;
    let mut exhausted = true;
    let mut root_bound = f64::NEG_INFINITY;
    let tol = settings.integrality_tol;

    while let Some(node) = open.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= *best - settings.gap_tolerance * best.abs().max(1.0) {
                continue;
            }
        }
        if nodes >= settings.node_limit || deadline.is_some_and(|d| Instant::now() >= d) {
            open.push(node);
            exhausted = false;
            break;
        }
        nodes += 1;
        if nodes.is_multiple_of(settings.restart_interval.max(1)) {
            // best-bound restart: continue diving from the most promising node
            open.push(node);
            open.sort_by(|a, b| b.bound.total_cmp(&a.bound));
            continue;
        }

        let lp = solve_relaxation(model, &node.lower, &node.upper, settings, deadline);
        iterations += lp.iterations;
        match lp.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                unbounded = true;
                break;
            }
            Status::IterationLimit => {
                exhausted = false;
                break;
            }
            Status::Optimal => {}
        }
        if nodes == 1 {
            root_bound = lp.objective;
        }
        if let Some((best, _)) = &incumbent {
            if lp.objective >= *best - settings.gap_tolerance * best.abs().max(1.0) {
                continue;
            }
        }
        let branch = pick_branch(model, &lp.x, &node.lower, tol);
        if branch.is_some() && (nodes == 1 || nodes.is_multiple_of(HEURISTIC_INTERVAL)) {
            for round in [f64::round as fn(f64) -> f64, f64::floor] {
                if let Some((obj, x, its)) =
                    round_and_fix(model, &lp.x, &node.lower, &node.upper, round, settings, deadline)
                {
                    iterations += its;
                    if incumbent.as_ref().is_none_or(|(b, _)| obj < *b) {
                        log::debug!("mip: rounded incumbent {obj} at node {nodes}");
                        incumbent = Some((obj, x));
                    }
                }
            }
        }
        match branch {
            None => {
                let mut x = lp.x;
                tidy(model, &mut x);
                let obj = model.objective_value(&x);
                if incumbent.as_ref().is_none_or(|(b, _)| obj < *b) {
                    log::debug!("mip: incumbent {obj} at node {nodes}");
                    incumbent = Some((obj, x));
                }
            }
            Some(Branch::Integer { var, value }) => {
                let mut down = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: lp.objective,
                };
                down.upper[var] = value.floor();
                let mut up = Node {
                    lower: node.lower,
                    upper: node.upper,
                    bound: lp.objective,
                };
                up.lower[var] = value.ceil();
                // explore the nearer side first
                if value - value.floor() < 0.5 {
                    open.push(up);
                    open.push(down);
                } else {
                    open.push(down);
                    open.push(up);
                }
            }
            Some(Branch::SemiContinuous { var, min }) => {
                let mut off = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: lp.objective,
                };
                off.lower[var] = 0.0;
                off.upper[var] = 0.0;
                let mut on = Node {
                    lower: node.lower,
                    upper: node.upper,
                    bound: lp.objective,
                };
                on.lower[var] = min;
                open.push(on);
                open.push(off);
            }
        }
    }

    let open_bound = open
        .iter()
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let stats = |best_bound: f64| SolveStats {
        iterations,
        nodes,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        best_bound,
    };

    if unbounded {
        return Solution {
            status: Status::Unbounded,
            objective: f64::NEG_INFINITY,
            values: Vec::new(),
            dual_values: None,
            stats: stats(f64::NEG_INFINITY),
        };
    }
    match incumbent {
        Some((obj, x)) => {
            let bound = if exhausted { obj } else { open_bound.min(obj).max(root_bound) };
            let status = if exhausted || relative_gap(obj, bound) <= settings.gap_tolerance {
                Status::Optimal
            } else {
                Status::IterationLimit
            };
            Solution {
                status,
                objective: obj,
                values: x,
                dual_values: None,
                stats: stats(bound),
            }
        }
        None => Solution {
            status: if exhausted { Status::Infeasible } else { Status::IterationLimit },
            objective: f64::NAN,
            values: Vec::new(),
            dual_values: None,
            stats: stats(root_bound),
        },
    }
}
