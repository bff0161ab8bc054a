//! Two-phase bounded-variable revised simplex with a dense explicit basis
//! inverse. Columns are stored sparse; the inverse is refreshed by
//! Gauss-Jordan refactorisation at a fixed pivot interval.

use std::time::Instant;

use super::{SolverSettings, Status};
use crate::model::{LinearModel, Relation};

pub(crate) struct LpOutcome {
    pub status: Status,
    /// Values of the model's variables.
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per model constraint, signed for minimisation:
    /// `<=` rows are non-positive, `>=` rows non-negative.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
enum Origin {
    /// Internal column for model variable `var`: `x = offset + sign * col`.
    Structural { var: usize, sign: f64 },
    Slack,
    Artificial,
}

struct Standard {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    row_sign: Vec<f64>,
    origin: Vec<Origin>,
    offset: Vec<f64>,
    initial_basis: Vec<usize>,
}

fn standardise(model: &LinearModel, lower: &[f64], upper: &[f64]) -> Standard {
    let nv = model.variables.len();
    let m = model.constraints.len();
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut ub = Vec::new();
    let mut origin = Vec::new();
    let mut offset = vec![0.0; nv];
    // internal columns of each model variable
    let mut var_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];

    for j in 0..nv {
        let (l, u) = (lower[j], upper[j]);
        if l.is_finite() {
            offset[j] = l;
            var_cols[j].push((cols.len(), 1.0));
            cols.push(Vec::new());
            ub.push(u - l);
            origin.push(Origin::Structural { var: j, sign: 1.0 });
        } else if u.is_finite() {
            offset[j] = u;
            var_cols[j].push((cols.len(), -1.0));
            cols.push(Vec::new());
            ub.push(f64::INFINITY);
            origin.push(Origin::Structural { var: j, sign: -1.0 });
        } else {
            for sign in [1.0, -1.0] {
                var_cols[j].push((cols.len(), sign));
                cols.push(Vec::new());
                ub.push(f64::INFINITY);
                origin.push(Origin::Structural { var: j, sign });
            }
        }
    }

    let mut cost = vec![0.0; cols.len()];
    for &(v, c) in &model.objective.terms {
        for &(col, sign) in &var_cols[v.0] {
            cost[col] += c * sign;
        }
    }

    let mut b = vec![0.0; m];
    let mut row_sign = vec![1.0; m];
    let mut slack_of_row: Vec<Option<(usize, f64)>> = vec![None; m];
    for (r, con) in model.constraints.iter().enumerate() {
        let mut rhs = con.rhs;
        for &(v, a) in &con.terms {
            rhs -= a * offset[v.0];
        }
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        row_sign[r] = sign;
        b[r] = sign * rhs;
        for &(v, a) in &con.terms {
            for &(col, s) in &var_cols[v.0] {
                cols[col].push((r, sign * a * s));
            }
        }
        let slack_coef = match con.relation {
            Relation::LessEq => Some(1.0),
            Relation::GreaterEq => Some(-1.0),
            Relation::Eq => None,
        };
        if let Some(coef) = slack_coef {
            let col = cols.len();
            cols.push(vec![(r, sign * coef)]);
            ub.push(f64::INFINITY);
            cost.push(0.0);
            origin.push(Origin::Slack);
            slack_of_row[r] = Some((col, sign * coef));
        }
    }
    // merge duplicate row entries inside columns
    for col in cols.iter_mut() {
        if col.len() > 1 {
            col.sort_by_key(|&(r, _)| r);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(r, v) in col.iter() {
                match merged.last_mut() {
                    Some((lr, lv)) if *lr == r => *lv += v,
                    _ => merged.push((r, v)),
                }
            }
            merged.retain(|&(_, v)| v != 0.0);
            *col = merged;
        }
    }

    let mut initial_basis = Vec::with_capacity(m);
    for (r, slack) in slack_of_row.iter().enumerate() {
        match slack {
            Some((col, coef)) if *coef > 0.0 => initial_basis.push(*col),
            _ => {
                let col = cols.len();
                cols.push(vec![(r, 1.0)]);
                ub.push(f64::INFINITY);
                cost.push(0.0);
                origin.push(Origin::Artificial);
                initial_basis.push(col);
            }
        }
    }

    Standard {
        m,
        cols,
        upper: ub,
        cost,
        b,
        row_sign,
        origin,
        offset,
        initial_basis,
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
    Numerical,
}

struct Engine<'a> {
    sf: Standard,
    settings: &'a SolverSettings,
    deadline: Option<Instant>,
    head: Vec<usize>,
    pos: Vec<usize>,
    at_upper: Vec<bool>,
    xb: Vec<f64>,
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
}

const NONBASIC: usize = usize::MAX;

impl<'a> Engine<'a> {
    fn new(sf: Standard, settings: &'a SolverSettings, deadline: Option<Instant>) -> Self {
        let m = sf.m;
        let ncols = sf.cols.len();
        let head = sf.initial_basis.clone();
        let mut pos = vec![NONBASIC; ncols];
        for (r, &c) in head.iter().enumerate() {
            pos[c] = r;
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        let xb = sf.b.clone();
        Engine {
            sf,
            settings,
            deadline,
            head,
            pos,
            at_upper: vec![false; ncols],
            xb,
            binv,
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn value_of_nonbasic(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.sf.upper[j]
        } else {
            0.0
        }
    }

    fn recompute_xb(&mut self) {
        let m = self.sf.m;
        let mut rhs = self.sf.b.clone();
        for j in 0..self.sf.cols.len() {
            if self.pos[j] == NONBASIC && self.at_upper[j] {
                let u = self.sf.upper[j];
                for &(r, v) in &self.sf.cols[j] {
                    rhs[r] -= v * u;
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.xb[r] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
    }

    /// Rebuilds the inverse from the current basis columns.
    fn refactor(&mut self) -> bool {
        let m = self.sf.m;
        if m == 0 {
            return true;
        }
        let mut a = vec![0.0; m * m];
        for (k, &c) in self.head.iter().enumerate() {
            for &(r, v) in &self.sf.cols[c] {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for k in 0..m {
            let mut piv = k;
            let mut best = a[k * m + k].abs();
            for r in (k + 1)..m {
                let v = a[r * m + k].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return false;
            }
            if piv != k {
                for c in 0..m {
                    a.swap(k * m + c, piv * m + c);
                    inv.swap(k * m + c, piv * m + c);
                }
            }
            let d = a[k * m + k];
            for c in 0..m {
                a[k * m + c] /= d;
                inv[k * m + c] /= d;
            }
            let (pivot_a, pivot_inv): (Vec<f64>, Vec<f64>) =
                (a[k * m..(k + 1) * m].to_vec(), inv[k * m..(k + 1) * m].to_vec());
            let nz_a: Vec<usize> = (0..m).filter(|&c| pivot_a[c] != 0.0).collect();
            let nz_inv: Vec<usize> = (0..m).filter(|&c| pivot_inv[c] != 0.0).collect();
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = a[r * m + k];
                if f == 0.0 {
                    continue;
                }
                for &c in &nz_a {
                    a[r * m + c] -= f * pivot_a[c];
                }
                for &c in &nz_inv {
                    inv[r * m + c] -= f * pivot_inv[c];
                }
            }
        }
        // column k of the eliminated matrix corresponds to basis position k,
        // so rows of `inv` are already ordered by basis position
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_xb();
        true
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = cost[self.head[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yk, &v) in y.iter_mut().zip(row) {
                    *yk += cb * v;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        cost[j]
            - self.sf.cols[j]
                .iter()
                .map(|&(r, v)| y[r] * v)
                .sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let mut alpha = vec![0.0; m];
        for &(k, v) in &self.sf.cols[j] {
            for (r, a) in alpha.iter_mut().enumerate() {
                let b = self.binv[r * m + k];
                if b != 0.0 {
                    *a += b * v;
                }
            }
        }
        alpha
    }

    fn pivot(&mut self, p: usize, alpha: &[f64]) {
        let m = self.sf.m;
        let piv = alpha[p];
        let (before, rest) = self.binv.split_at_mut(p * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        let nz: Vec<usize> = (0..m).filter(|&c| prow[c] != 0.0).collect();
        for r in 0..m {
            if r == p || alpha[r] == 0.0 {
                continue;
            }
            let f = alpha[r];
            let row = if r < p {
                &mut before[r * m..(r + 1) * m]
            } else {
                let o = (r - p - 1) * m;
                &mut after[o..o + m]
            };
            for &c in &nz {
                row[c] -= f * prow[c];
            }
        }
        self.since_refactor += 1;
    }

    fn out_of_budget(&self) -> bool {
        if let Some(limit) = self.settings.iteration_limit {
            if self.iterations >= limit {
                return true;
            }
        }
        if let Some(d) = self.deadline {
            if self.iterations.is_multiple_of(64) && Instant::now() >= d {
                return true;
            }
        }
        false
    }

    fn run(&mut self, cost: &[f64]) -> PhaseEnd {
        let opt_tol = self.settings.optimality_tol;
        let piv_tol = 1e-9;
        let ncols = self.sf.cols.len();
        loop {
            if self.since_refactor >= self.settings.refactor_interval && !self.refactor() {
                return PhaseEnd::Numerical;
            }
            if self.out_of_budget() {
                return PhaseEnd::Limit;
            }
            let y = self.duals(cost);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..ncols {
                if self.pos[j] != NONBASIC || self.sf.upper[j] <= 0.0 {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                let eligible = if self.at_upper[j] { d > opt_tol } else { d < -opt_tol };
                if !eligible {
                    continue;
                }
                if self.bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }

            let Some((q, _)) = entering else {
                if self.since_refactor > 0 {
                    if !self.refactor() {
                        return PhaseEnd::Numerical;
                    }
                    continue;
                }
                return PhaseEnd::Optimal;
            };

            let alpha = self.ftran(q);
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let mut theta = self.sf.upper[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_pivot = 0.0;
            for r in 0..self.sf.m {
                let rate = -dir * alpha[r];
                if rate.abs() <= piv_tol {
                    continue;
                }
                let basic = self.head[r];
                let (ratio, to_upper) = if rate < 0.0 {
                    (self.xb[r].max(0.0) / -rate, false)
                } else {
                    let u = self.sf.upper[basic];
                    if !u.is_finite() {
                        continue;
                    }
                    ((u - self.xb[r]).max(0.0) / rate, true)
                };
                let better = if ratio < theta - 1e-12 {
                    true
                } else if ratio <= theta + 1e-12 {
                    match leave {
                        None => true,
                        Some((lr, _)) if self.bland => basic < self.head[lr],
                        Some(_) => alpha[r].abs() > best_pivot,
                    }
                } else {
                    false
                };
                if better {
                    theta = ratio;
                    leave = Some((r, to_upper));
                    best_pivot = alpha[r].abs();
                }
            }

            if leave.is_none() && !theta.is_finite() {
                return PhaseEnd::Unbounded;
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run >= self.settings.bland_after {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            for r in 0..self.sf.m {
                if alpha[r] != 0.0 {
                    self.xb[r] -= dir * theta * alpha[r];
                }
            }
            match leave {
                None => {
                    // bound flip of the entering column
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((p, to_upper)) => {
                    let entering_value = self.value_of_nonbasic(q) + dir * theta;
                    let old = self.head[p];
                    self.pivot(p, &alpha);
                    self.pos[old] = NONBASIC;
                    self.at_upper[old] = to_upper;
                    self.head[p] = q;
                    self.pos[q] = p;
                    self.at_upper[q] = false;
                    self.xb[p] = entering_value;
                }
            }
        }
    }

    /// Pivots basic artificials out where a structural or slack column can
    /// replace them; remaining ones sit on redundant rows.
    fn expel_artificials(&mut self) {
        let m = self.sf.m;
        for p in 0..m {
            if !matches!(self.sf.origin[self.head[p]], Origin::Artificial) {
                continue;
            }
            let row: Vec<f64> = self.binv[p * m..(p + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.sf.cols.len() {
                if self.pos[j] != NONBASIC || matches!(self.sf.origin[j], Origin::Artificial) {
                    continue;
                }
                let v: f64 = self.sf.cols[j].iter().map(|&(r, a)| row[r] * a).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                let value = self.value_of_nonbasic(q);
                let old = self.head[p];
                self.pivot(p, &alpha);
                self.pos[old] = NONBASIC;
                self.at_upper[old] = false;
                self.head[p] = q;
                self.pos[q] = p;
                self.at_upper[q] = false;
                self.xb[p] = value;
            }
        }
        self.refactor();
    }
}

fn failure(status: Status, model: &LinearModel, iterations: usize) -> LpOutcome {
    LpOutcome {
        status,
        x: vec![0.0; model.variables.len()],
        objective: f64::NAN,
        duals: vec![0.0; model.constraints.len()],
        iterations,
    }
}

/// Solves the continuous relaxation of `model` under the given bounds,
/// ignoring integrality marks.
pub(crate) fn solve_relaxation(
    model: &LinearModel,
    lower: &[f64],
    upper: &[f64],
    settings: &SolverSettings,
    deadline: Option<Instant>,
) -> LpOutcome {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return failure(Status::Infeasible, model, 0);
    }
    let sf = standardise(model, lower, upper);
    let ncols = sf.cols.len();
    let base_cost = sf.cost.clone();
    let has_artificial = sf.origin.iter().any(|o| matches!(o, Origin::Artificial));
    let bmax = sf.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut eng = Engine::new(sf, settings, deadline);

    if has_artificial {
        let phase1: Vec<f64> = eng
            .sf
            .origin
            .iter()
            .map(|o| if matches!(o, Origin::Artificial) { 1.0 } else { 0.0 })
            .collect();
        match eng.run(&phase1) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded | PhaseEnd::Numerical => {
                return failure(Status::IterationLimit, model, eng.iterations)
            }
            PhaseEnd::Limit => return failure(Status::IterationLimit, model, eng.iterations),
        }
        let infeas: f64 = (0..eng.sf.m)
            .filter(|&r| matches!(eng.sf.origin[eng.head[r]], Origin::Artificial))
            .map(|r| eng.xb[r].max(0.0))
            .sum();
        if infeas > settings.feasibility_tol * (1.0 + bmax) {
            return failure(Status::Infeasible, model, eng.iterations);
        }
        eng.expel_artificials();
        for j in 0..ncols {
            if matches!(eng.sf.origin[j], Origin::Artificial) {
                eng.sf.upper[j] = 0.0;
                eng.at_upper[j] = false;
            }
        }
        eng.recompute_xb();
    }

    let status = match eng.run(&base_cost) {
        PhaseEnd::Optimal => Status::Optimal,
        PhaseEnd::Unbounded => Status::Unbounded,
        PhaseEnd::Limit | PhaseEnd::Numerical => Status::IterationLimit,
    };

    let mut col_value = vec![0.0; ncols];
    for j in 0..ncols {
        col_value[j] = if eng.pos[j] != NONBASIC {
            eng.xb[eng.pos[j]]
        } else {
            eng.value_of_nonbasic(j)
        };
    }
    let mut x = eng.sf.offset.clone();
    for j in 0..ncols {
        if let Origin::Structural { var, sign } = eng.sf.origin[j] {
            let mut v = col_value[j];
            if v < 0.0 {
                v = 0.0;
            }
            if v > eng.sf.upper[j] {
                v = eng.sf.upper[j];
            }
            x[var] += sign * v;
        }
    }
    for (k, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lower[k], upper[k]);
    }
    let objective = model.objective_value(&x);
    let y = eng.duals(&base_cost);
    let duals: Vec<f64> = y.iter().zip(&eng.sf.row_sign).map(|(a, s)| a * s).collect();
    LpOutcome {
        status,
        x,
        objective,
        duals,
        iterations: eng.iterations,
    }
}
