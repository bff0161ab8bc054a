//! Test-side oracles. Nothing here calls the library's solver or census
//! code; results are computed from first principles.
#![allow(dead_code)]

use rand::Rng;
use surgeflow::model::{LinExpr, LinearModel, Relation, VarKind};

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// A feasible LP with finite box bounds: rows pass through a random
/// interior point with a random slack.
pub fn random_lp(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> LinearModel {
    let nv = rng.random_range(2..=max_vars);
    let nr = rng.random_range(1..=max_rows);
    let mut m = LinearModel::new();
    let mut x0 = Vec::new();
    for k in 0..nv {
        let lo = if rng.random_bool(0.7) { 0.0 } else { -(rng.random_range(0..3) as f64) };
        let hi = lo + rng.random_range(1..10) as f64;
        x0.push(lo + rng.random::<f64>() * (hi - lo));
        m.add_continuous(format!("x{k}"), lo, hi);
    }
    for r in 0..nr {
        let mut e = LinExpr::new();
        let mut act = 0.0;
        let forced = rng.random_range(0..nv);
        for k in 0..nv {
            if k == forced || rng.random_bool(0.75) {
                let mut c = round1(rng.random_range(-5.0..5.0));
                if c == 0.0 {
                    c = 1.0;
                }
                e.add_term(surgeflow::model::VarId(k), c);
                act += c * x0[k];
            }
        }
        let roll: f64 = rng.random();
        let (rel, rhs) = if roll < 0.15 {
            (Relation::Eq, act)
        } else if roll < 0.6 {
            (Relation::LessEq, act + round1(rng.random_range(0.0..3.0)))
        } else {
            (Relation::GreaterEq, act - round1(rng.random_range(0.0..3.0)))
        };
        m.add_constraint(format!("r{r}"), &e, rel, rhs);
    }
    let mut obj = LinExpr::new();
    for k in 0..nv {
        obj.add_term(surgeflow::model::VarId(k), round1(rng.random_range(-5.0..5.0)));
    }
    m.objective = obj;
    m
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for c in k..n {
                    a[i][c] -= f * a[k][c];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combinations(n, k, i + 1, cur, f);
        cur.pop();
    }
}

/// Minimum objective over all basic feasible solutions of a box-bounded
/// LP, ignoring integrality marks. `None` when no vertex is feasible.
pub fn vertex_enumeration(model: &LinearModel) -> Option<f64> {
    let n = model.variables.len();
    let dense = |terms: &[(surgeflow::model::VarId, f64)]| {
        let mut row = vec![0.0; n];
        for &(v, c) in terms {
            row[v.0] += c;
        }
        row
    };
    let mut eqs: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut ineqs: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &model.constraints {
        let row = dense(&c.terms);
        match c.relation {
            Relation::Eq => eqs.push((row, c.rhs)),
            Relation::LessEq => ineqs.push((row, c.rhs)),
            Relation::GreaterEq => ineqs.push((row.iter().map(|v| -v).collect(), -c.rhs)),
        }
    }
    for (k, v) in model.variables.iter().enumerate() {
        assert!(v.lower.is_finite() && v.upper.is_finite(), "oracle needs a box");
        let mut up = vec![0.0; n];
        up[k] = 1.0;
        ineqs.push((up, v.upper));
        let mut lo = vec![0.0; n];
        lo[k] = -1.0;
        ineqs.push((lo, -v.lower));
    }
    if eqs.len() > n {
        return None;
    }
    let obj = dense(&model.objective.terms);
    let mut best: Option<f64> = None;
    let need = n - eqs.len();
    combinations(ineqs.len(), need, 0, &mut Vec::new(), &mut |pick| {
        let mut a: Vec<Vec<f64>> = eqs.iter().map(|(r, _)| r.clone()).collect();
        let mut b: Vec<f64> = eqs.iter().map(|(_, v)| *v).collect();
        for &p in pick {
            a.push(ineqs[p].0.clone());
            b.push(ineqs[p].1);
        }
        let Some(x) = solve_dense(a, b) else { return };
        let dot = |r: &[f64]| r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let feasible = ineqs.iter().all(|(r, v)| dot(r) <= v + 1e-7)
            && eqs.iter().all(|(r, v)| (dot(r) - v).abs() <= 1e-7);
        if feasible {
            let val = dot(&obj) + model.objective.constant;
            if best.is_none_or(|b| val < b) {
                best = Some(val);
            }
        }
    });
    best
}

/// Exact optimum of a small box-bounded MIP by enumerating every integer
/// assignment and solving the remaining LP by vertex enumeration.
pub fn brute_force_integer(model: &LinearModel) -> Option<f64> {
    let ints: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v.kind, VarKind::Integer | VarKind::Binary))
        .map(|(k, _)| k)
        .collect();
    let mut best: Option<f64> = None;
    let mut assign = vec![0i64; ints.len()];
    fn rec(
        model: &LinearModel,
        ints: &[usize],
        depth: usize,
        assign: &mut Vec<i64>,
        best: &mut Option<f64>,
    ) {
        if depth == ints.len() {
            let mut fixed = model.clone();
            for (&k, &v) in ints.iter().zip(assign.iter()) {
                fixed.variables[k].lower = v as f64;
                fixed.variables[k].upper = v as f64;
            }
            if let Some(val) = vertex_enumeration(&fixed) {
                if best.is_none_or(|b| val < b) {
                    *best = Some(val);
                }
            }
            return;
        }
        let v = &model.variables[ints[depth]];
        let lo = v.lower.ceil() as i64;
        let hi = v.upper.floor() as i64;
        for x in lo..=hi {
            assign[depth] = x;
            rec(model, ints, depth + 1, assign, best);
        }
    }
    rec(model, &ints, 0, &mut assign, &mut best);
    best
}

// ---------------------------------------------------------------------------
// redistribution instances

use surgeflow::builder::InstanceBuilder;
use surgeflow::los::LosDistribution;
use surgeflow::network::{AdjacencyGraph, ProblemInstance};

/// Length-of-stay pmf: a point mass or a random law on `0..=3` days.
pub fn random_los(rng: &mut impl Rng) -> LosDistribution {
    if rng.random_bool(0.5) {
        return LosDistribution::point_mass(rng.random_range(1..=3));
    }
    let raw: Vec<f64> = (0..4).map(|k| if k == 0 { 0.0 } else { rng.random_range(0..4) as f64 + 0.5 }).collect();
    let total: f64 = raw.iter().sum();
    let mut pmf: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = pmf[..3].iter().sum();
    pmf[3] = 1.0 - head;
    LosDistribution::from_pmf(pmf).unwrap()
}

pub struct RandomShape {
    pub max_nodes: usize,
    pub max_days: usize,
    pub max_admissions: u32,
    pub max_beds: u32,
    pub max_initial: u32,
}

/// Single-group instance with integer data and a complete graph.
pub fn random_instance(rng: &mut impl Rng, shape: &RandomShape) -> ProblemInstance {
    let n = rng.random_range(1..=shape.max_nodes);
    let t = rng.random_range(1..=shape.max_days);
    let mut b = InstanceBuilder::new(t).bed_type("bed").group("g", "bed", None, random_los(rng));
    for i in 0..n {
        let id = format!("h{i}");
        b = b.location(&id, 40.0 + 0.1 * i as f64, -74.0);
        b = b.capacity("bed", &id, rng.random_range(0..=shape.max_beds) as f64);
        let adm: Vec<f64> = (0..t).map(|_| rng.random_range(0..=shape.max_admissions) as f64).collect();
        b = b.admissions("g", &id, &adm);
        let p0 = rng.random_range(0..=shape.max_initial) as f64;
        b = b.initial("g", &id, p0);
        // the initial cohort leaves one by one in the first days
        let mut left = p0;
        let d: Vec<f64> = (0..t)
            .map(|_| {
                let k = if left > 0.0 && rng.random_bool(0.5) { 1.0 } else { 0.0 };
                left -= k;
                k
            })
            .collect();
        b = b.discharges("g", &id, &d);
    }
    b.build().unwrap()
}

/// Share still present `lag` days after admission, from the pmf alone.
pub fn still_present(pmf: &[f64], lag: usize) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let left: f64 = pmf.iter().take(lag + 1).sum();
    (1.0 - left).max(0.0)
}

/// Occupancy `[i][t]` of a single-group instance under transfers
/// `(from, to, day, amount)`; patients sent away still occupy the sender
/// on the transfer day.
pub fn occupancy_oracle(inst: &ProblemInstance, moves: &[(usize, usize, usize, f64)]) -> Vec<Vec<f64>> {
    let (n, tl) = (inst.n_locations(), inst.horizon);
    let pmf = inst.los[0].pmf();
    let mut inflow = vec![vec![0.0; tl]; n];
    let mut sent = vec![vec![0.0; tl]; n];
    for i in 0..n {
        for t in 0..tl {
            inflow[i][t] = inst.admissions.get(0, i, t);
        }
    }
    for &(i, j, t, a) in moves {
        inflow[i][t] -= a;
        inflow[j][t] += a;
        sent[i][t] += a;
    }
    let mut occ = vec![vec![0.0; tl]; n];
    for i in 0..n {
        let mut initial = inst.initial_census.get(0, i);
        for t in 0..tl {
            initial -= inst.initial_discharges.get(0, i, t);
            let mut c = initial;
            for tp in 0..=t {
                c += still_present(pmf, t - tp) * inflow[i][tp];
            }
            occ[i][t] = c + sent[i][t];
        }
    }
    occ
}

pub fn overflow_oracle(inst: &ProblemInstance, moves: &[(usize, usize, usize, f64)]) -> f64 {
    let occ = occupancy_oracle(inst, moves);
    let mut total = 0.0;
    for (i, row) in occ.iter().enumerate() {
        let cap = inst.system.capacity.get(0, i);
        for &o in row {
            total += (o - cap).max(0.0);
        }
    }
    total
}

/// Number of integer plans respecting the per-day sent caps.
pub fn plan_count(inst: &ProblemInstance) -> f64 {
    let n = inst.n_locations();
    let deg = (n - 1) as u64;
    let mut count = 1.0;
    for i in 0..n {
        for t in 0..inst.horizon {
            let p = inst.admissions.get(0, i, t) as u64;
            // compositions of at most p into deg parts: C(p + deg, deg)
            let mut c = 1.0;
            for k in 1..=deg {
                c = c * (p + k) as f64 / k as f64;
            }
            count *= c;
        }
    }
    count
}

/// Minimum overflow over every integer plan on the complete graph where
/// each location sends at most its admissions of the day.
pub fn enumerate_min_overflow(inst: &ProblemInstance) -> f64 {
    let (n, tl) = (inst.n_locations(), inst.horizon);
    // every (i, t) chooses a split of at most p(i, t) among the others
    let mut choices: Vec<Vec<Vec<(usize, usize, usize, f64)>>> = Vec::new();
    for i in 0..n {
        for t in 0..tl {
            let p = inst.admissions.get(0, i, t) as u32;
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut opts = Vec::new();
            let mut cur = vec![0u32; others.len()];
            fn splits(k: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
                if k == cur.len() {
                    out.push(cur.clone());
                    return;
                }
                for a in 0..=left {
                    cur[k] = a;
                    splits(k + 1, left - a, cur, out);
                }
                cur[k] = 0;
            }
            let mut all = Vec::new();
            splits(0, p, &mut cur, &mut all);
            for s in all {
                opts.push(
                    others
                        .iter()
                        .zip(&s)
                        .filter(|(_, &a)| a > 0)
                        .map(|(&j, &a)| (i, j, t, a as f64))
                        .collect(),
                );
            }
            choices.push(opts);
        }
    }
    let mut best = f64::INFINITY;
    let mut moves = Vec::new();
    fn walk(
        inst: &ProblemInstance,
        choices: &[Vec<Vec<(usize, usize, usize, f64)>>],
        k: usize,
        moves: &mut Vec<(usize, usize, usize, f64)>,
        best: &mut f64,
    ) {
        if k == choices.len() {
            *best = best.min(overflow_oracle(inst, moves));
            return;
        }
        for opt in &choices[k] {
            let keep = moves.len();
            moves.extend_from_slice(opt);
            walk(inst, choices, k + 1, moves, best);
            moves.truncate(keep);
        }
    }
    walk(inst, &choices, 0, &mut moves, &mut best);
    best
}

pub fn without_edges(mut inst: ProblemInstance) -> ProblemInstance {
    let n = inst.n_locations();
    inst.system.adjacency = AdjacencyGraph::empty(n);
    inst
}

// ---------------------------------------------------------------------------
// fixtures and post-hoc audits

use surgeflow::model::{BuiltModel, OperationalOptions};
use surgeflow::solver::Solution;

/// Two locations with eight beds and a three-day stay. The first surges in
/// the first half of the horizon and the second afterwards.
pub fn complementary_surge() -> ProblemInstance {
    InstanceBuilder::new(6)
        .location("a", 40.7, -74.0)
        .location("b", 40.8, -74.1)
        .bed_type("bed")
        .group("g", "bed", None, LosDistribution::point_mass(3))
        .capacity("bed", "a", 8.0)
        .capacity("bed", "b", 8.0)
        .admissions("g", "a", &[4.0, 4.0, 4.0, 0.0, 0.0, 0.0])
        .admissions("g", "b", &[0.0, 0.0, 0.0, 4.0, 4.0, 4.0])
        .build()
        .unwrap()
}

/// Three locations where the first is overloaded throughout and the others
/// have room, with deviation bounds for the robust model.
pub fn surge_network() -> ProblemInstance {
    let los = LosDistribution::from_pmf(vec![0.0, 0.2, 0.3, 0.5]).unwrap();
    let adm_a = [6.0, 7.0, 5.0, 8.0, 6.0, 3.0];
    let adm_b = [1.0, 2.0, 1.0, 0.0, 2.0, 1.0];
    let adm_c = [2.0, 0.0, 3.0, 1.0, 0.0, 2.0];
    let dev = |a: &[f64]| a.iter().map(|v| (0.3 * v).round()).collect::<Vec<_>>();
    InstanceBuilder::new(6)
        .location("a", 40.70, -74.00)
        .location("b", 40.75, -73.95)
        .location("c", 40.90, -74.20)
        .bed_type("bed")
        .group("g", "bed", None, los)
        .capacity("bed", "a", 10.0)
        .capacity("bed", "b", 8.0)
        .capacity("bed", "c", 6.0)
        .initial("g", "a", 6.0)
        .initial("g", "b", 2.0)
        .discharges("g", "a", &[2.0, 2.0, 1.0, 1.0, 0.0, 0.0])
        .discharges("g", "b", &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        .admissions("g", "a", &adm_a)
        .admissions("g", "b", &adm_b)
        .admissions("g", "c", &adm_c)
        .deviation("g", "a", &dev(&adm_a), &dev(&adm_a))
        .deviation("g", "b", &dev(&adm_b), &dev(&adm_b))
        .deviation("g", "c", &dev(&adm_c), &dev(&adm_c))
        .build()
        .unwrap()
}

pub const AUDIT_TOL: f64 = 1e-6;

/// Checks the constraint an option adds against the solved plan and
/// returns a description of every violation.
pub fn audit(
    inst: &ProblemInstance,
    built: &BuiltModel,
    sol: &Solution,
    opts: &OperationalOptions,
) -> Vec<String> {
    let mut bad = Vec::new();
    let (n, tl) = (inst.n_locations(), inst.horizon);
    let flows: Vec<(usize, usize, usize, f64)> = built
        .layout
        .transfers
        .iter()
        .map(|tv| (tv.from, tv.to, tv.day, sol.values[tv.var.0]))
        .collect();
    if let Some(cap) = opts.total_transfer_cap {
        let total: f64 = flows.iter().map(|f| f.3).sum();
        if total > cap + AUDIT_TOL {
            bad.push(format!("total transfers {total} above cap {cap}"));
        }
    }
    if let Some(cap) = opts.per_transfer_cap {
        for f in &flows {
            if f.3 > cap + AUDIT_TOL {
                bad.push(format!("transfer {f:?} above cap {cap}"));
            }
        }
    }
    if opts.forbid_new_overflow {
        let moved = occupancy_oracle(inst, &flows);
        let base = occupancy_oracle(inst, &[]);
        for i in 0..n {
            for t in 0..tl {
                // census proper, without the sender's transfer-day count
                let sent: f64 = flows.iter().filter(|f| f.0 == i && f.2 == t).map(|f| f.3).sum();
                let after = moved[i][t] - sent;
                let limit = inst.system.capacity.get(0, i).max(base[i][t]);
                if after > limit + AUDIT_TOL {
                    bad.push(format!("census {after} at ({i},{t}) above {limit}"));
                }
            }
        }
    }
    if let Some(w) = opts.switch_window {
        let mut out = vec![vec![0.0; tl]; n];
        let mut inn = vec![vec![0.0; tl]; n];
        for f in &flows {
            out[f.0][f.2] += f.3;
            inn[f.1][f.2] += f.3;
        }
        for i in 0..n {
            for t in 0..tl {
                for tp in t..=(t + w).min(tl - 1) {
                    if out[i][t] > AUDIT_TOL && inn[i][tp] > AUDIT_TOL {
                        bad.push(format!("location {i} sends on {t} and receives on {tp}"));
                    }
                    if inn[i][t] > AUDIT_TOL && out[i][tp] > AUDIT_TOL {
                        bad.push(format!("location {i} receives on {t} and sends on {tp}"));
                    }
                }
            }
        }
    }
    if let Some(min) = opts.min_transfer {
        let max = opts.per_transfer_cap.unwrap_or(f64::INFINITY);
        for f in &flows {
            let ok = f.3.abs() <= AUDIT_TOL || (f.3 >= min - AUDIT_TOL && f.3 <= max + AUDIT_TOL);
            if !ok {
                bad.push(format!("transfer {f:?} neither zero nor within [{min}, {max})"));
            }
        }
    }
    if opts.smoothing_penalty > 0.0 {
        for i in 0..n {
            for j in 0..n {
                for t in 1..tl {
                    let Some(d) = sol.value(&built.model, &format!("delta[{i},{j},{t}]")) else {
                        continue;
                    };
                    let day = |t: usize| -> f64 {
                        flows.iter().filter(|f| f.0 == i && f.1 == j && f.2 == t).map(|f| f.3).sum()
                    };
                    let expect = (day(t) - day(t - 1)).abs();
                    if (d - expect).abs() > AUDIT_TOL {
                        bad.push(format!("delta[{i},{j},{t}] = {d}, |change| = {expect}"));
                    }
                }
            }
        }
    }
    bad
}

/// Pre-ward for exactly two days, an ICU stay of one or two days with
/// equal odds, then exactly five days on a post-ICU ward.
pub fn care_path(n: usize, horizon: usize) -> InstanceBuilder {
    let mut b = InstanceBuilder::new(horizon)
        .bed_type("ward")
        .bed_type("icu")
        .group("pre", "ward", Some("icu"), LosDistribution::point_mass(2))
        .group("icu", "icu", Some("post"), LosDistribution::from_pmf(vec![0.0, 0.5, 0.5]).unwrap())
        .group("post", "ward", None, LosDistribution::point_mass(5));
    for i in 0..n {
        b = b.location(&format!("h{i}"), 40.0, -74.0 + 0.05 * i as f64);
    }
    b
}
