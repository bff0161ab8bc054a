//! Structural checks on a [`ProblemInstance`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
    /// Dotted path to the offending field, e.g. `initial_discharges[covid,h1]`.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn summary(&self) -> String {
        let errs: Vec<String> = self
            .errors()
            .map(|i| format!("{}: {}", i.path, i.message))
            .collect();
        if errs.is_empty() {
            "ok".to_string()
        } else {
            errs.join("; ")
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}

struct Collector {
    issues: Vec<Issue>,
}

impl Collector {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            message: message.into(),
            path: path.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            message: message.into(),
            path: path.into(),
        });
    }
}

fn bad(x: f64) -> bool {
    !x.is_finite() || x < 0.0
}

const SLACK: f64 = 1e-9;

/// Reports every violated invariant. Never fails; `ok` is true iff there
/// are no error-severity issues.
pub fn validate_instance(inst: &ProblemInstance) -> ValidationReport {
    let mut c = Collector { issues: Vec::new() };
    let sys = &inst.system;
    let n = sys.locations.len();
    let nb = sys.bed_types.len();
    let ng = inst.groups.len();
    let t_len = inst.horizon;

    if n == 0 {
        c.error("system.locations", "at least one location is required");
    }
    if t_len < 1 {
        c.error("horizon", "horizon must be at least one day");
    }

    let mut seen = HashSet::new();
    for (i, loc) in sys.locations.iter().enumerate() {
        if !seen.insert(loc.id.as_str()) {
            c.error(format!("system.locations[{i}].id"), format!("duplicate location id `{}`", loc.id));
        }
        if !(-90.0..=90.0).contains(&loc.latitude) {
            c.error(format!("system.locations[{i}].latitude"), "latitude outside [-90, 90]");
        }
        if !(-180.0..=180.0).contains(&loc.longitude) {
            c.error(format!("system.locations[{i}].longitude"), "longitude outside [-180, 180]");
        }
    }

    let mut seen = HashSet::new();
    for (b, bt) in sys.bed_types.iter().enumerate() {
        if !seen.insert(bt.id.as_str()) {
            c.error(format!("system.bed_types[{b}].id"), format!("duplicate bed type `{}`", bt.id));
        }
    }

    if sys.capacity.dims() != (nb, n) {
        c.error(
            "system.capacity",
            format!("expected {nb}x{n} (bed types x locations), got {:?}", sys.capacity.dims()),
        );
    } else {
        for b in 0..nb {
            for i in 0..n {
                if bad(sys.capacity.get(b, i)) {
                    c.error(
                        format!("system.capacity[{},{}]", sys.bed_types[b].id, sys.locations[i].id),
                        "capacity must be a non-negative number",
                    );
                }
            }
        }
    }

    let adj = &sys.adjacency;
    if adj.len() != n {
        c.error("system.adjacency", format!("dimension {} does not match {n} locations", adj.len()));
    } else {
        for i in 0..n {
            if adj.allows(i, i) {
                c.error(format!("system.adjacency[{i},{i}]"), "self transfers are not allowed");
            }
            if !adj.is_directed() {
                for j in (i + 1)..n {
                    if adj.allows(i, j) != adj.allows(j, i) {
                        c.error(format!("system.adjacency[{i},{j}]"), "undirected graph is not symmetric");
                    }
                }
            }
        }
    }

    if let Some(supply) = &sys.nurse_supply {
        if supply.len() != n {
            c.error("system.nurse_supply", format!("expected {n} entries, got {}", supply.len()));
        } else if let Some(i) = supply.iter().position(|&v| bad(v)) {
            c.error(format!("system.nurse_supply[{}]", sys.locations[i].id), "supply must be non-negative");
        }
    }

    // groups and the care-path forest
    let mut seen = HashSet::new();
    for (g, grp) in inst.groups.iter().enumerate() {
        if !seen.insert(grp.id.as_str()) {
            c.error(format!("groups[{g}].id"), format!("duplicate group id `{}`", grp.id));
        }
        if sys.bed_type_index(&grp.bed_type).is_none() {
            c.error(format!("groups[{g}].bed_type"), format!("unknown bed type `{}`", grp.bed_type));
        }
        if let Some(s) = &grp.successor {
            if inst.group_index(s).is_none() {
                c.error(format!("groups[{g}].successor"), format!("unknown successor group `{s}`"));
            } else if s == &grp.id {
                c.error(format!("groups[{g}].successor"), "group graph not an in-forest");
            }
        }
    }
    if ng == 0 {
        c.error("groups", "at least one patient group is required");
    }
    let forest = inst.topological_groups().is_some();
    if !forest && !c.issues.iter().any(|i| i.message == "group graph not an in-forest") {
        c.error("groups", "group graph not an in-forest");
    }

    if inst.los.len() != ng {
        c.error("los", format!("expected one distribution per group ({ng}), got {}", inst.los.len()));
    }

    let dims3 = (ng, n, t_len);
    let check3 = |c: &mut Collector, name: &str, table: &crate::grid::Table3| -> bool {
        if table.dims() != dims3 {
            c.error(name, format!("expected dimensions {dims3:?}, got {:?}", table.dims()));
            return false;
        }
        true
    };

    let adm_ok = check3(&mut c, "admissions", &inst.admissions);
    let dis_ok = check3(&mut c, "initial_discharges", &inst.initial_discharges);
    let init_ok = inst.initial_census.dims() == (ng, n);
    if !init_ok {
        c.error(
            "initial_census",
            format!("expected dimensions {:?}, got {:?}", (ng, n), inst.initial_census.dims()),
        );
    }

    let gid = |g: usize| inst.groups.get(g).map(|x| x.id.as_str()).unwrap_or("?");
    let lid = |i: usize| sys.locations.get(i).map(|x| x.id.as_str()).unwrap_or("?");

    if adm_ok {
        for g in 0..ng {
            let entry = forest && inst.is_entry_group(g);
            for i in 0..n {
                for (t, &v) in inst.admissions.series(g, i).iter().enumerate() {
                    if bad(v) {
                        c.error(format!("admissions[{},{},{t}]", gid(g), lid(i)), "admissions must be non-negative");
                    } else if v > 0.0 && forest && !entry {
                        c.error(
                            format!("admissions[{},{},{t}]", gid(g), lid(i)),
                            "admissions are only allowed for groups without a predecessor",
                        );
                    }
                }
            }
        }
    }

    if let Some(dev) = &inst.deviation {
        let lo_ok = check3(&mut c, "deviation.lower", &dev.lower);
        let hi_ok = check3(&mut c, "deviation.upper", &dev.upper);
        if lo_ok && hi_ok && adm_ok {
            for g in 0..ng {
                for i in 0..n {
                    for t in 0..t_len {
                        let (lo, hi) = (dev.lower.get(g, i, t), dev.upper.get(g, i, t));
                        let path = format!("[{},{},{t}]", gid(g), lid(i));
                        if bad(lo) || bad(hi) {
                            c.error(format!("deviation{path}"), "deviation bounds must be non-negative");
                        } else if lo > inst.admissions.get(g, i, t) + SLACK {
                            c.error(format!("deviation.lower{path}"), "lower deviation exceeds nominal admissions");
                        }
                    }
                }
            }
        }
    }

    if init_ok && dis_ok {
        for g in 0..ng {
            for i in 0..n {
                let p0 = inst.initial_census.get(g, i);
                if bad(p0) {
                    c.error(format!("initial_census[{},{}]", gid(g), lid(i)), "initial census must be non-negative");
                    continue;
                }
                let d = inst.initial_discharges.series(g, i);
                if d.iter().any(|&v| bad(v)) {
                    c.error(
                        format!("initial_discharges[{},{}]", gid(g), lid(i)),
                        "discharges must be non-negative",
                    );
                }
                let total: f64 = d.iter().sum();
                if total > p0 + 1e-6 {
                    c.error(
                        format!("initial_discharges[{},{}]", gid(g), lid(i)),
                        format!(
                            "cumulative discharges {total} exceed initial census {p0} for group `{}` at location `{}`",
                            gid(g),
                            lid(i)
                        ),
                    );
                }
            }
        }
    }

    if let Some(ratio) = &inst.nurse_ratio {
        if ratio.len() != nb {
            c.error("nurse_ratio", format!("expected {nb} entries, got {}", ratio.len()));
        } else if ratio.iter().any(|&v| bad(v)) {
            c.error("nurse_ratio", "ratios must be non-negative");
        }
    }
    if let Some(ext) = &inst.external_resource_supply {
        if ext.dims() != (n, t_len) {
            c.error("external_resource_supply", format!("expected dimensions {:?}", (n, t_len)));
        } else if ext.values().iter().any(|&v| bad(v)) {
            c.error("external_resource_supply", "supply must be non-negative");
        }
    }

    if adm_ok && inst.admissions.sum() == 0.0 && inst.total_initial_census() == 0.0 {
        c.warn("admissions", "instance has no patients");
    }

    let ok = !c.issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues: c.issues }
}
