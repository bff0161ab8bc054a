use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::load::date_of;
use super::records::*;
use super::scenario::{DatasetPaths, GroupConfig, LosConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::evaluation::{Census, MetricsReport, PlanEntry, ResourceEntry, TransferPlan};
use crate::model::LinearModel;
use crate::network::ProblemInstance;
use crate::pipeline::RunOutcome;
use crate::solver::{Solution, Status};

pub const TRANSFERS_HEADER: [&str; 5] = ["group", "from", "to", "date", "amount"];
pub const RESOURCE_HEADER: [&str; 4] = ["from", "to", "date", "amount"];
pub const CENSUS_HEADER: [&str; 4] = ["location_id", "date", "group", "active"];

pub fn transfer_records(inst: &ProblemInstance, plan: &TransferPlan) -> Result<Vec<TransferRecord>> {
    plan.transfers
        .iter()
        .map(|e| {
            Ok(TransferRecord {
                group: inst.groups[e.group].id.clone(),
                from: inst.system.locations[e.from].id.clone(),
                to: inst.system.locations[e.to].id.clone(),
                date: date_of(inst, e.day)?,
                amount: e.amount,
            })
        })
        .collect()
}

pub fn resource_records(inst: &ProblemInstance, moves: &[ResourceEntry]) -> Result<Vec<ResourceTransferRecord>> {
    moves
        .iter()
        .map(|e| {
            Ok(ResourceTransferRecord {
                from: inst.system.locations[e.from].id.clone(),
                to: inst.system.locations[e.to].id.clone(),
                date: date_of(inst, e.day)?,
                amount: e.amount,
            })
        })
        .collect()
}

/// Active patients by location, then day, then group.
pub fn census_records(inst: &ProblemInstance, census: &Census) -> Result<Vec<CensusRecord>> {
    let mut rows = Vec::new();
    for (i, loc) in inst.system.locations.iter().enumerate() {
        for t in 0..inst.horizon {
            let date = date_of(inst, t)?;
            for (g, grp) in inst.groups.iter().enumerate() {
                rows.push(CensusRecord {
                    location_id: loc.id.clone(),
                    date,
                    group: grp.id.clone(),
                    active: census.alpha.get(g, i, t),
                });
            }
        }
    }
    Ok(rows)
}

/// Pretty JSON with a trailing newline; the exact bytes of `metrics.json`.
pub fn metrics_json(metrics: &MetricsReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(metrics)?;
    s.push('\n');
    Ok(s)
}

/// Solver outcome without timings, so equal solves write equal files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub status: Status,
    pub objective: f64,
    pub best_bound: f64,
    pub iterations: usize,
    pub nodes: usize,
    /// Nonzero variables by name.
    pub values: BTreeMap<String, f64>,
}

impl SolutionSummary {
    pub fn new(model: &LinearModel, sol: &Solution) -> Self {
        let values = sol
            .named_values(model)
            .into_iter()
            .filter(|(_, v)| v.abs() > 1e-12)
            .collect();
        SolutionSummary {
            status: sol.status,
            objective: sol.objective,
            best_bound: sol.stats.best_bound,
            iterations: sol.stats.iterations,
            nodes: sol.stats.nodes,
            values,
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `transfers.csv`, `census.csv`, `baseline_census.csv`,
/// `metrics.json` and `solution.json`, plus `resource_transfers.csv` when
/// the plan moves resources. Returns the written paths.
pub fn save_results(
    out_dir: &Path,
    inst: &ProblemInstance,
    model: &LinearModel,
    outcome: &RunOutcome,
) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    let p = out_dir.join("transfers.csv");
    write_rows(&p, &TRANSFERS_HEADER, &transfer_records(inst, &outcome.plan)?)?;
    written.push(p);
    if let Some(moves) = &outcome.plan.resource_transfers {
        let p = out_dir.join("resource_transfers.csv");
        write_rows(&p, &RESOURCE_HEADER, &resource_records(inst, moves)?)?;
        written.push(p);
    }
    let p = out_dir.join("census.csv");
    write_rows(&p, &CENSUS_HEADER, &census_records(inst, &outcome.census)?)?;
    written.push(p);
    let p = out_dir.join("baseline_census.csv");
    write_rows(&p, &CENSUS_HEADER, &census_records(inst, &outcome.baseline_census)?)?;
    written.push(p);
    let p = out_dir.join("metrics.json");
    write_text(&p, &metrics_json(&outcome.metrics)?)?;
    written.push(p);
    let p = out_dir.join("solution.json");
    let mut s = serde_json::to_string_pretty(&SolutionSummary::new(model, &outcome.solution))?;
    s.push('\n');
    write_text(&p, &s)?;
    written.push(p);
    Ok(written)
}

fn index_of<'a>(ids: impl Iterator<Item = &'a str>, id: &str) -> Option<usize> {
    ids.into_iter().position(|x| x == id)
}

/// Reads a `transfers.csv` back into a plan for `inst`. A
/// `resource_transfers.csv` beside it is read as well.
pub fn load_plan(path: &Path, inst: &ProblemInstance) -> Result<TransferPlan> {
    let file = file_label(path);
    let start = inst
        .start_date
        .ok_or_else(|| Error::invalid("instance has no `start_date`"))?;
    let day = |line: u64, d: chrono::NaiveDate| -> Result<usize> {
        let k = (d - start).num_days();
        if k < 0 || k as usize >= inst.horizon {
            return Err(parse_error(&file, line, "date", format!("{d} is outside the scenario window")));
        }
        Ok(k as usize)
    };
    let loc = |line: u64, col: &str, id: &str| -> Result<usize> {
        index_of(inst.system.locations.iter().map(|l| l.id.as_str()), id)
            .ok_or_else(|| parse_error(&file, line, col, format!("unknown location `{id}`")))
    };
    let rows: Vec<Row<TransferRecord>> = read_rows(path, &TRANSFERS_HEADER)?;
    let mut plan = TransferPlan::default();
    for r in &rows {
        let v = &r.value;
        let group = index_of(inst.groups.iter().map(|g| g.id.as_str()), &v.group)
            .ok_or_else(|| parse_error(&file, r.line, "group", format!("unknown group `{}`", v.group)))?;
        plan.transfers.push(PlanEntry {
            group,
            from: loc(r.line, "from", &v.from)?,
            to: loc(r.line, "to", &v.to)?,
            day: day(r.line, v.date)?,
            amount: v.amount,
        });
    }
    let res_path = path.with_file_name("resource_transfers.csv");
    if res_path.is_file() {
        let file = file_label(&res_path);
        let rows: Vec<Row<ResourceTransferRecord>> = read_rows(&res_path, &RESOURCE_HEADER)?;
        let mut moves = Vec::new();
        for r in &rows {
            let v = &r.value;
            let lookup = |col: &str, id: &str| {
                index_of(inst.system.locations.iter().map(|l| l.id.as_str()), id)
                    .ok_or_else(|| parse_error(&file, r.line, col, format!("unknown location `{id}`")))
            };
            let k = (v.date - start).num_days();
            if k < 0 || k as usize >= inst.horizon {
                return Err(parse_error(&file, r.line, "date", "outside the scenario window"));
            }
            moves.push(ResourceEntry {
                from: lookup("from", &v.from)?,
                to: lookup("to", &v.to)?,
                day: k as usize,
                amount: v.amount,
            });
        }
        plan.resource_transfers = Some(moves);
    }
    plan.check(inst)?;
    Ok(plan)
}

/// Writes `inst` as a dataset directory and returns a scenario that loads
/// it back unchanged. Stays are recorded by their day probabilities.
pub fn save_dataset(inst: &ProblemInstance, dir: &Path) -> Result<ScenarioConfig> {
    ensure_dir(dir)?;
    let tl = inst.horizon;
    let locs = &inst.system.locations;
    let start = inst
        .start_date
        .ok_or_else(|| Error::invalid("instance has no `start_date`"))?;

    let rows: Vec<LocationRecord> = locs
        .iter()
        .map(|l| LocationRecord {
            id: l.id.clone(),
            name: Some(l.name.clone()),
            lat: l.latitude,
            lon: l.longitude,
        })
        .collect();
    write_rows(&dir.join("locations.csv"), &["id", "name", "lat", "lon"], &rows)?;

    let mut rows = Vec::new();
    for (b, bed) in inst.system.bed_types.iter().enumerate() {
        for (i, l) in locs.iter().enumerate() {
            rows.push(CapacityRecord {
                location_id: l.id.clone(),
                bed_type: bed.id.clone(),
                beds: inst.system.capacity.get(b, i),
                covid_fraction: Some(1.0),
            });
        }
    }
    write_rows(&dir.join("capacity.csv"), &["location_id", "bed_type", "beds", "covid_fraction"], &rows)?;

    let mut adm = Vec::new();
    let mut dis = Vec::new();
    let mut ini = Vec::new();
    for (g, grp) in inst.groups.iter().enumerate() {
        for (i, l) in locs.iter().enumerate() {
            ini.push(InitialRecord {
                location_id: l.id.clone(),
                group: grp.id.clone(),
                census: inst.initial_census.get(g, i),
            });
            for t in 0..tl {
                let date = date_of(inst, t)?;
                adm.push(AdmissionRecord {
                    location_id: l.id.clone(),
                    date,
                    group: grp.id.clone(),
                    admissions: inst.admissions.get(g, i, t),
                    dev_lower: inst.deviation.as_ref().map(|d| d.lower.get(g, i, t)),
                    dev_upper: inst.deviation.as_ref().map(|d| d.upper.get(g, i, t)),
                });
                dis.push(DischargeRecord {
                    location_id: l.id.clone(),
                    date,
                    group: grp.id.clone(),
                    discharges: inst.initial_discharges.get(g, i, t),
                });
            }
        }
    }
    write_rows(
        &dir.join("admissions.csv"),
        &["location_id", "date", "group", "admissions", "dev_lower", "dev_upper"],
        &adm,
    )?;
    write_rows(&dir.join("discharges.csv"), &["location_id", "date", "group", "discharges"], &dis)?;
    write_rows(&dir.join("initial.csv"), &["location_id", "group", "census"], &ini)?;

    if let Some(supply) = &inst.system.nurse_supply {
        let rows: Vec<NurseRecord> = locs
            .iter()
            .zip(supply)
            .map(|(l, &s)| NurseRecord { location_id: l.id.clone(), nurses: s })
            .collect();
        write_rows(&dir.join("nurses.csv"), &["location_id", "nurses"], &rows)?;
    }
    if let Some(ext) = &inst.external_resource_supply {
        let mut rows = Vec::new();
        for (i, l) in locs.iter().enumerate() {
            for t in 0..tl {
                rows.push(SupplyRecord { location_id: l.id.clone(), date: date_of(inst, t)?, supply: ext.get(i, t) });
            }
        }
        write_rows(&dir.join("external_supply.csv"), &["location_id", "date", "supply"], &rows)?;
    }
    let edges: Vec<EdgeRecord> = inst
        .system
        .adjacency
        .edges()
        .map(|(i, j)| EdgeRecord { from_id: locs[i].id.clone(), to_id: locs[j].id.clone() })
        .collect();
    write_rows(&dir.join("adjacency.csv"), &["from_id", "to_id"], &edges)?;

    let groups = inst
        .groups
        .iter()
        .zip(&inst.los)
        .map(|(g, los)| GroupConfig {
            id: g.id.clone(),
            bed_type: g.bed_type.clone(),
            successor: g.successor.clone(),
            los: LosConfig::Pmf { pmf: los.pmf().to_vec() },
        })
        .collect();
    let nurse_ratio = inst
        .nurse_ratio
        .as_ref()
        .map(|r| {
            inst.system
                .bed_types
                .iter()
                .zip(r)
                .map(|(b, &v)| (b.id.clone(), v))
                .collect()
        })
        .unwrap_or_default();
    Ok(ScenarioConfig {
        dataset: DatasetPaths::in_dir(dir),
        start_date: Some(start),
        end_date: Some(date_of(inst, tl.saturating_sub(1))?),
        group_mode: inst.groups.len() > 1 || inst.groups.iter().any(|g| g.successor.is_some()),
        groups: Some(groups),
        nurse_ratio,
        ..ScenarioConfig::default()
    })
}
