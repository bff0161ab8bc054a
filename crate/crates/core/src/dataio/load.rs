use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::records::*;
use super::scenario::{GroupConfig, LosConfig, ResolvedPaths, ScenarioConfig};
use crate::census::{correct_outliers, estimate_admissions, CensusSeries};
use crate::error::{Error, Result};
use crate::geo::build_adjacency;
use crate::grid::{Table2, Table3};
use crate::los::{remaining_fraction, LosDistribution};
use crate::network::{
    AdjacencyGraph, AdmissionDeviation, BedType, HealthSystem, Location, PatientGroup,
    ProblemInstance,
};
use crate::validate::validate_instance;

/// Fit of the admissions reconstructed for one census series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub location_id: String,
    pub group: String,
    pub residual: f64,
    /// Residual over the norm of the reported series.
    pub relative_residual: f64,
    pub iterations: usize,
    /// Days changed by outlier correction.
    pub corrected_days: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub instance: ProblemInstance,
    pub estimation: Vec<EstimationReport>,
}

/// Share of each bed type set aside for surge patients when the capacity
/// file gives none.
pub fn default_covid_fraction(bed_type: &str) -> f64 {
    match bed_type.to_ascii_lowercase().as_str() {
        "ward" => 0.35,
        "icu" => 0.50,
        _ => 1.0,
    }
}

fn default_los_for(group: &str) -> LosConfig {
    if group.to_ascii_lowercase().contains("icu") {
        LosConfig::icu()
    } else {
        LosConfig::ward()
    }
}

struct Window {
    start: NaiveDate,
    horizon: usize,
}

impl Window {
    fn day(&self, d: NaiveDate) -> Option<usize> {
        let k = (d - self.start).num_days();
        (k >= 0 && (k as usize) < self.horizon).then_some(k as usize)
    }
}

fn non_negative(file: &str, line: u64, column: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(parse_error(file, line, column, format!("must be a non-negative number, got {v}")));
    }
    Ok(())
}

/// Reads the dataset described by `cfg` relative to `base`.
pub fn load_scenario(cfg: &ScenarioConfig, base: &Path) -> Result<LoadedDataset> {
    let paths = cfg.dataset.resolve(base)?;
    load_dataset(&paths, cfg)
}

/// Assembles and validates an instance from dataset files. Admissions are
/// estimated from the census when no admissions file is present.
pub fn load_dataset(paths: &ResolvedPaths, cfg: &ScenarioConfig) -> Result<LoadedDataset> {
    // locations
    let loc_file = file_label(&paths.locations);
    let loc_rows: Vec<Row<LocationRecord>> = read_rows(&paths.locations, &["id", "lat", "lon"])?;
    let mut locations = Vec::new();
    let mut loc_index: HashMap<String, usize> = HashMap::new();
    for r in &loc_rows {
        let v = &r.value;
        if v.id.is_empty() {
            return Err(parse_error(&loc_file, r.line, "id", "empty location id"));
        }
        if loc_index.insert(v.id.clone(), locations.len()).is_some() {
            return Err(parse_error(&loc_file, r.line, "id", format!("duplicate location `{}`", v.id)));
        }
        locations.push(Location {
            id: v.id.clone(),
            name: v.name.clone().filter(|s| !s.is_empty()).unwrap_or_else(|| v.id.clone()),
            latitude: v.lat,
            longitude: v.lon,
        });
    }
    let n = locations.len();
    let lookup = |file: &str, line: u64, column: &str, id: &str| -> Result<usize> {
        loc_index
            .get(id)
            .copied()
            .ok_or_else(|| parse_error(file, line, column, format!("unknown location `{id}`")))
    };

    // capacity and bed types
    let cap_file = file_label(&paths.capacity);
    let cap_rows: Vec<Row<CapacityRecord>> =
        read_rows(&paths.capacity, &["location_id", "bed_type", "beds"])?;
    let mut bed_types: Vec<BedType> = Vec::new();
    let mut cap_entries = Vec::new();
    for r in &cap_rows {
        let v = &r.value;
        let i = lookup(&cap_file, r.line, "location_id", &v.location_id)?;
        non_negative(&cap_file, r.line, "beds", v.beds)?;
        let frac = v.covid_fraction.unwrap_or_else(|| default_covid_fraction(&v.bed_type));
        if !(0.0..=1.0).contains(&frac) {
            return Err(parse_error(&cap_file, r.line, "covid_fraction", format!("must lie in [0, 1], got {frac}")));
        }
        let b = match bed_types.iter().position(|b| b.id == v.bed_type) {
            Some(b) => b,
            None => {
                bed_types.push(BedType { id: v.bed_type.clone(), description: String::new() });
                bed_types.len() - 1
            }
        };
        if cap_entries.iter().any(|&(bb, ii, _, _)| bb == b && ii == i) {
            return Err(parse_error(
                &cap_file,
                r.line,
                "bed_type",
                format!("duplicate capacity for `{}` at `{}`", v.bed_type, v.location_id),
            ));
        }
        cap_entries.push((b, i, v.beds * frac, r.line));
    }
    let mut capacity = Table2::zeros(bed_types.len(), n);
    for &(b, i, beds, _) in &cap_entries {
        capacity.set(b, i, beds);
    }

    let adm_rows: Option<Vec<Row<AdmissionRecord>>> = paths
        .admissions
        .as_ref()
        .map(|p| read_rows(p, &["location_id", "date", "group", "admissions"]))
        .transpose()?;
    let census_rows: Option<Vec<Row<CensusRecord>>> = paths
        .census
        .as_ref()
        .map(|p| read_rows(p, &["location_id", "date", "group", "active"]))
        .transpose()?;

    // date window
    let dates: Vec<NaiveDate> = match (&adm_rows, &census_rows) {
        (Some(a), _) => a.iter().map(|r| r.value.date).collect(),
        (None, Some(c)) => c.iter().map(|r| r.value.date).collect(),
        (None, None) => Vec::new(),
    };
    let start = cfg.start_date.or_else(|| dates.iter().min().copied());
    let end = cfg.end_date.or_else(|| dates.iter().max().copied());
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::invalid("dataset has no dated rows; set `start_date` and `end_date`"));
    };
    if start > end {
        return Err(Error::invalid(format!("`start_date` {start} is after `end_date` {end}")));
    }
    let win = Window { start, horizon: (end - start).num_days() as usize + 1 };
    let tl = win.horizon;

    // groups
    let group_cfgs: Vec<GroupConfig> = match &cfg.groups {
        Some(g) => g.clone(),
        None => {
            let mut ids: Vec<String> = Vec::new();
            let seen = adm_rows
                .iter()
                .flatten()
                .map(|r| &r.value.group)
                .chain(census_rows.iter().flatten().map(|r| &r.value.group));
            for g in seen {
                if !ids.contains(g) {
                    ids.push(g.clone());
                }
            }
            ids.into_iter()
                .map(|id| {
                    let bed = if bed_types.iter().any(|b| b.id == id) {
                        id.clone()
                    } else if bed_types.len() == 1 {
                        bed_types[0].id.clone()
                    } else {
                        return Err(Error::invalid(format!(
                            "group `{id}` has no matching bed type; describe it under `groups`"
                        )));
                    };
                    Ok(GroupConfig { los: default_los_for(&id), id, bed_type: bed, successor: None })
                })
                .collect::<Result<_>>()?
        }
    };
    if group_cfgs.is_empty() {
        return Err(Error::invalid("dataset defines no patient groups"));
    }
    if !cfg.group_mode {
        if group_cfgs.len() != 1 {
            return Err(Error::invalid(format!(
                "found {} patient groups; set `group_mode` to model care paths",
                group_cfgs.len()
            )));
        }
        if group_cfgs[0].successor.is_some() {
            return Err(Error::invalid("a group `successor` requires `group_mode`"));
        }
    }
    let ng = group_cfgs.len();
    let los: Vec<LosDistribution> = group_cfgs
        .iter()
        .map(|g| {
            g.los
                .distribution()
                .map_err(|e| Error::invalid(format!("group `{}` los: {e}", g.id)))
        })
        .collect::<Result<_>>()?;
    let groups: Vec<PatientGroup> = group_cfgs
        .iter()
        .map(|g| PatientGroup {
            id: g.id.clone(),
            bed_type: g.bed_type.clone(),
            successor: g.successor.clone(),
        })
        .collect();
    let group_of = |file: &str, line: u64, id: &str| -> Result<usize> {
        groups
            .iter()
            .position(|g| g.id == id)
            .ok_or_else(|| parse_error(file, line, "group", format!("unknown group `{id}`")))
    };

    let mut admissions = Table3::zeros(ng, n, tl);
    let mut deviation: Option<AdmissionDeviation> = None;
    let mut initial = Table2::zeros(ng, n);
    let mut discharges = Table3::zeros(ng, n, tl);
    let mut have_discharges = false;
    let mut estimation = Vec::new();

    // census by (group, location): window days plus the day before
    let mut census: BTreeMap<(usize, usize), Vec<Option<f64>>> = BTreeMap::new();
    if let (Some(rows), Some(path)) = (&census_rows, &paths.census) {
        let file = file_label(path);
        for r in rows {
            let v = &r.value;
            let i = lookup(&file, r.line, "location_id", &v.location_id)?;
            let g = group_of(&file, r.line, &v.group)?;
            non_negative(&file, r.line, "active", v.active)?;
            let k = (v.date - start).num_days() + 1;
            if k < 0 || k as usize > tl {
                continue;
            }
            let slot = &mut census.entry((g, i)).or_insert_with(|| vec![None; tl + 1])[k as usize];
            if slot.is_some() {
                return Err(parse_error(&file, r.line, "date", "duplicate census row"));
            }
            *slot = Some(v.active);
        }
    }

    if let (Some(rows), Some(path)) = (&adm_rows, &paths.admissions) {
        let file = file_label(path);
        let mut seen = vec![false; ng * n * tl];
        let mut lower = Table3::zeros(ng, n, tl);
        let mut upper = Table3::zeros(ng, n, tl);
        let mut any_dev = false;
        for r in rows {
            let v = &r.value;
            let i = lookup(&file, r.line, "location_id", &v.location_id)?;
            let g = group_of(&file, r.line, &v.group)?;
            non_negative(&file, r.line, "admissions", v.admissions)?;
            let Some(t) = win.day(v.date) else { continue };
            let k = (g * n + i) * tl + t;
            if seen[k] {
                return Err(parse_error(&file, r.line, "date", "duplicate admissions row"));
            }
            seen[k] = true;
            admissions.set(g, i, t, v.admissions);
            for (col, val, table) in [("dev_lower", v.dev_lower, &mut lower), ("dev_upper", v.dev_upper, &mut upper)] {
                if let Some(d) = val {
                    non_negative(&file, r.line, col, d)?;
                    table.set(g, i, t, d);
                    any_dev = true;
                }
            }
        }
        if any_dev {
            deviation = Some(AdmissionDeviation { lower, upper });
        }
        // census the day before the window gives the starting state
        for (&(g, i), series) in &census {
            if let Some(p0) = series[0] {
                initial.set(g, i, p0);
            }
        }
    } else {
        if ng != 1 {
            return Err(Error::invalid(
                "estimating admissions from census supports one patient group; provide `admissions.csv`",
            ));
        }
        let file = paths.census.as_ref().map(|p| file_label(p)).unwrap_or_default();
        for i in 0..n {
            let raw = census.get(&(0, i)).map(|s| &s[1..]);
            let Some(raw) = raw.filter(|s| s.iter().any(Option::is_some)) else {
                continue;
            };
            // gaps carry the previous report forward
            let mut last = raw.iter().flatten().next().copied().unwrap_or(0.0);
            let values: Vec<f64> = raw
                .iter()
                .map(|v| {
                    if let Some(x) = v {
                        last = *x;
                    }
                    last
                })
                .collect();
            let mut series = CensusSeries::new(locations[i].id.clone(), values.clone());
            let mut corrected_days = 0;
            if cfg.estimation.outlier_correction {
                series = correct_outliers(&series, cfg.estimation.window, cfg.estimation.k)
                    .map_err(|e| Error::invalid(format!("{file}: {e}")))?;
                corrected_days = series.values.iter().zip(&values).filter(|(a, b)| a != b).count();
            }
            let seed = cfg.seed.wrapping_add(i as u64);
            let est = estimate_admissions(&series, &los[0], cfg.estimation.iterations, seed)?;
            admissions.series_mut(0, i).copy_from_slice(&est.admissions);
            discharges.series_mut(0, i).copy_from_slice(&est.initial_discharges);
            initial.set(0, i, est.initial_census);
            let norm = series.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            estimation.push(EstimationReport {
                location_id: locations[i].id.clone(),
                group: groups[0].id.clone(),
                residual: est.residual,
                relative_residual: if norm > 0.0 { est.residual / norm } else { 0.0 },
                iterations: est.iterations,
                corrected_days,
            });
        }
        have_discharges = true;
    }

    if let Some(path) = &paths.initial {
        let file = file_label(path);
        let rows: Vec<Row<InitialRecord>> = read_rows(path, &["location_id", "group", "census"])?;
        for r in &rows {
            let v = &r.value;
            let i = lookup(&file, r.line, "location_id", &v.location_id)?;
            let g = group_of(&file, r.line, &v.group)?;
            non_negative(&file, r.line, "census", v.census)?;
            initial.set(g, i, v.census);
        }
    }

    if let Some(path) = &paths.discharges {
        let file = file_label(path);
        let rows: Vec<Row<DischargeRecord>> =
            read_rows(path, &["location_id", "date", "group", "discharges"])?;
        discharges = Table3::zeros(ng, n, tl);
        for r in &rows {
            let v = &r.value;
            let i = lookup(&file, r.line, "location_id", &v.location_id)?;
            let g = group_of(&file, r.line, &v.group)?;
            non_negative(&file, r.line, "discharges", v.discharges)?;
            if let Some(t) = win.day(v.date) {
                discharges.set(g, i, t, v.discharges);
            }
        }
        have_discharges = true;
    }
    if !have_discharges {
        // initial patients are taken as admitted the day before the window
        for g in 0..ng {
            for i in 0..n {
                let p0 = initial.get(g, i);
                for t in 0..tl {
                    let d = remaining_fraction(&los[g], t) - remaining_fraction(&los[g], t + 1);
                    discharges.set(g, i, t, p0 * d);
                }
            }
        }
    }

    if deviation.is_none() {
        if let Some(f) = cfg.robust.as_ref().and_then(|r| r.deviation_fraction) {
            let mut dev = Table3::zeros(ng, n, tl);
            for (d, a) in dev.values_mut().iter_mut().zip(admissions.values()) {
                *d = f * a;
            }
            deviation = Some(AdmissionDeviation { lower: dev.clone(), upper: dev });
        }
    }

    let nurse_supply = match &paths.nurses {
        None => None,
        Some(path) => {
            let file = file_label(path);
            let rows: Vec<Row<NurseRecord>> = read_rows(path, &["location_id", "nurses"])?;
            let mut v = vec![0.0; n];
            for r in &rows {
                let i = lookup(&file, r.line, "location_id", &r.value.location_id)?;
                non_negative(&file, r.line, "nurses", r.value.nurses)?;
                v[i] = r.value.nurses;
            }
            Some(v)
        }
    };
    let nurse_ratio = if cfg.nurse_ratio.is_empty() {
        None
    } else {
        let mut v = vec![0.0; bed_types.len()];
        for (bed, ratio) in &cfg.nurse_ratio {
            let b = bed_types
                .iter()
                .position(|b| &b.id == bed)
                .ok_or_else(|| Error::invalid(format!("`nurse_ratio` names unknown bed type `{bed}`")))?;
            v[b] = *ratio;
        }
        Some(v)
    };
    let external_resource_supply = match &paths.external_supply {
        None => None,
        Some(path) => {
            let file = file_label(path);
            let rows: Vec<Row<SupplyRecord>> = read_rows(path, &["location_id", "date", "supply"])?;
            let mut t = Table2::zeros(n, tl);
            for r in &rows {
                let i = lookup(&file, r.line, "location_id", &r.value.location_id)?;
                non_negative(&file, r.line, "supply", r.value.supply)?;
                if let Some(d) = win.day(r.value.date) {
                    t.set(i, d, r.value.supply);
                }
            }
            Some(t)
        }
    };

    let adjacency = if let Some(path) = &paths.adjacency {
        let file = file_label(path);
        let rows: Vec<Row<EdgeRecord>> = read_rows(path, &["from_id", "to_id"])?;
        let mut m = vec![vec![false; n]; n];
        for r in &rows {
            let i = lookup(&file, r.line, "from_id", &r.value.from_id)?;
            let j = lookup(&file, r.line, "to_id", &r.value.to_id)?;
            m[i][j] = true;
        }
        let symmetric = (0..n).all(|i| (0..n).all(|j| m[i][j] == m[j][i]));
        AdjacencyGraph::from_matrix(m, !symmetric)
    } else if let Some(d) = cfg.max_distance_km {
        build_adjacency(&locations, d)
    } else {
        AdjacencyGraph::complete(n)
    };

    let instance = ProblemInstance {
        system: HealthSystem {
            locations,
            bed_types,
            capacity,
            adjacency,
            nurse_supply,
        },
        horizon: tl,
        groups,
        admissions,
        deviation,
        initial_census: initial,
        initial_discharges: discharges,
        los,
        nurse_ratio,
        external_resource_supply,
        start_date: Some(start),
    };
    let report = validate_instance(&instance);
    if !report.ok {
        return Err(Error::Validation(report));
    }
    Ok(LoadedDataset { instance, estimation })
}

/// Calendar date of day `t` of an instance.
pub(crate) fn date_of(inst: &ProblemInstance, t: usize) -> Result<NaiveDate> {
    let start = inst
        .start_date
        .ok_or_else(|| Error::invalid("instance has no `start_date`"))?;
    Ok(start + Duration::days(t as i64))
}
