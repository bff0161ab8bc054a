//! Dataset files, scenario configuration and result bundles.
//!
//! A dataset is a directory of CSV files with a header row, UTF-8 text and
//! ISO-8601 dates:
//!
//! | file | columns |
//! |---|---|
//! | `locations.csv` | `id,name,lat,lon` |
//! | `capacity.csv` | `location_id,bed_type,beds[,covid_fraction]` |
//! | `admissions.csv` | `location_id,date,group,admissions[,dev_lower,dev_upper]` |
//! | `census.csv` | `location_id,date,group,active` |
//! | `nurses.csv` | `location_id,nurses` |
//! | `initial.csv` | `location_id,group,census` |
//! | `discharges.csv` | `location_id,date,group,discharges` |
//! | `adjacency.csv` | `from_id,to_id` |
//! | `external_supply.csv` | `location_id,date,supply` |
//!
//! Only locations, capacity and one of admissions or census are required.

mod load;
mod records;
mod results;
mod scenario;

use std::path::Path;

pub use load::{default_covid_fraction, load_dataset, load_scenario, EstimationReport, LoadedDataset};
pub use records::{
    AdmissionRecord, CapacityRecord, CensusRecord, DischargeRecord, EdgeRecord, InitialRecord,
    LocationRecord, NurseRecord, ResourceTransferRecord, SupplyRecord, TransferRecord,
};
pub(crate) use records::{read_rows, write_rows, Row};
pub use results::{
    CENSUS_HEADER, RESOURCE_HEADER, TRANSFERS_HEADER,
    census_records, load_plan, metrics_json, resource_records, save_dataset, save_results,
    transfer_records, SolutionSummary,
};
pub use scenario::{
    DatasetPaths, EstimationConfig, GroupConfig, LosConfig, ResolvedPaths, RobustSettings,
    ScenarioConfig,
};

use crate::error::{Error, Result};
use crate::model::{BuiltModel, SolveRequest};
use crate::pipeline::{run_request, RunOutcome};
use crate::solver::EmbeddedSolver;

/// Loads the scenario's dataset and turns it into a solve request.
pub fn prepare_request(cfg: &ScenarioConfig, base: &Path) -> Result<(SolveRequest, Vec<EstimationReport>)> {
    cfg.check()?;
    let loaded = load_scenario(cfg, base)?;
    let req = cfg.request(loaded.instance);
    if req.robust.enabled && req.instance.deviation.is_none() {
        return Err(Error::invalid(
            "robust model requires admission `deviation` bounds: add `dev_lower`/`dev_upper` \
             columns to admissions.csv or set `robust.deviation_fraction`",
        ));
    }
    if req.robust.enabled {
        req.robust.check(&req.instance)?;
    }
    Ok((req, loaded.estimation))
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub request: SolveRequest,
    pub built: BuiltModel,
    pub outcome: RunOutcome,
    pub estimation: Vec<EstimationReport>,
}

/// Loads, builds, solves with the embedded solver and scores a scenario.
pub fn run_scenario(cfg: &ScenarioConfig, base: &Path) -> Result<ScenarioRun> {
    let (request, estimation) = prepare_request(cfg, base)?;
    let backend = EmbeddedSolver::new(cfg.solver.clone());
    let (built, outcome) = run_request(&request, &backend, &cfg.metrics)?;
    Ok(ScenarioRun {
        request,
        built,
        outcome,
        estimation,
    })
}
