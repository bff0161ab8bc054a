use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::MetricsOptions;
use crate::los::{discretize_weibull, LosDistribution, DEFAULT_LOS_HORIZON};
use crate::model::{ObjectiveKind, OperationalOptions, Preset, RobustConfig, SolveRequest};
use crate::solver::SolverSettings;

/// Dataset file locations. Unset entries default to the schema file name
/// inside `dir`; relative paths resolve against the scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetPaths {
    pub dir: Option<PathBuf>,
    pub locations: Option<PathBuf>,
    pub capacity: Option<PathBuf>,
    pub census: Option<PathBuf>,
    pub admissions: Option<PathBuf>,
    pub nurses: Option<PathBuf>,
    pub initial: Option<PathBuf>,
    pub discharges: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub external_supply: Option<PathBuf>,
}

/// Resolved dataset files; `None` for optional files that do not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPaths {
    pub locations: PathBuf,
    pub capacity: PathBuf,
    pub census: Option<PathBuf>,
    pub admissions: Option<PathBuf>,
    pub nurses: Option<PathBuf>,
    pub initial: Option<PathBuf>,
    pub discharges: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub external_supply: Option<PathBuf>,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        DatasetPaths {
            dir: Some(dir.into()),
            ..Default::default()
        }
    }

    /// Explicitly named files must exist; default names are optional
    /// except locations and capacity.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedPaths> {
        let dir = match &self.dir {
            Some(d) if d.is_absolute() => d.clone(),
            Some(d) => base.join(d),
            None => base.to_path_buf(),
        };
        let pick = |explicit: &Option<PathBuf>, default: &str, required: bool| -> Result<Option<PathBuf>> {
            match explicit {
                Some(p) => {
                    let p = if p.is_absolute() { p.clone() } else { base.join(p) };
                    if !p.is_file() {
                        return Err(Error::io(
                            &p,
                            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                        ));
                    }
                    Ok(Some(p))
                }
                None => {
                    let p = dir.join(default);
                    if p.is_file() {
                        Ok(Some(p))
                    } else if required {
                        Err(Error::io(
                            &p,
                            std::io::Error::new(std::io::ErrorKind::NotFound, "required dataset file not found"),
                        ))
                    } else {
                        Ok(None)
                    }
                }
            }
        };
        let out = ResolvedPaths {
            locations: pick(&self.locations, "locations.csv", true)?.expect("required"),
            capacity: pick(&self.capacity, "capacity.csv", true)?.expect("required"),
            census: pick(&self.census, "census.csv", false)?,
            admissions: pick(&self.admissions, "admissions.csv", false)?,
            nurses: pick(&self.nurses, "nurses.csv", false)?,
            initial: pick(&self.initial, "initial.csv", false)?,
            discharges: pick(&self.discharges, "discharges.csv", false)?,
            adjacency: pick(&self.adjacency, "adjacency.csv", false)?,
            external_supply: pick(&self.external_supply, "external_supply.csv", false)?,
        };
        if out.census.is_none() && out.admissions.is_none() {
            return Err(Error::invalid(format!(
                "dataset in {} needs `admissions.csv` or `census.csv`",
                dir.display()
            )));
        }
        Ok(out)
    }
}

/// Length-of-stay law of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LosConfig {
    Weibull {
        lambda: f64,
        k: f64,
        #[serde(default = "default_los_horizon")]
        horizon: usize,
    },
    PointMass {
        days: usize,
    },
    Pmf {
        pmf: Vec<f64>,
    },
}

fn default_los_horizon() -> usize {
    DEFAULT_LOS_HORIZON
}

impl LosConfig {
    pub fn ward() -> Self {
        LosConfig::Weibull { lambda: 12.88, k: 1.38, horizon: DEFAULT_LOS_HORIZON }
    }

    pub fn icu() -> Self {
        LosConfig::Weibull { lambda: 13.32, k: 1.58, horizon: DEFAULT_LOS_HORIZON }
    }

    pub fn distribution(&self) -> Result<LosDistribution> {
        match self {
            LosConfig::Weibull { lambda, k, horizon } => discretize_weibull(*lambda, *k, *horizon),
            LosConfig::PointMass { days } => Ok(LosDistribution::point_mass(*days)),
            LosConfig::Pmf { pmf } => LosDistribution::from_pmf(pmf.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub id: String,
    pub bed_type: String,
    #[serde(default)]
    pub successor: Option<String>,
    pub los: LosConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub iterations: usize,
    pub outlier_correction: bool,
    pub window: usize,
    pub k: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            iterations: 20_000,
            outlier_correction: true,
            window: 5,
            k: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustSettings {
    pub gamma: f64,
    /// Symmetric deviation as a share of nominal admissions, used when the
    /// admissions file has no deviation columns.
    pub deviation_fraction: Option<f64>,
}

/// A complete, self-describing run. Serialised as one JSON document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub dataset: DatasetPaths,
    /// Inclusive. Default to the first and last date in the data.
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub objective: ObjectiveKind,
    /// Starting point for `options`; explicit options win field by field
    /// only when `options` is given in full.
    pub preset: Option<Preset>,
    pub options: Option<OperationalOptions>,
    pub robust: Option<RobustSettings>,
    /// Multi-group care paths; otherwise exactly one group is allowed.
    pub group_mode: bool,
    pub groups: Option<Vec<GroupConfig>>,
    /// Nurse-days per patient-day by bed type.
    pub nurse_ratio: BTreeMap<String, f64>,
    pub include_resources: bool,
    /// Locations farther apart than this cannot exchange patients.
    pub max_distance_km: Option<f64>,
    pub solver: SolverSettings,
    pub seed: u64,
    pub estimation: EstimationConfig,
    pub metrics: MetricsOptions,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a scenario file; returns it with the directory relative paths
    /// resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::invalid(format!("{}: {j}", path.display())),
            other => other,
        })?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, base))
    }

    pub fn check(&self) -> Result<()> {
        if let (Some(s), Some(e)) = (self.start_date, self.end_date) {
            if s > e {
                return Err(Error::invalid(format!(
                    "`start_date` {s} is after `end_date` {e}"
                )));
            }
        }
        if let Some(r) = &self.robust {
            if !(r.gamma >= 0.0 && r.gamma.is_finite()) {
                return Err(Error::invalid(format!("`gamma` must be non-negative, got {}", r.gamma)));
            }
            if let Some(f) = r.deviation_fraction {
                if !(f >= 0.0 && f.is_finite()) {
                    return Err(Error::invalid("`deviation_fraction` must be non-negative"));
                }
            }
        }
        if let Some(d) = self.max_distance_km {
            if !(d >= 0.0) {
                return Err(Error::invalid("`max_distance_km` must be non-negative"));
            }
        }
        if self.estimation.iterations == 0 {
            return Err(Error::invalid("`estimation.iterations` must be positive"));
        }
        self.objective.check()?;
        self.operational_options().check()?;
        Ok(())
    }

    /// Replaces top-level fields with those present in `overrides`, a JSON
    /// object in the same shape as the scenario file.
    pub fn with_overrides(&self, overrides: &serde_json::Value) -> Result<Self> {
        let serde_json::Value::Object(over) = overrides else {
            return Err(Error::invalid("overrides must be a JSON object"));
        };
        let mut base = serde_json::to_value(self)?;
        let obj = base.as_object_mut().expect("struct serialises to an object");
        for (k, v) in over {
            obj.insert(k.clone(), v.clone());
        }
        let cfg: ScenarioConfig = serde_json::from_value(base)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn operational_options(&self) -> OperationalOptions {
        match (&self.options, self.preset) {
            (Some(o), _) => o.clone(),
            (None, Some(p)) => p.options(),
            (None, None) => OperationalOptions::default(),
        }
    }

    pub fn robust_config(&self) -> RobustConfig {
        match &self.robust {
            Some(r) => RobustConfig::with_gamma(r.gamma),
            None => RobustConfig::default(),
        }
    }

    /// Solver settings and request for an instance loaded from this
    /// scenario.
    pub fn request(&self, instance: crate::network::ProblemInstance) -> SolveRequest {
        SolveRequest {
            instance,
            objective: self.objective,
            options: self.operational_options(),
            robust: self.robust_config(),
            include_resources: self.include_resources,
        }
    }
}
