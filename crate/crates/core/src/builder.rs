//! Incremental construction of [`ProblemInstance`] values by id.

use crate::error::{Error, Result};
use crate::grid::{Table2, Table3};
use crate::los::LosDistribution;
use crate::network::{
    AdjacencyGraph, AdmissionDeviation, BedType, HealthSystem, Location, PatientGroup,
    ProblemInstance,
};
use crate::validate::validate_instance;

#[derive(Debug, Clone)]
enum Edges {
    Complete,
    Empty,
    Explicit(AdjacencyGraph),
}

#[derive(Debug, Clone)]
pub struct InstanceBuilder {
    horizon: usize,
    locations: Vec<Location>,
    bed_types: Vec<BedType>,
    groups: Vec<(PatientGroup, LosDistribution)>,
    capacity: Vec<(String, String, f64)>,
    admissions: Vec<(String, String, Vec<f64>)>,
    deviation: Vec<(String, String, Vec<f64>, Vec<f64>)>,
    initial: Vec<(String, String, f64)>,
    discharges: Vec<(String, String, Vec<f64>)>,
    nurses: Vec<(String, f64)>,
    nurse_ratio: Vec<(String, f64)>,
    external: Vec<(String, Vec<f64>)>,
    edges: Edges,
    start_date: Option<chrono::NaiveDate>,
}

impl InstanceBuilder {
    pub fn new(horizon: usize) -> Self {
        InstanceBuilder {
            horizon,
            locations: Vec::new(),
            bed_types: Vec::new(),
            groups: Vec::new(),
            capacity: Vec::new(),
            admissions: Vec::new(),
            deviation: Vec::new(),
            initial: Vec::new(),
            discharges: Vec::new(),
            nurses: Vec::new(),
            nurse_ratio: Vec::new(),
            external: Vec::new(),
            edges: Edges::Complete,
            start_date: None,
        }
    }

    pub fn location(mut self, id: &str, latitude: f64, longitude: f64) -> Self {
        self.locations.push(Location {
            id: id.to_string(),
            name: id.to_string(),
            latitude,
            longitude,
        });
        self
    }

    pub fn bed_type(mut self, id: &str) -> Self {
        self.bed_types.push(BedType {
            id: id.to_string(),
            description: String::new(),
        });
        self
    }

    pub fn group(mut self, id: &str, bed_type: &str, successor: Option<&str>, los: LosDistribution) -> Self {
        self.groups.push((
            PatientGroup {
                id: id.to_string(),
                bed_type: bed_type.to_string(),
                successor: successor.map(str::to_string),
            },
            los,
        ));
        self
    }

    pub fn capacity(mut self, bed_type: &str, location: &str, beds: f64) -> Self {
        self.capacity.push((bed_type.to_string(), location.to_string(), beds));
        self
    }

    pub fn admissions(mut self, group: &str, location: &str, series: &[f64]) -> Self {
        self.admissions.push((group.to_string(), location.to_string(), series.to_vec()));
        self
    }

    pub fn deviation(mut self, group: &str, location: &str, lower: &[f64], upper: &[f64]) -> Self {
        self.deviation
            .push((group.to_string(), location.to_string(), lower.to_vec(), upper.to_vec()));
        self
    }

    pub fn initial(mut self, group: &str, location: &str, census: f64) -> Self {
        self.initial.push((group.to_string(), location.to_string(), census));
        self
    }

    pub fn discharges(mut self, group: &str, location: &str, series: &[f64]) -> Self {
        self.discharges.push((group.to_string(), location.to_string(), series.to_vec()));
        self
    }

    pub fn nurses(mut self, location: &str, supply: f64) -> Self {
        self.nurses.push((location.to_string(), supply));
        self
    }

    pub fn nurse_ratio(mut self, bed_type: &str, ratio: f64) -> Self {
        self.nurse_ratio.push((bed_type.to_string(), ratio));
        self
    }

    pub fn external_supply(mut self, location: &str, series: &[f64]) -> Self {
        self.external.push((location.to_string(), series.to_vec()));
        self
    }

    pub fn complete_graph(mut self) -> Self {
        self.edges = Edges::Complete;
        self
    }

    pub fn no_transfers(mut self) -> Self {
        self.edges = Edges::Empty;
        self
    }

    pub fn adjacency(mut self, graph: AdjacencyGraph) -> Self {
        self.edges = Edges::Explicit(graph);
        self
    }

    pub fn start_date(mut self, date: chrono::NaiveDate) -> Self {
        self.start_date = Some(date);
        self
    }

    /// Assembles the instance without validating it.
    pub fn build_unchecked(self) -> Result<ProblemInstance> {
        let n = self.locations.len();
        let t_len = self.horizon;
        let loc = |id: &str| {
            self.locations
                .iter()
                .position(|l| l.id == id)
                .ok_or_else(|| Error::invalid(format!("unknown location `{id}`")))
        };
        let bed = |id: &str| {
            self.bed_types
                .iter()
                .position(|b| b.id == id)
                .ok_or_else(|| Error::invalid(format!("unknown bed type `{id}`")))
        };
        let grp = |id: &str| {
            self.groups
                .iter()
                .position(|(g, _)| g.id == id)
                .ok_or_else(|| Error::invalid(format!("unknown group `{id}`")))
        };
        let ng = self.groups.len();
        let fill = |target: &mut Table3, g: usize, i: usize, series: &[f64]| -> Result<()> {
            if series.len() != t_len {
                return Err(Error::invalid(format!(
                    "series length {} does not match horizon {t_len}",
                    series.len()
                )));
            }
            target.series_mut(g, i).copy_from_slice(series);
            Ok(())
        };

        let mut capacity = Table2::zeros(self.bed_types.len(), n);
        for (b, i, v) in &self.capacity {
            capacity.set(bed(b)?, loc(i)?, *v);
        }
        let mut admissions = Table3::zeros(ng, n, t_len);
        for (g, i, s) in &self.admissions {
            fill(&mut admissions, grp(g)?, loc(i)?, s)?;
        }
        let deviation = if self.deviation.is_empty() {
            None
        } else {
            let mut lower = Table3::zeros(ng, n, t_len);
            let mut upper = Table3::zeros(ng, n, t_len);
            for (g, i, lo, hi) in &self.deviation {
                fill(&mut lower, grp(g)?, loc(i)?, lo)?;
                fill(&mut upper, grp(g)?, loc(i)?, hi)?;
            }
            Some(AdmissionDeviation { lower, upper })
        };
        let mut initial = Table2::zeros(ng, n);
        for (g, i, v) in &self.initial {
            initial.set(grp(g)?, loc(i)?, *v);
        }
        let mut discharges = Table3::zeros(ng, n, t_len);
        for (g, i, s) in &self.discharges {
            fill(&mut discharges, grp(g)?, loc(i)?, s)?;
        }
        let nurse_supply = if self.nurses.is_empty() {
            None
        } else {
            let mut v = vec![0.0; n];
            for (i, s) in &self.nurses {
                v[loc(i)?] = *s;
            }
            Some(v)
        };
        let nurse_ratio = if self.nurse_ratio.is_empty() {
            None
        } else {
            let mut v = vec![0.0; self.bed_types.len()];
            for (b, r) in &self.nurse_ratio {
                v[bed(b)?] = *r;
            }
            Some(v)
        };
        let external_resource_supply = if self.external.is_empty() {
            None
        } else {
            let mut t = Table2::zeros(n, t_len);
            for (i, s) in &self.external {
                if s.len() != t_len {
                    return Err(Error::invalid("external supply length does not match horizon"));
                }
                let li = loc(i)?;
                for (d, v) in s.iter().enumerate() {
                    t.set(li, d, *v);
                }
            }
            Some(t)
        };
        let adjacency = match self.edges {
            Edges::Complete => AdjacencyGraph::complete(n),
            Edges::Empty => AdjacencyGraph::empty(n),
            Edges::Explicit(g) => g,
        };
        let (groups, los): (Vec<_>, Vec<_>) = self.groups.into_iter().unzip();
        Ok(ProblemInstance {
            system: HealthSystem {
                locations: self.locations,
                bed_types: self.bed_types,
                capacity,
                adjacency,
                nurse_supply,
            },
            horizon: t_len,
            groups,
            admissions,
            deviation,
            initial_census: initial,
            initial_discharges: discharges,
            los,
            nurse_ratio,
            external_resource_supply,
            start_date: self.start_date,
        })
    }

    pub fn build(self) -> Result<ProblemInstance> {
        let inst = self.build_unchecked()?;
        let report = validate_instance(&inst);
        if !report.ok {
            return Err(Error::Validation(report));
        }
        Ok(inst)
    }
}
