//! Domain types for a network of capacitated facilities and the surge
//! problem posed on it.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::grid::{Table2, Table3};
use crate::los::LosDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BedType {
    pub id: String,
    #[serde(default)]
    pub description: String,
}

/// One stage of a care path. `successor` names the group patients move to
/// when they leave this one; `None` means they are discharged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientGroup {
    pub id: String,
    pub bed_type: String,
    #[serde(default)]
    pub successor: Option<String>,
}

/// Which ordered pairs of locations may exchange patients or resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    n: usize,
    allowed: Vec<bool>,
    directed: bool,
}

impl AdjacencyGraph {
    pub fn empty(n: usize) -> Self {
        AdjacencyGraph {
            n,
            allowed: vec![false; n * n],
            directed: false,
        }
    }

    /// Every ordered pair except self loops.
    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    g.allowed[i * n + j] = true;
                }
            }
        }
        g
    }

    /// Builds a graph from a row-major boolean matrix. The matrix is taken as
    /// given; use `validate_instance` to check symmetry and the diagonal.
    pub fn from_matrix(matrix: Vec<Vec<bool>>, directed: bool) -> Self {
        let n = matrix.len();
        let mut allowed = vec![false; n * n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().take(n) {
                allowed[i * n + j] = v;
            }
        }
        AdjacencyGraph {
            n,
            allowed,
            directed,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline]
    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.allowed[from * self.n + to]
    }

    /// Sets `from -> to`; undirected graphs also set the reverse edge.
    pub fn set(&mut self, from: usize, to: usize, value: bool) {
        self.allowed[from * self.n + to] = value;
        if !self.directed {
            self.allowed[to * self.n + from] = value;
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n).filter_map(move |j| self.allows(i, j).then_some((i, j)))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.allowed.iter().filter(|&&v| v).count()
    }

    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.allows(i, j)).collect())
            .collect()
    }

    /// Same graph with locations reordered: new index `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut g = AdjacencyGraph {
            n: self.n,
            allowed: vec![false; self.n * self.n],
            directed: self.directed,
        };
        for a in 0..self.n {
            for b in 0..self.n {
                g.allowed[a * self.n + b] = self.allows(perm[a], perm[b]);
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthSystem {
    pub locations: Vec<Location>,
    pub bed_types: Vec<BedType>,
    /// Beds available for surge patients, indexed `[bed_type][location]`.
    pub capacity: Table2,
    pub adjacency: AdjacencyGraph,
    /// Initial resource (nurse) supply per location.
    #[serde(default)]
    pub nurse_supply: Option<Vec<f64>>,
}

impl HealthSystem {
    pub fn bed_type_index(&self, id: &str) -> Option<usize> {
        self.bed_types.iter().position(|b| b.id == id)
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }
}

/// Symmetric box around the nominal admissions: realisations lie in
/// `[nominal - lower, nominal + upper]`. Indexed like admissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionDeviation {
    pub lower: Table3,
    pub upper: Table3,
}

/// Everything a model build needs. Day index 0 is the first modelled day;
/// the initial census is the state just before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub system: HealthSystem,
    pub horizon: usize,
    pub groups: Vec<PatientGroup>,
    /// `[group][location][day]`
    pub admissions: Table3,
    #[serde(default)]
    pub deviation: Option<AdmissionDeviation>,
    /// `[group][location]`
    pub initial_census: Table2,
    /// Discharges of initial patients, `[group][location][day]`.
    pub initial_discharges: Table3,
    /// One distribution per group.
    pub los: Vec<LosDistribution>,
    /// Nurse-days per patient-day, per bed type.
    #[serde(default)]
    pub nurse_ratio: Option<Vec<f64>>,
    /// External resource arrivals `[location][day]`; when present the
    /// resource is treated as consumable rather than reusable.
    #[serde(default)]
    pub external_resource_supply: Option<Table2>,
    #[serde(default)]
    pub start_date: Option<NaiveDate>,
}

impl ProblemInstance {
    pub fn n_locations(&self) -> usize {
        self.system.locations.len()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_bed_types(&self) -> usize {
        self.system.bed_types.len()
    }

    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.id == id)
    }

    /// Bed type index of each group; `None` where the id is unknown.
    pub fn group_bed_types(&self) -> Vec<Option<usize>> {
        self.groups
            .iter()
            .map(|g| self.system.bed_type_index(&g.bed_type))
            .collect()
    }

    pub fn successor_index(&self, g: usize) -> Option<usize> {
        self.groups[g]
            .successor
            .as_deref()
            .and_then(|s| self.group_index(s))
    }

    pub fn predecessors(&self, g: usize) -> Vec<usize> {
        (0..self.n_groups())
            .filter(|&h| self.successor_index(h) == Some(g))
            .collect()
    }

    /// Groups that receive external admissions (no predecessor).
    pub fn is_entry_group(&self, g: usize) -> bool {
        !(0..self.n_groups()).any(|h| self.successor_index(h) == Some(g))
    }

    /// Groups ordered so every group comes after all of its predecessors.
    /// Returns `None` when the successor relation has a cycle.
    pub fn topological_groups(&self) -> Option<Vec<usize>> {
        let n = self.n_groups();
        let mut indegree = vec![0usize; n];
        for g in 0..n {
            if let Some(s) = self.successor_index(g) {
                indegree[s] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&g| indegree[g] == 0).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(n);
        while let Some(g) = ready.pop() {
            order.push(g);
            if let Some(s) = self.successor_index(g) {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(s);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn total_admissions(&self) -> f64 {
        self.admissions.sum()
    }

    pub fn total_initial_census(&self) -> f64 {
        self.initial_census.values().iter().sum()
    }

    /// Days since `start_date` for a calendar date, when anchored.
    pub fn day_of(&self, date: NaiveDate) -> Option<i64> {
        self.start_date.map(|s| (date - s).num_days())
    }

    pub fn date_of(&self, day: usize) -> Option<NaiveDate> {
        self.start_date
            .map(|s| s + chrono::Duration::days(day as i64))
    }
}
