//! Solver-agnostic linear and mixed-integer models.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
    /// Either zero or within `[min, max]`; `max` comes from the upper bound.
    SemiContinuous { min: f64 },
}

impl VarKind {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

/// Affine expression `sum coef * var + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        if scale == 0.0 {
            return self;
        }
        self.constant += scale * other.constant;
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self
    }

    /// Merges repeated variables, drops zero coefficients and sorts terms.
    pub fn compact(&mut self) -> &mut Self {
        if self.terms.len() > 1 {
            self.terms.sort_by_key(|&(v, _)| v);
            let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
            for &(v, c) in &self.terms {
                match out.last_mut() {
                    Some((lv, lc)) if *lv == v => *lc += c,
                    _ => out.push((v, c)),
                }
            }
            self.terms = out;
        }
        self.terms.retain(|&(_, c)| c != 0.0);
        self
    }

    pub fn compacted(mut self) -> Self {
        self.compact();
        self
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    GreaterEq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::LessEq => "<=",
            Relation::Eq => "=",
            Relation::GreaterEq => ">=",
        })
    }
}

/// `terms relation rhs`; expression constants are folded into `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.relation {
            Relation::LessEq => (a - self.rhs).max(0.0),
            Relation::GreaterEq => (self.rhs - a).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Minimisation model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    #[serde(skip)]
    index: HashMap<String, VarId>,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let name = name.into();
        let id = VarId(self.variables.len());
        self.index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            lower,
            upper,
            kind,
        });
        id
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    /// Adds `expr relation rhs`, moving the expression constant to the right.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: &LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut e = expr.clone();
        e.compact();
        self.constraints.push(Constraint {
            name: name.into(),
            terms: e.terms,
            relation,
            rhs: rhs - e.constant,
        });
        self.constraints.len() - 1
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        if self.index.len() != self.variables.len() {
            // index is not serialised; fall back to a scan after deserialisation
            return self.variables.iter().position(|v| v.name == name).map(VarId);
        }
        self.index.get(name).copied()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.variables[id.0]
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .variables
            .iter()
            .enumerate()
            .map(|(k, v)| (v.name.clone(), VarId(k)))
            .collect();
    }

    pub fn is_mixed_integer(&self) -> bool {
        self.variables.iter().any(|v| v.kind.is_discrete())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.evaluate(values)
    }

    /// Largest bound or row violation of a candidate point.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| {
                let mut viol = (v.lower - x).max(0.0).max(x - v.upper);
                if let VarKind::SemiContinuous { min } = v.kind {
                    if x.abs() > 1e-9 {
                        viol = viol.max(min - x);
                    } else {
                        viol = viol.max(x.abs());
                    }
                }
                viol
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Checks the structural invariants: references resolve and bounds
    /// are ordered.
    pub fn check(&self) -> Result<()> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::invalid(format!(
                    "variable `{}` has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if let VarKind::SemiContinuous { min } = v.kind {
                if min < 0.0 || min > v.upper {
                    return Err(Error::invalid(format!(
                        "semi-continuous `{}` has minimum {min} above its upper bound {}",
                        v.name, v.upper
                    )));
                }
            }
        }
        let bad = |terms: &[(VarId, f64)]| terms.iter().any(|(v, c)| v.0 >= n || !c.is_finite());
        for c in &self.constraints {
            if bad(&c.terms) || !c.rhs.is_finite() {
                return Err(Error::invalid(format!("constraint `{}` is malformed", c.name)));
            }
        }
        if bad(&self.objective.terms) {
            return Err(Error::invalid("objective references an undeclared variable"));
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
}
