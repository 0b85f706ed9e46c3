//! Reduction of the vector problem to one scalar transportation problem.
//!
//! Every `(species, atom)` pair with positive mass becomes one flat source
//! (or sink). The flat cost between source `(i, a)` and sink `(j, b)` is
//! `c_ij(a, b)`, so flows on the flat problem and vector plans are in
//! cost-preserving bijection.

use crate::error::{Error, Result};
use crate::measures::{CostTensor, VectorMeasure};
use crate::plan::{CouplingTensor, PlanEntry};

/// One row or column of the flat problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatNode {
    pub species: usize,
    pub atom: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatProblem {
    pub species: usize,
    pub source_atoms: usize,
    pub target_atoms: usize,
    pub sources: Vec<FlatNode>,
    pub sinks: Vec<FlatNode>,
    /// Row-major `sources.len() x sinks.len()`.
    pub cost: Vec<f64>,
}

impl FlatProblem {
    pub fn rows(&self) -> usize {
        self.sources.len()
    }

    pub fn cols(&self) -> usize {
        self.sinks.len()
    }

    #[inline]
    pub fn cost_at(&self, s: usize, t: usize) -> f64 {
        self.cost[s * self.sinks.len() + t]
    }

    pub fn supply(&self) -> Vec<f64> {
        self.sources.iter().map(|n| n.mass).collect()
    }

    pub fn demand(&self) -> Vec<f64> {
        self.sinks.iter().map(|n| n.mass).collect()
    }

    /// Maps a dense row-major flow back to a vector plan.
    pub fn unflatten(&self, flow: &[f64]) -> Result<CouplingTensor> {
        let cols = self.cols();
        let entries = flow.iter().enumerate().filter(|(_, &f)| f > 0.0).map(|(k, &f)| {
            let src = self.sources[k / cols];
            let snk = self.sinks[k % cols];
            PlanEntry {
                i: src.species,
                j: snk.species,
                a: src.atom,
                b: snk.atom,
                mass: f,
            }
        });
        CouplingTensor::new(self.species, self.source_atoms, self.target_atoms, entries)
    }

    /// Maps a vector plan to its dense flat flow. Mass on dropped
    /// (zero-mass) rows or columns is rejected.
    pub fn flatten_plan(&self, plan: &CouplingTensor) -> Result<Vec<f64>> {
        let mut row_of = vec![None; self.species * self.source_atoms];
        for (s, n) in self.sources.iter().enumerate() {
            row_of[n.species * self.source_atoms + n.atom] = Some(s);
        }
        let mut col_of = vec![None; self.species * self.target_atoms];
        for (t, n) in self.sinks.iter().enumerate() {
            col_of[n.species * self.target_atoms + n.atom] = Some(t);
        }
        let mut flow = vec![0.0; self.rows() * self.cols()];
        for e in plan.entries() {
            let s = row_of[e.i * self.source_atoms + e.a];
            let t = col_of[e.j * self.target_atoms + e.b];
            match (s, t) {
                (Some(s), Some(t)) => flow[s * self.cols() + t] += e.mass,
                _ => {
                    return Err(Error::DimensionMismatch(format!(
                        "plan moves mass through zero-mass atom ({},{},{},{})",
                        e.i, e.j, e.a, e.b
                    )))
                }
            }
        }
        Ok(flow)
    }
}

pub(crate) fn check_dimensions(mu: &VectorMeasure, nu: &VectorMeasure, cost: &CostTensor) -> Result<()> {
    if mu.species() != nu.species() || cost.species() != mu.species() {
        return Err(Error::DimensionMismatch(format!(
            "species counts differ: source {}, target {}, cost {}",
            mu.species(),
            nu.species(),
            cost.species()
        )));
    }
    if cost.rows() != mu.atoms() || cost.cols() != nu.atoms() {
        return Err(Error::DimensionMismatch(format!(
            "cost blocks are {}x{} but supports have {} and {} points",
            cost.rows(),
            cost.cols(),
            mu.atoms(),
            nu.atoms()
        )));
    }
    Ok(())
}

/// Builds the flat transportation instance, dropping zero-mass atoms.
pub fn flatten(mu: &VectorMeasure, nu: &VectorMeasure, cost: &CostTensor) -> Result<FlatProblem> {
    check_dimensions(mu, nu, cost)?;
    let n = mu.species();
    let nodes = |m: &VectorMeasure| -> Vec<FlatNode> {
        (0..n)
            .flat_map(|i| (0..m.atoms()).map(move |a| (i, a)))
            .filter(|&(i, a)| m.weight(i, a) > 0.0)
            .map(|(i, a)| FlatNode {
                species: i,
                atom: a,
                mass: m.weight(i, a),
            })
            .collect()
    };
    let sources = nodes(mu);
    let sinks = nodes(nu);
    let mut flat_cost = Vec::with_capacity(sources.len() * sinks.len());
    for s in &sources {
        for t in &sinks {
            flat_cost.push(cost.get(s.species, t.species, s.atom, t.atom));
        }
    }
    Ok(FlatProblem {
        species: n,
        source_atoms: mu.atoms(),
        target_atoms: nu.atoms(),
        sources,
        sinks,
        cost: flat_cost,
    })
}
