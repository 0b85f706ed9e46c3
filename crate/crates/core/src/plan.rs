//! Sparse multi-species transference plans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{CostTensor, VectorMeasure};

/// Absolute tolerance on plan marginals.
pub const MARGINAL_TOLERANCE: f64 = 1e-8;

/// Mass `mass` of species `i` at source atom `a` becoming species `j` at target atom `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, usize, usize, f64)", into = "(usize, usize, usize, usize, f64)")]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub a: usize,
    pub b: usize,
    pub mass: f64,
}

impl From<(usize, usize, usize, usize, f64)> for PlanEntry {
    fn from((i, j, a, b, mass): (usize, usize, usize, usize, f64)) -> Self {
        Self { i, j, a, b, mass }
    }
}

impl From<PlanEntry> for (usize, usize, usize, usize, f64) {
    fn from(e: PlanEntry) -> Self {
        (e.i, e.j, e.a, e.b, e.mass)
    }
}

/// An `n x n` family of nonnegative `M x N` matrices stored as sparse entries.
///
/// Entries are kept sorted by `(i, j, a, b)` with duplicates merged, so two
/// plans with the same mass layout compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTensor {
    species: usize,
    rows: usize,
    cols: usize,
    entries: Vec<PlanEntry>,
}

impl CouplingTensor {
    pub fn new(
        species: usize,
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = PlanEntry>,
    ) -> Result<Self> {
        let mut entries: Vec<PlanEntry> = entries.into_iter().collect();
        for e in &entries {
            if e.i >= species || e.j >= species || e.a >= rows || e.b >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "plan entry ({},{},{},{}) outside {species} species, {rows}x{cols} atoms",
                    e.i, e.j, e.a, e.b
                )));
            }
            if !e.mass.is_finite() || e.mass < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "plan entry ({},{},{},{}) has mass {}",
                    e.i, e.j, e.a, e.b, e.mass
                )));
            }
        }
        entries.sort_by_key(|e| (e.i, e.j, e.a, e.b));
        let mut merged: Vec<PlanEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (last.i, last.j, last.a, last.b) == (e.i, e.j, e.a, e.b) => {
                    last.mass += e.mass
                }
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.mass > 0.0);
        Ok(Self {
            species,
            rows,
            cols,
            entries: merged,
        })
    }

    pub fn empty(species: usize, rows: usize, cols: usize) -> Self {
        Self {
            species,
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// `out[i][a] = sum_j sum_b gamma_ij(a, b)`.
    pub fn source_marginal(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.rows]; self.species];
        for e in &self.entries {
            out[e.i][e.a] += e.mass;
        }
        out
    }

    /// `out[j][b] = sum_i sum_a gamma_ij(a, b)`.
    pub fn target_marginal(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.species];
        for e in &self.entries {
            out[e.j][e.b] += e.mass;
        }
        out
    }

    /// Total cost `sum_ij sum_ab c_ij(a, b) gamma_ij(a, b)`; zero-mass
    /// entries never contribute, even against `+inf` costs.
    pub fn cost(&self, cost: &CostTensor) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.mass > 0.0)
            .map(|e| cost.get(e.i, e.j, e.a, e.b) * e.mass)
            .sum()
    }

    pub fn dense_block(&self, i: usize, j: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for e in self.entries.iter().filter(|e| e.i == i && e.j == j) {
            out[e.a][e.b] += e.mass;
        }
        out
    }

    /// Checks membership in the set of transference plans between `mu` and `nu`.
    pub fn check_marginals(&self, mu: &VectorMeasure, nu: &VectorMeasure, tol: f64) -> MarginalReport {
        let mut report = MarginalReport::default();
        if mu.species() != self.species
            || nu.species() != self.species
            || mu.atoms() != self.rows
            || nu.atoms() != self.cols
        {
            report.shape_mismatch = true;
            return report;
        }
        for (i, row) in self.source_marginal().iter().enumerate() {
            for (a, &m) in row.iter().enumerate() {
                let dev = (m - mu.weight(i, a)).abs();
                report.max_source_deviation = report.max_source_deviation.max(dev);
            }
        }
        for (j, row) in self.target_marginal().iter().enumerate() {
            for (b, &m) in row.iter().enumerate() {
                let dev = (m - nu.weight(j, b)).abs();
                report.max_target_deviation = report.max_target_deviation.max(dev);
            }
        }
        report.min_mass = self
            .entries
            .iter()
            .map(|e| e.mass)
            .fold(0.0_f64, f64::min);
        report.tolerance = tol;
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MarginalReport {
    pub shape_mismatch: bool,
    pub max_source_deviation: f64,
    pub max_target_deviation: f64,
    pub min_mass: f64,
    pub tolerance: f64,
}

impl MarginalReport {
    pub fn is_feasible(&self) -> bool {
        !self.shape_mismatch
            && self.max_source_deviation <= self.tolerance
            && self.max_target_deviation <= self.tolerance
            && self.min_mass >= 0.0
    }
}

/// The independent coupling `gamma_ij(a, b) = mu_i(a) nu_j(b) / m`, where
/// `m` is the shared total mass (one for probability measures).
pub fn product_plan(mu: &VectorMeasure, nu: &VectorMeasure) -> Result<CouplingTensor> {
    if mu.species() != nu.species() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} species, target has {}",
            mu.species(),
            nu.species()
        )));
    }
    let (ms, mt) = (mu.total_mass(), nu.total_mass());
    if (ms - mt).abs() > crate::measures::MASS_TOLERANCE || ms <= 0.0 {
        return Err(Error::MassMismatch {
            source_mass: ms,
            target_mass: mt,
        });
    }
    let n = mu.species();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for a in 0..mu.atoms() {
                for b in 0..nu.atoms() {
                    let mass = mu.weight(i, a) * nu.weight(j, b) / ms;
                    if mass > 0.0 {
                        entries.push(PlanEntry { i, j, a, b, mass });
                    }
                }
            }
        }
    }
    CouplingTensor::new(n, mu.atoms(), nu.atoms(), entries)
}
