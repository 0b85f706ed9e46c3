//! Primal solver for the vector Kantorovich problem.
//!
//! The vector problem is flattened to one scalar transportation problem
//! (see [`flat`]), solved by a deterministic network simplex, and mapped
//! back together with dual potentials read off the optimal tree.

pub mod flat;
pub mod oracle;
pub(crate) mod simplex;

use serde::Serialize;

use crate::dual::{dual_value, PotentialPair};
use crate::error::{Error, Result};
use crate::measures::{CostTensor, VectorMeasure, MASS_TOLERANCE};
use crate::plan::CouplingTensor;

pub use flat::{flatten, FlatNode, FlatProblem};
pub use oracle::{brute_force_oracle, ORACLE_LIMIT};

/// Relative duality-gap tolerance an optimal report must meet.
pub const GAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on the difference of total masses.
    pub mass_tolerance: f64,
    pub max_pivots: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mass_tolerance: MASS_TOLERANCE,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `primal_value - dual_value`.
    pub gap: f64,
    pub plan: CouplingTensor,
    pub potentials: PotentialPair,
    pub pivots: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// `|gap| <= 1e-8 (1 + |value|)`.
    pub fn gap_within_tolerance(&self) -> bool {
        self.gap.abs() <= GAP_TOLERANCE * (1.0 + self.primal_value.abs())
    }
}

pub fn solve_primal(mu: &VectorMeasure, nu: &VectorMeasure, cost: &CostTensor) -> Result<SolveReport> {
    solve_primal_with(mu, nu, cost, &SolverOptions::default())
}

pub fn solve_primal_with(
    mu: &VectorMeasure,
    nu: &VectorMeasure,
    cost: &CostTensor,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let flat = flatten(mu, nu, cost)?;
    let (ms, mt) = (mu.total_mass(), nu.total_mass());
    if (ms - mt).abs() > opts.mass_tolerance {
        return Err(Error::MassMismatch {
            source_mass: ms,
            target_mass: mt,
        });
    }
    let simplex_opts = simplex::SimplexOptions {
        max_pivots: opts.max_pivots,
        ..Default::default()
    };
    let out = simplex::network_simplex(&flat, &simplex_opts)?;
    let n = mu.species();
    if !out.feasible {
        return Ok(SolveReport {
            status: SolveStatus::Infeasible,
            primal_value: f64::INFINITY,
            dual_value: f64::NAN,
            gap: f64::NAN,
            plan: CouplingTensor::empty(n, mu.atoms(), nu.atoms()),
            potentials: PotentialPair::zeros(n, mu.atoms(), nu.atoms()),
            pivots: out.pivots,
        });
    }
    let plan = flat.unflatten(&out.flow)?;
    let (u, v) = match out.potentials {
        Some(uv) => uv,
        None => simplex::residual_potentials(&flat, &out.flow),
    };
    let potentials = expand_potentials(&flat, cost, &u, &v).normalized();
    let primal_value = plan.cost(cost);
    let dual_value = dual_value(&potentials, mu, nu);
    Ok(SolveReport {
        status: SolveStatus::Optimal,
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        plan,
        potentials,
        pivots: out.pivots,
    })
}

/// Places flat potentials on their `(species, atom)` slots and fills the
/// zero-mass atoms dropped by the reduction so the full pair stays feasible:
/// dropped target atoms take the transform of the active sources, then
/// dropped source atoms the transform of all targets.
fn expand_potentials(flat: &FlatProblem, cost: &CostTensor, u: &[f64], v: &[f64]) -> PotentialPair {
    let n = flat.species;
    let (rows, cols) = (flat.source_atoms, flat.target_atoms);
    let mut phi = vec![vec![None; rows]; n];
    let mut psi = vec![vec![None; cols]; n];
    for (s, node) in flat.sources.iter().enumerate() {
        phi[node.species][node.atom] = Some(u[s]);
    }
    for (t, node) in flat.sinks.iter().enumerate() {
        psi[node.species][node.atom] = Some(v[t]);
    }
    let finite_min = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        let m = vals.filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            m
        } else {
            0.0
        }
    };
    let mut psi_full = vec![vec![0.0; cols]; n];
    for j in 0..n {
        for b in 0..cols {
            psi_full[j][b] = match psi[j][b] {
                Some(x) => x,
                None => finite_min(&mut flat.sources.iter().enumerate().map(|(s, node)| {
                    cost.get(node.species, j, node.atom, b) - u[s]
                })),
            };
        }
    }
    let mut phi_full = vec![vec![0.0; rows]; n];
    for i in 0..n {
        for a in 0..rows {
            phi_full[i][a] = match phi[i][a] {
                Some(x) => x,
                None => finite_min(&mut (0..n).flat_map(|j| (0..cols).map(move |b| (j, b))).map(
                    |(j, b)| cost.get(i, j, a, b) - psi_full[j][b],
                )),
            };
        }
    }
    PotentialPair {
        phi: phi_full,
        psi: psi_full,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{check_dual_feasible, check_optimality};
    use crate::measures::{GroundCost, SupportSet};

    fn example_51() -> (VectorMeasure, VectorMeasure, VectorMeasure, CostTensor) {
        let s = SupportSet::on_line(&[0.0, 1.0, 2.0]).unwrap();
        let mu = VectorMeasure::dirac(s.clone(), 0, 2, 0).unwrap();
        let nu = VectorMeasure::dirac(s.clone(), 1, 2, 1).unwrap();
        let lambda = VectorMeasure::dirac(s.clone(), 0, 2, 2).unwrap();
        let cost = GroundCost::DiscreteEpsilon { epsilon: 0.1, q: 2.0 }
            .tensor(2, &s, &s)
            .unwrap();
        (mu, nu, lambda, cost)
    }

    #[test]
    fn counterexample_values() {
        let (mu, nu, lambda, cost) = example_51();
        let r = solve_primal(&mu, &lambda, &cost).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.primal_value - 2.0).abs() < 1e-12);
        let r = solve_primal(&mu, &nu, &cost).unwrap();
        assert!((r.primal_value - 0.1).abs() < 1e-12);
        assert!(r.gap_within_tolerance());
    }

    #[test]
    fn reports_are_certified() {
        let (mu, nu, lambda, cost) = example_51();
        for (a, b) in [(&mu, &nu), (&nu, &lambda), (&mu, &lambda)] {
            let r = solve_primal(a, b, &cost).unwrap();
            assert!(check_dual_feasible(&r.potentials, &cost).ok);
            assert!(check_optimality(&r.plan, &r.potentials, &cost).ok);
            assert!(r.potentials.phi.iter().flatten().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn infinite_off_diagonal_with_mismatched_species_is_infeasible() {
        let s = SupportSet::on_line(&[0.0, 1.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![0.5, 0.2], vec![0.3, 0.0]]).unwrap();
        let nu = VectorMeasure::new(s, vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let cost = CostTensor::from_fn(2, 2, 2, |i, j, a, b| {
            if i == j {
                (a as f64 - b as f64).abs()
            } else {
                f64::INFINITY
            }
        })
        .unwrap();
        let r = solve_primal(&mu, &nu, &cost).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(brute_force_oracle(&mu, &nu, &cost).unwrap(), f64::INFINITY);
    }

    #[test]
    fn infinite_entries_avoided_when_possible() {
        let s = SupportSet::on_line(&[0.0, 1.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![0.3, 0.2], vec![0.1, 0.4]]).unwrap();
        let nu = VectorMeasure::new(s, vec![vec![0.2, 0.2], vec![0.3, 0.3]]).unwrap();
        let cost = CostTensor::from_fn(2, 2, 2, |i, j, a, b| {
            if i == 0 && j == 0 && a != b {
                f64::INFINITY
            } else {
                1.0 + (i + 2 * j) as f64 * 0.3 + (a as f64 - b as f64).abs()
            }
        })
        .unwrap();
        let r = solve_primal(&mu, &nu, &cost).unwrap();
        assert!(r.is_optimal());
        let oracle = brute_force_oracle(&mu, &nu, &cost).unwrap();
        assert!((r.primal_value - oracle).abs() < 1e-9);
        assert!(r.gap_within_tolerance(), "gap {}", r.gap);
        assert!(check_dual_feasible(&r.potentials, &cost).ok);
        assert!(check_optimality(&r.plan, &r.potentials, &cost).ok);
    }

    #[test]
    fn zero_mass_atoms_get_feasible_potentials() {
        let s = SupportSet::on_line(&[0.0, 1.0, 2.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
        let nu = VectorMeasure::new(s.clone(), vec![vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
        let cost = GroundCost::NormPlusKappa { kappa: 0.3, q: 2.0 }
            .tensor(2, &s, &s)
            .unwrap();
        let r = solve_primal(&mu, &nu, &cost).unwrap();
        assert!(check_dual_feasible(&r.potentials, &cost).ok);
        assert_eq!(r.potentials.phi[0].len(), 3);
        assert!((r.primal_value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mass_mismatch_rejected() {
        let s = SupportSet::on_line(&[0.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![1.0]]).unwrap();
        let nu = VectorMeasure::new(s, vec![vec![0.5]]).unwrap();
        let cost = CostTensor::from_fn(1, 1, 1, |_, _, _, _| 0.0).unwrap();
        assert!(matches!(solve_primal(&mu, &nu, &cost), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn deterministic_plans() {
        let (mu, _, lambda, cost) = example_51();
        let a = solve_primal(&mu, &lambda, &cost).unwrap();
        let b = solve_primal(&mu, &lambda, &cost).unwrap();
        assert_eq!(a, b);
    }
}
