//! Dual side: potentials, the vector c-transform, the improvement sweep and
//! the complementary-slackness certificate.
//!
//! A pair `(phi, psi)` is dual feasible when
//! `phi_i(a) + psi_j(b) <= c_ij(a, b)` for every species pair and atom pair.
//! Its dual value is `sum_i <phi_i, mu_i> + sum_j <psi_j, nu_j>`, which never
//! exceeds the cost of any transference plan.

use serde::{Deserialize, Serialize};

use crate::measures::{CostTensor, VectorMeasure};
use crate::plan::CouplingTensor;

/// Slack tolerated in `phi_i(a) + psi_j(b) <= c_ij(a, b)`.
pub const DUAL_FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Plan entries at or below this mass are ignored by [`check_optimality`].
pub const SUPPORT_MASS_THRESHOLD: f64 = 1e-10;
/// Allowed `|phi + psi - c|` on the support of an optimal plan.
pub const SLACKNESS_TOLERANCE: f64 = 1e-8;

/// Source potentials `phi` (`n x M`) and target potentials `psi` (`n x N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

impl PotentialPair {
    pub fn zeros(species: usize, rows: usize, cols: usize) -> Self {
        Self {
            phi: vec![vec![0.0; rows]; species],
            psi: vec![vec![0.0; cols]; species],
        }
    }

    pub fn species(&self) -> usize {
        self.phi.len()
    }

    /// Subtracts `shift` from every `phi` and adds it to every `psi`; the
    /// constraints and the dual value on equal-mass measures are unchanged.
    pub fn shifted(&self, shift: f64) -> PotentialPair {
        PotentialPair {
            phi: self
                .phi
                .iter()
                .map(|r| r.iter().map(|x| x - shift).collect())
                .collect(),
            psi: self
                .psi
                .iter()
                .map(|r| r.iter().map(|x| x + shift).collect())
                .collect(),
        }
    }

    /// Shifts so that the smallest source potential is zero.
    pub fn normalized(&self) -> PotentialPair {
        let min = self
            .phi
            .iter()
            .flatten()
            .copied()
            .filter(|x| x.is_finite())
            .fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            self.shifted(min)
        } else {
            self.clone()
        }
    }
}

fn weighted_sum(pot: &[Vec<f64>], m: &VectorMeasure) -> f64 {
    assert_eq!(pot.len(), m.species(), "potential species count");
    let mut acc = 0.0;
    for (i, row) in pot.iter().enumerate() {
        assert_eq!(row.len(), m.atoms(), "potential length");
        for (a, &x) in row.iter().enumerate() {
            let w = m.weight(i, a);
            // zero-mass atoms never contribute, even with infinite potentials
            if w != 0.0 {
                acc += x * w;
            }
        }
    }
    acc
}

/// `sum_i sum_a phi_i(a) mu_i(a) + sum_j sum_b psi_j(b) nu_j(b)`.
pub fn dual_value(pp: &PotentialPair, mu: &VectorMeasure, nu: &VectorMeasure) -> f64 {
    weighted_sum(&pp.phi, mu) + weighted_sum(&pp.psi, nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualViolation {
    pub i: usize,
    pub j: usize,
    pub a: usize,
    pub b: usize,
    /// `phi_i(a) + psi_j(b) - c_ij(a, b)`.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualFeasibility {
    pub ok: bool,
    /// The largest constraint excess found, if any constraint is exceeded at all.
    pub worst: Option<DualViolation>,
}

pub fn check_dual_feasible(pp: &PotentialPair, cost: &CostTensor) -> DualFeasibility {
    check_dual_feasible_within(pp, cost, DUAL_FEASIBILITY_TOLERANCE)
}

pub fn check_dual_feasible_within(pp: &PotentialPair, cost: &CostTensor, tol: f64) -> DualFeasibility {
    let n = cost.species();
    let mut worst: Option<DualViolation> = None;
    for i in 0..n {
        for j in 0..n {
            for a in 0..cost.rows() {
                for b in 0..cost.cols() {
                    let c = cost.get(i, j, a, b);
                    if c == f64::INFINITY {
                        continue;
                    }
                    let amount = pp.phi[i][a] + pp.psi[j][b] - c;
                    let amount = if amount.is_nan() { f64::INFINITY } else { amount };
                    if amount > 0.0 && worst.map_or(true, |w| amount > w.amount) {
                        worst = Some(DualViolation { i, j, a, b, amount });
                    }
                }
            }
        }
    }
    DualFeasibility {
        ok: worst.map_or(true, |w| w.amount <= tol),
        worst,
    }
}

/// Result of a vector c-transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CTransform {
    pub values: Vec<f64>,
    /// Positions where every cost entry is `+inf`; the value there is `+inf`.
    pub unbounded: Vec<usize>,
    /// Lexicographically smallest `(species, atom)` attaining each minimum,
    /// filled only by the witness-recording variants.
    pub witnesses: Option<Vec<Option<(usize, usize)>>>,
}

/// Shared kernel: `out(y) = min_k min_x (cost(k, x, y) - f_k(x))`.
fn transform(
    f: &[Vec<f64>],
    outputs: usize,
    cost: impl Fn(usize, usize, usize) -> f64,
    record: bool,
) -> CTransform {
    let mut values = Vec::with_capacity(outputs);
    let mut unbounded = Vec::new();
    let mut witnesses = record.then(|| Vec::with_capacity(outputs));
    for y in 0..outputs {
        let mut best = f64::INFINITY;
        let mut arg = None;
        for (k, fk) in f.iter().enumerate() {
            for (x, &fx) in fk.iter().enumerate() {
                let c = cost(k, x, y);
                if c == f64::INFINITY {
                    continue;
                }
                let cand = c - fx;
                // strict comparison keeps the first (smallest) witness on ties
                if cand < best {
                    best = cand;
                    arg = Some((k, x));
                }
            }
        }
        if arg.is_none() {
            unbounded.push(y);
        }
        values.push(best);
        if let Some(w) = witnesses.as_mut() {
            w.push(arg);
        }
    }
    CTransform {
        values,
        unbounded,
        witnesses,
    }
}

/// `g(b) = min_i min_a (c_i(a, b) - f_i(a))` for explicit blocks `c_i` (`M x N`).
pub fn c_transform(f: &[Vec<f64>], blocks: &[Vec<Vec<f64>>]) -> CTransform {
    assert_eq!(f.len(), blocks.len(), "one cost block per potential");
    let cols = blocks.first().and_then(|b| b.first()).map_or(0, Vec::len);
    transform(f, cols, |k, x, y| blocks[k][x][y], false)
}

/// `h(a) = min_j min_b (c_j(a, b) - g_j(b))` for explicit blocks `c_j` (`M x N`).
pub fn cbar_transform(g: &[Vec<f64>], blocks: &[Vec<Vec<f64>>]) -> CTransform {
    assert_eq!(g.len(), blocks.len(), "one cost block per potential");
    let rows = blocks.first().map_or(0, Vec::len);
    transform(g, rows, |k, y, x| blocks[k][x][y], false)
}

/// Target potential for species `j`: the transform of `phi` through `(c_1j, ..., c_nj)`.
pub fn c_transform_column(phi: &[Vec<f64>], cost: &CostTensor, j: usize) -> CTransform {
    transform(phi, cost.cols(), |i, a, b| cost.get(i, j, a, b), false)
}

/// Source potential for species `i`: the transform of `psi` through `(c_i1, ..., c_in)`.
pub fn cbar_transform_row(psi: &[Vec<f64>], cost: &CostTensor, i: usize) -> CTransform {
    transform(psi, cost.rows(), |j, b, a| cost.get(i, j, a, b), false)
}

/// [`c_transform_column`] recording the lexicographically smallest argmin.
pub fn c_transform_column_with_witness(phi: &[Vec<f64>], cost: &CostTensor, j: usize) -> CTransform {
    transform(phi, cost.cols(), |i, a, b| cost.get(i, j, a, b), true)
}

/// One improvement sweep: every `psi_j` becomes the c-transform of `phi`
/// through column `j`, then every `phi_i` the c-bar-transform of the new
/// `psi` through row `i`. Feasibility is preserved and, for nonnegative
/// weights, the dual value does not decrease.
pub fn improve_potentials(pp: &PotentialPair, cost: &CostTensor) -> PotentialPair {
    let n = cost.species();
    let psi: Vec<Vec<f64>> = (0..n)
        .map(|j| c_transform_column(&pp.phi, cost, j).values)
        .collect();
    let phi: Vec<Vec<f64>> = (0..n)
        .map(|i| cbar_transform_row(&psi, cost, i).values)
        .collect();
    PotentialPair { phi, psi }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Stop once a sweep raises the dual value by no more than this.
    pub stall_threshold: f64,
    pub max_iterations: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            stall_threshold: 1e-12,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    pub potentials: PotentialPair,
    /// Dual value before the first sweep and after each sweep.
    pub values: Vec<f64>,
    pub iterations: usize,
    /// True when the loop ended on the stall threshold rather than the cap.
    pub stalled: bool,
}

/// Repeats [`improve_potentials`] until the dual value stalls. This is a
/// heuristic: it is not guaranteed to reach the optimal dual value.
pub fn improve_until_stall(
    pp: &PotentialPair,
    cost: &CostTensor,
    mu: &VectorMeasure,
    nu: &VectorMeasure,
    opts: SweepOptions,
) -> SweepTrace {
    let mut current = pp.clone();
    let mut values = vec![dual_value(&current, mu, nu)];
    let mut stalled = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let next = improve_potentials(&current, cost);
        let v = dual_value(&next, mu, nu);
        let prev = *values.last().expect("seeded with the initial value");
        values.push(v);
        current = next;
        iterations += 1;
        if v - prev <= opts.stall_threshold {
            stalled = true;
            break;
        }
    }
    SweepTrace {
        potentials: current,
        values,
        iterations,
        stalled,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackViolation {
    pub i: usize,
    pub j: usize,
    pub a: usize,
    pub b: usize,
    pub mass: f64,
    /// `c_ij(a, b) - phi_i(a) - psi_j(b)`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityVerdict {
    pub ok: bool,
    pub violations: Vec<SlackViolation>,
}

/// Complementary slackness: on every plan entry with mass above
/// [`SUPPORT_MASS_THRESHOLD`] the constraint must be tight. Together with
/// primal and dual feasibility this certifies that both are optimal.
pub fn check_optimality(plan: &CouplingTensor, pp: &PotentialPair, cost: &CostTensor) -> OptimalityVerdict {
    check_optimality_within(plan, pp, cost, SLACKNESS_TOLERANCE)
}

pub fn check_optimality_within(
    plan: &CouplingTensor,
    pp: &PotentialPair,
    cost: &CostTensor,
    tol: f64,
) -> OptimalityVerdict {
    let violations: Vec<SlackViolation> = plan
        .entries()
        .iter()
        .filter(|e| e.mass > SUPPORT_MASS_THRESHOLD)
        .filter_map(|e| {
            let slack = cost.get(e.i, e.j, e.a, e.b) - pp.phi[e.i][e.a] - pp.psi[e.j][e.b];
            (slack.is_nan() || slack.abs() > tol).then_some(SlackViolation {
                i: e.i,
                j: e.j,
                a: e.a,
                b: e.b,
                mass: e.mass,
                slack,
            })
        })
        .collect();
    OptimalityVerdict {
        ok: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_kappa_cost, SupportSet};
    use crate::plan::PlanEntry;

    fn line_cost(n: usize, xs: &[f64]) -> CostTensor {
        let base: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| xs.iter().map(|y| (x - y).abs()).collect())
            .collect();
        CostTensor::uniform(&base, n).unwrap()
    }

    #[test]
    fn zero_potentials_have_zero_value() {
        let s = SupportSet::on_line(&[0.0, 1.0]).unwrap();
        let mu = VectorMeasure::new(s, vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(dual_value(&PotentialPair::zeros(1, 2, 2), &mu, &mu), 0.0);
    }

    #[test]
    fn constant_potentials_weight_by_mass() {
        let s = SupportSet::on_line(&[0.0, 1.0]).unwrap();
        let mu = VectorMeasure::new(s, vec![vec![0.3, 0.2], vec![0.1, 0.4]]).unwrap();
        let pp = PotentialPair {
            phi: vec![vec![2.5; 2]; 2],
            psi: vec![vec![0.0; 2]; 2],
        };
        assert!((dual_value(&pp, &mu, &mu) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn zero_potentials_feasible_for_nonnegative_cost() {
        let c = line_cost(2, &[0.0, 1.0, 3.0]);
        assert!(check_dual_feasible(&PotentialPair::zeros(2, 3, 3), &c).ok);
    }

    #[test]
    fn constructed_breach_is_located() {
        let c = line_cost(1, &[0.0, 1.0]);
        let mut pp = PotentialPair::zeros(1, 2, 2);
        pp.phi[0][0] = c.get(0, 0, 0, 1) + 1.0;
        let v = check_dual_feasible(&pp, &c);
        assert!(!v.ok);
        let w = v.worst.unwrap();
        // phi_1(0) = 2 beats c(0,0) = 0 by 2 and c(0,1) = 1 by 1; worst is (a,b)=(0,0)
        assert_eq!((w.i, w.j, w.a, w.b), (0, 0, 0, 0));
        assert_eq!(w.amount, 2.0);

        let mut pp = PotentialPair::zeros(1, 2, 2);
        pp.phi[0][1] = c.get(0, 0, 1, 1) + 1.0;
        let w = check_dual_feasible(&pp, &c).worst.unwrap();
        assert_eq!((w.a, w.b, w.amount), (1, 1, 1.0));
    }

    #[test]
    fn scalar_transform_of_zero_on_line() {
        let blocks = vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]];
        let g = c_transform(&[vec![0.0, 0.0]], &blocks);
        assert_eq!(g.values, vec![0.0, 0.0]);
        assert!(g.unbounded.is_empty());
    }

    #[test]
    fn single_atom_double_min() {
        let blocks = vec![vec![vec![3.0]], vec![vec![4.0]]];
        let g = c_transform(&[vec![2.0], vec![5.0]], &blocks);
        assert_eq!(g.values, vec![-1.0]);
    }

    #[test]
    fn all_infinite_column_is_flagged() {
        let inf = f64::INFINITY;
        let blocks = vec![vec![vec![inf, 1.0]], vec![vec![inf, 2.0]]];
        let g = c_transform(&[vec![0.0], vec![0.0]], &blocks);
        assert_eq!(g.values[0], inf);
        assert_eq!(g.unbounded, vec![0]);
        assert_eq!(g.values[1], 1.0);
    }

    #[test]
    fn witnesses_pick_lexicographically_smallest() {
        let c = CostTensor::from_fn(2, 2, 1, |_, _, _, _| 1.0).unwrap();
        let phi = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let t = c_transform_column_with_witness(&phi, &c, 0);
        assert_eq!(t.witnesses.unwrap(), vec![Some((0, 0))]);
    }

    #[test]
    fn first_sweep_from_zero_takes_column_minima() {
        let c = CostTensor::from_fn(2, 2, 2, |i, j, a, b| 1.0 + i as f64 + 2.0 * j as f64 + (a + b) as f64)
            .unwrap();
        let pp = improve_potentials(&PotentialPair::zeros(2, 2, 2), &c);
        for j in 0..2 {
            for b in 0..2 {
                let expect = (0..2)
                    .flat_map(|i| (0..2).map(move |a| (i, a)))
                    .map(|(i, a)| c.get(i, j, a, b))
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(pp.psi[j][b], expect);
            }
        }
        assert!(check_dual_feasible(&pp, &c).ok);
    }

    #[test]
    fn slack_on_support_is_flagged() {
        let c = build_kappa_cost(&[vec![0.0, 1.0], vec![1.0, 0.0]], 0.5, 1).unwrap();
        let plan = CouplingTensor::new(
            1,
            2,
            2,
            vec![PlanEntry {
                i: 0,
                j: 0,
                a: 0,
                b: 1,
                mass: 1.0,
            }],
        )
        .unwrap();
        let v = check_optimality(&plan, &PotentialPair::zeros(1, 2, 2), &c);
        assert!(!v.ok);
        assert_eq!(v.violations[0].slack, 1.0);
    }

    #[test]
    fn forced_equality_passes() {
        let c = CostTensor::from_fn(1, 1, 1, |_, _, _, _| 4.0).unwrap();
        let plan = CouplingTensor::new(
            1,
            1,
            1,
            vec![PlanEntry {
                i: 0,
                j: 0,
                a: 0,
                b: 0,
                mass: 1.0,
            }],
        )
        .unwrap();
        let pp = PotentialPair {
            phi: vec![vec![1.5]],
            psi: vec![vec![2.5]],
        };
        assert!(check_optimality(&plan, &pp, &c).ok);
    }

    #[test]
    fn tiny_masses_are_ignored() {
        let c = CostTensor::from_fn(1, 1, 1, |_, _, _, _| 4.0).unwrap();
        let plan = CouplingTensor::new(
            1,
            1,
            1,
            vec![PlanEntry {
                i: 0,
                j: 0,
                a: 0,
                b: 0,
                mass: 1e-11,
            }],
        )
        .unwrap();
        assert!(check_optimality(&plan, &PotentialPair::zeros(1, 1, 1), &c).ok);
    }

    #[test]
    fn normalization_makes_min_phi_zero() {
        let pp = PotentialPair {
            phi: vec![vec![-2.0, 1.0]],
            psi: vec![vec![3.0]],
        };
        let n = pp.normalized();
        assert_eq!(n.phi, vec![vec![0.0, 3.0]]);
        assert_eq!(n.psi, vec![vec![1.0]]);
    }
}
