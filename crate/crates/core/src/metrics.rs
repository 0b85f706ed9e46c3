//! The `W_p` distance between multi-species measures and the checks that
//! make it a metric.
//!
//! `W_p(mu, nu)` is the `p`-th root of the optimal transport value for the
//! cost family `d_ij^p`. It is symmetric when the family is, and it obeys the
//! triangle inequality when the family satisfies the mixed triangle
//! inequalities `d_ik(x, z) <= d_ij(x, y) + d_jk(y, z)`. [`glue_plans`] builds
//! the composed plan behind that inequality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{MetricSpec, SupportSet, VectorMeasure};
use crate::plan::{CouplingTensor, PlanEntry, MARGINAL_TOLERANCE};
use crate::solver::{solve_primal, SolveReport, SolveStatus};

/// A distance together with the solve that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Distance {
    pub value: f64,
    pub report: SolveReport,
}

/// `W_p(mu, nu)`; the cost blocks of `spec` are indexed by `mu`'s support
/// (rows) and `nu`'s support (columns).
pub fn wasserstein_p(mu: &VectorMeasure, nu: &VectorMeasure, spec: &MetricSpec) -> Result<Distance> {
    let cost = spec.powered();
    let report = solve_primal(mu, nu, &cost)?;
    if report.status == SolveStatus::Infeasible {
        return Err(Error::Infeasible);
    }
    // the solver can return -0.0 or tiny negative round-off on zero-cost plans
    let value = report.primal_value.max(0.0).powf(1.0 / spec.p());
    Ok(Distance { value, report })
}

/// Cost of a plan under `d^p`, raised to `1/p`.
pub fn plan_cost_p(plan: &CouplingTensor, spec: &MetricSpec) -> f64 {
    plan.cost(&spec.powered()).max(0.0).powf(1.0 / spec.p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MtiViolation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    /// `d_ik(x, z)`.
    pub lhs: f64,
    /// `d_ij(x, y) + d_jk(y, z)`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MtiReport {
    pub satisfied: bool,
    pub violations: Vec<MtiViolation>,
}

fn require_square(spec: &MetricSpec) -> Result<()> {
    let c = spec.costs();
    if c.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "metric checks need square blocks over one ground set, got {}x{}",
            c.rows(),
            c.cols()
        )))
    }
}

/// Exhaustive check of `d_ik(x, z) <= d_ij(x, y) + d_jk(y, z)` over every
/// species triple and point triple of the ground set.
/// Relative slack allowed on each inequality, absorbing rounding in sums.
pub const MTI_TOLERANCE: f64 = 1e-12;

pub fn check_mti(spec: &MetricSpec) -> Result<MtiReport> {
    check_mti_within(spec, MTI_TOLERANCE)
}

/// Flags `(i, j, k, x, y, z)` with `lhs > rhs + tol (1 + |rhs|)`.

pub fn check_mti_within(spec: &MetricSpec, tol: f64) -> Result<MtiReport> {
    require_square(spec)?;
    let n = spec.species();
    let s = spec.costs().rows();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for x in 0..s {
                    for y in 0..s {
                        let dxy = spec.distance(i, j, x, y);
                        for z in 0..s {
                            let lhs = spec.distance(i, k, x, z);
                            let rhs = dxy + spec.distance(j, k, y, z);
                            if lhs > rhs + tol * (1.0 + rhs.abs()) {
                                violations.push(MtiViolation {
                                    i,
                                    j,
                                    k,
                                    x,
                                    y,
                                    z,
                                    lhs,
                                    rhs,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(MtiReport {
        satisfied: violations.is_empty(),
        violations,
    })
}

/// The hypotheses under which `W_p` is a genuine distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomsVerdict {
    /// Every `d_ij` is symmetric: `d_ij(x, y) = d_ij(y, x)`.
    pub symmetric: bool,
    pub mti: MtiReport,
    /// `d_ii(x, x) = 0`.
    pub zero_diagonal: bool,
    /// `d_ij(x, y) != 0` whenever `i != j`.
    pub off_diagonal_positive: bool,
}

impl AxiomsVerdict {
    pub fn all_hold(&self) -> bool {
        self.symmetric && self.mti.satisfied && self.zero_diagonal && self.off_diagonal_positive
    }

    /// Symmetric and triangle-respecting but possibly zero between distinct measures.
    pub fn is_pseudodistance(&self) -> bool {
        self.symmetric && self.mti.satisfied && self.zero_diagonal && !self.off_diagonal_positive
    }
}

pub fn check_metric_axioms(spec: &MetricSpec) -> Result<AxiomsVerdict> {
    require_square(spec)?;
    let n = spec.species();
    let s = spec.costs().rows();
    let pairs = || (0..s).flat_map(|x| (0..s).map(move |y| (x, y)));
    let symmetric = (0..n).all(|i| {
        (0..n).all(|j| pairs().all(|(x, y)| spec.distance(i, j, x, y) == spec.distance(i, j, y, x)))
    });
    let zero_diagonal = (0..n).all(|i| (0..s).all(|x| spec.distance(i, i, x, x) == 0.0));
    let off_diagonal_positive = (0..n).all(|i| {
        (0..n)
            .filter(|&j| j != i)
            .all(|j| pairs().all(|(x, y)| spec.distance(i, j, x, y) != 0.0))
    });
    Ok(AxiomsVerdict {
        symmetric,
        mti: check_mti(spec)?,
        zero_diagonal,
        off_diagonal_positive,
    })
}

/// Three Diracs on the ground set bridging an MTI violation: species `i` at
/// `x`, species `j` at `y`, species `k` at `z`. Each pair of them admits a
/// single plan, so the three distances are `d_ik(x,z)`, `d_ij(x,y)` and
/// `d_jk(y,z)` and the triangle inequality fails.
pub fn mti_counterexample(
    support: &SupportSet,
    species: usize,
    v: &MtiViolation,
) -> Result<(VectorMeasure, VectorMeasure, VectorMeasure)> {
    Ok((
        VectorMeasure::dirac(support.clone(), v.i, species, v.x)?,
        VectorMeasure::dirac(support.clone(), v.j, species, v.y)?,
        VectorMeasure::dirac(support.clone(), v.k, species, v.z)?,
    ))
}

/// `(i, j, k, x, y, z, mass)`: mass of species `i` at `x` that passes through
/// species `j` at `y` and ends as species `k` at `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreePointEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluedPlan {
    /// Plan between the outer measures.
    pub composed: CouplingTensor,
    pub three_point_mass: Vec<ThreePointEntry>,
}

impl GluedPlan {
    /// Projection of the three-point mass onto `(i, j, x, y)`.
    pub fn first_leg(&self, rows: usize, cols: usize) -> Result<CouplingTensor> {
        let n = self.composed.species();
        CouplingTensor::new(
            n,
            rows,
            cols,
            self.three_point_mass.iter().map(|e| PlanEntry {
                i: e.i,
                j: e.j,
                a: e.x,
                b: e.y,
                mass: e.mass,
            }),
        )
    }

    /// Projection of the three-point mass onto `(j, k, y, z)`.
    pub fn second_leg(&self, rows: usize, cols: usize) -> Result<CouplingTensor> {
        let n = self.composed.species();
        CouplingTensor::new(
            n,
            rows,
            cols,
            self.three_point_mass.iter().map(|e| PlanEntry {
                i: e.j,
                j: e.k,
                a: e.y,
                b: e.z,
                mass: e.mass,
            }),
        )
    }
}

/// Glues a plan `mu -> nu` to a plan `nu -> lambda` through their shared
/// middle measure.
///
/// For a middle atom `y` of species `j` with `nu_j(y) > 0`, let
/// `in_i(y)` be the mass arriving from species `i` and `out_k(y)` the mass
/// leaving towards species `k`, with densities `f_in_i = in_i / nu_j` and
/// `f_out_k = out_k / nu_j`. The split legs are
/// `gamma_ijk(x, y) = f_out_k(y) gamma_ij(x, y)` and
/// `gamma~_ijk(y, z) = f_in_i(y) gamma~_jk(y, z)`; both put the same mass
/// `m_ijk(y) = f_out_k(y) in_i(y)` on `y`, and the glued mass is
/// `gamma_ijk(x, y) gamma~_ijk(y, z) / m_ijk(y)` (zero when `m_ijk(y) = 0`).
pub fn glue_plans(
    plan_ab: &CouplingTensor,
    plan_bc: &CouplingTensor,
    nu: &VectorMeasure,
) -> Result<GluedPlan> {
    glue_plans_within(plan_ab, plan_bc, nu, MARGINAL_TOLERANCE)
}

pub fn glue_plans_within(
    plan_ab: &CouplingTensor,
    plan_bc: &CouplingTensor,
    nu: &VectorMeasure,
    tol: f64,
) -> Result<GluedPlan> {
    let n = nu.species();
    if plan_ab.species() != n || plan_bc.species() != n {
        return Err(Error::DimensionMismatch(format!(
            "plans have {} and {} species, middle measure has {n}",
            plan_ab.species(),
            plan_bc.species()
        )));
    }
    let mid = nu.atoms();
    if plan_ab.cols() != mid || plan_bc.rows() != mid {
        return Err(Error::DimensionMismatch(format!(
            "plans meet on {} and {} atoms, middle measure has {mid}",
            plan_ab.cols(),
            plan_bc.rows()
        )));
    }

    // arriving[j][y][i] and leaving[j][y][k]
    let mut arriving = vec![vec![vec![0.0; n]; mid]; n];
    let mut leaving = vec![vec![vec![0.0; n]; mid]; n];
    for e in plan_ab.entries() {
        arriving[e.j][e.b][e.i] += e.mass;
    }
    for e in plan_bc.entries() {
        leaving[e.i][e.a][e.j] += e.mass;
    }
    for j in 0..n {
        for y in 0..mid {
            let target = nu.weight(j, y);
            let inflow: f64 = arriving[j][y].iter().sum();
            let outflow: f64 = leaving[j][y].iter().sum();
            for (left, right) in [(inflow, target), (target, outflow)] {
                if (left - right).abs() > tol {
                    return Err(Error::MarginalMismatch {
                        species: j,
                        atom: y,
                        left,
                        right,
                    });
                }
            }
        }
    }

    // group second-leg entries by (j, y)
    let mut out_of: Vec<Vec<Vec<PlanEntry>>> = vec![vec![Vec::new(); mid]; n];
    for e in plan_bc.entries() {
        out_of[e.i][e.a].push(*e);
    }

    let mut three = Vec::new();
    let mut composed = Vec::new();
    for first in plan_ab.entries() {
        let (i, j, x, y) = (first.i, first.j, first.a, first.b);
        let mass_y = nu.weight(j, y);
        if mass_y <= 0.0 {
            continue;
        }
        let f_in = arriving[j][y][i] / mass_y;
        for second in &out_of[j][y] {
            let (k, z) = (second.j, second.b);
            let f_out = leaving[j][y][k] / mass_y;
            let split_first = f_out * first.mass;
            let split_second = f_in * second.mass;
            let shared = f_out * arriving[j][y][i];
            let mass = if shared > 0.0 {
                split_first * split_second / shared
            } else {
                0.0
            };
            if mass > 0.0 {
                three.push(ThreePointEntry {
                    i,
                    j,
                    k,
                    x,
                    y,
                    z,
                    mass,
                });
                composed.push(PlanEntry {
                    i,
                    j: k,
                    a: x,
                    b: z,
                    mass,
                });
            }
        }
    }
    three.sort_by_key(|e| (e.i, e.j, e.k, e.x, e.y, e.z));
    Ok(GluedPlan {
        composed: CouplingTensor::new(n, plan_ab.rows(), plan_bc.cols(), composed)?,
        three_point_mass: three,
    })
}

/// Distance between two `n`-tuples of points: species `i` carries mass
/// `1/n` at `x[i]` on one side and at `y[i]` on the other.
///
/// `spec` holds `n x n` blocks over the tuple supports (`x` rows, `y`
/// columns). The optimal plan is `1/n` times a permutation, so the result is
/// `((1/n) min_sigma sum_i d_{i sigma(i)}(x_i, y_sigma(i))^p)^(1/p)`.
pub fn tuple_distance(x: &SupportSet, y: &SupportSet, spec: &MetricSpec) -> Result<Distance> {
    let n = x.len();
    if y.len() != n || spec.species() != n {
        return Err(Error::DimensionMismatch(format!(
            "tuples of length {} and {} with a {}-species cost family",
            n,
            y.len(),
            spec.species()
        )));
    }
    let spread = |s: &SupportSet| -> Result<VectorMeasure> {
        let w = 1.0 / n as f64;
        let weights = (0..n)
            .map(|i| (0..n).map(|a| if a == i { w } else { 0.0 }).collect())
            .collect();
        VectorMeasure::new(s.clone(), weights)
    };
    wasserstein_p(&spread(x)?, &spread(y)?, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_kappa_cost, CostTensor, GroundCost};

    fn line_base(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter()
            .map(|a| xs.iter().map(|b| (a - b).abs()).collect())
            .collect()
    }

    fn example_51_spec() -> (SupportSet, MetricSpec) {
        let s = SupportSet::on_line(&[0.0, 1.0, 2.0]).unwrap();
        let c = GroundCost::DiscreteEpsilon { epsilon: 0.1, q: 2.0 }
            .tensor(2, &s, &s)
            .unwrap();
        (s, MetricSpec::new(c, 1.0).unwrap())
    }

    #[test]
    fn kappa_family_satisfies_mti() {
        let c = build_kappa_cost(&line_base(&[0.0, 0.4, 1.5, 3.0]), 0.7, 3).unwrap();
        let spec = MetricSpec::new(c, 1.0).unwrap();
        assert!(check_mti(&spec).unwrap().satisfied);
    }

    #[test]
    fn counterexample_family_violates_mti_at_expected_triple() {
        let (_, spec) = example_51_spec();
        let r = check_mti(&spec).unwrap();
        assert!(!r.satisfied);
        let v = r
            .violations
            .iter()
            .find(|v| (v.i, v.j, v.k, v.x, v.y, v.z) == (0, 1, 0, 0, 1, 2))
            .expect("violation at species (1,2,1), points (0,1,2)");
        assert_eq!(v.lhs, 2.0);
        assert!((v.rhs - 0.2).abs() < 1e-15);
    }

    #[test]
    fn scalar_metric_satisfies_mti() {
        let c = CostTensor::uniform(&line_base(&[0.0, 1.0, 5.0]), 1).unwrap();
        assert!(check_mti(&MetricSpec::new(c, 1.0).unwrap()).unwrap().satisfied);
    }

    #[test]
    fn axioms_for_positive_t() {
        let c = build_kappa_cost(&line_base(&[0.0, 1.0, 2.5]), 0.5, 2).unwrap();
        let v = check_metric_axioms(&MetricSpec::new(c, 2.0).unwrap()).unwrap();
        assert!(v.all_hold());
    }

    #[test]
    fn axioms_flag_pseudodistance_for_zero_t() {
        let c = build_kappa_cost(&line_base(&[0.0, 1.0, 2.5]), 0.0, 2).unwrap();
        let v = check_metric_axioms(&MetricSpec::new(c, 1.0).unwrap()).unwrap();
        assert!(v.symmetric && v.mti.satisfied && v.zero_diagonal);
        assert!(!v.off_diagonal_positive);
        assert!(v.is_pseudodistance());
    }

    #[test]
    fn axioms_flag_mti_for_counterexample() {
        let (_, spec) = example_51_spec();
        let v = check_metric_axioms(&spec).unwrap();
        assert!(!v.mti.satisfied);
        assert!(!v.all_hold());
    }

    #[test]
    fn counterexample_distances() {
        let (s, spec) = example_51_spec();
        let mu = VectorMeasure::dirac(s.clone(), 0, 2, 0).unwrap();
        let nu = VectorMeasure::dirac(s.clone(), 1, 2, 1).unwrap();
        let la = VectorMeasure::dirac(s, 0, 2, 2).unwrap();
        assert!((wasserstein_p(&mu, &la, &spec).unwrap().value - 2.0).abs() < 1e-12);
        assert!((wasserstein_p(&mu, &nu, &spec).unwrap().value - 0.1).abs() < 1e-12);
        assert!((wasserstein_p(&nu, &la, &spec).unwrap().value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn self_distance_is_zero() {
        let s = SupportSet::on_line(&[0.0, 1.0, 3.0]).unwrap();
        let c = build_kappa_cost(&line_base(&[0.0, 1.0, 3.0]), 0.4, 2).unwrap();
        let spec = MetricSpec::new(c, 2.0).unwrap();
        let mu = VectorMeasure::new(s, vec![vec![0.1, 0.2, 0.3], vec![0.2, 0.0, 0.2]]).unwrap();
        assert!(wasserstein_p(&mu, &mu, &spec).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn gluing_through_a_single_atom() {
        // one middle atom, one species: composed = row * col / middle mass
        let one = SupportSet::on_line(&[0.0]).unwrap();
        let nu = VectorMeasure::new(one, vec![vec![1.0]]).unwrap();
        let ab = CouplingTensor::new(
            1,
            2,
            1,
            vec![(0, 0, 0, 0, 0.25).into(), (0, 0, 1, 0, 0.75).into()],
        )
        .unwrap();
        let bc = CouplingTensor::new(
            1,
            1,
            2,
            vec![(0, 0, 0, 0, 0.4).into(), (0, 0, 0, 1, 0.6).into()],
        )
        .unwrap();
        let g = glue_plans(&ab, &bc, &nu).unwrap();
        let dense = g.composed.dense_block(0, 0);
        let expect = [[0.25 * 0.4, 0.25 * 0.6], [0.75 * 0.4, 0.75 * 0.6]];
        for a in 0..2 {
            for c in 0..2 {
                assert!((dense[a][c] - expect[a][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gluing_with_identity_returns_second_plan() {
        let s = SupportSet::on_line(&[0.0, 1.0]).unwrap();
        let mu = VectorMeasure::new(s, vec![vec![0.3, 0.2], vec![0.1, 0.4]]).unwrap();
        let identity = CouplingTensor::new(
            2,
            2,
            2,
            (0..2).flat_map(|i| (0..2).map(move |a| (i, a))).map(|(i, a)| PlanEntry {
                i,
                j: i,
                a,
                b: a,
                mass: mu.weight(i, a),
            }),
        )
        .unwrap();
        let bc = CouplingTensor::new(
            2,
            2,
            2,
            vec![
                (0, 0, 0, 1, 0.3).into(),
                (0, 1, 1, 0, 0.2).into(),
                (1, 1, 0, 0, 0.1).into(),
                (1, 0, 1, 1, 0.25).into(),
                (1, 1, 1, 1, 0.15).into(),
            ],
        )
        .unwrap();
        let g = glue_plans(&identity, &bc, &mu).unwrap();
        assert_eq!(g.composed.entries().len(), bc.entries().len());
        for (x, y) in g.composed.entries().iter().zip(bc.entries()) {
            assert_eq!((x.i, x.j, x.a, x.b), (y.i, y.j, y.a, y.b));
            assert!((x.mass - y.mass).abs() < 1e-15);
        }
    }

    #[test]
    fn gluing_rejects_marginal_mismatch() {
        let s = SupportSet::on_line(&[0.0]).unwrap();
        let nu = VectorMeasure::new(s, vec![vec![1.0]]).unwrap();
        let ab = CouplingTensor::new(1, 1, 1, vec![(0, 0, 0, 0, 0.5).into()]).unwrap();
        let bc = CouplingTensor::new(1, 1, 1, vec![(0, 0, 0, 0, 1.0).into()]).unwrap();
        assert!(matches!(
            glue_plans(&ab, &bc, &nu),
            Err(Error::MarginalMismatch { .. })
        ));
    }

    #[test]
    fn tuple_swap_within_species() {
        // x = (0, 1), y = (1, 0): swapping points inside each species costs 1
        // each, the cross-species assignment costs t each.
        let x = SupportSet::new(vec![
            crate::measures::Point::new("x1", vec![0.0]),
            crate::measures::Point::new("x2", vec![1.0]),
        ])
        .unwrap();
        let y = SupportSet::new(vec![
            crate::measures::Point::new("y1", vec![1.0]),
            crate::measures::Point::new("y2", vec![0.0]),
        ])
        .unwrap();
        let c = GroundCost::NormPlusKappa { kappa: 10.0, q: 2.0 }
            .tensor(2, &x, &y)
            .unwrap();
        let d = tuple_distance(&x, &y, &MetricSpec::new(c, 1.0).unwrap()).unwrap();
        assert!((d.value - 1.0).abs() < 1e-12);
    }
}
