#![allow(dead_code)]

use itertools::Itertools;
use rand::Rng;
use vot_core::measures::{build_kappa_cost, lq_distance, Point};
use vot_core::random::{random_cost, random_measure, random_support, rng, InstanceRng};
use vot_core::solver::flatten;
use vot_core::{CostTensor, GroundCost, MetricSpec, SupportSet, VectorMeasure};

pub struct Case {
    pub mu: VectorMeasure,
    pub nu: VectorMeasure,
    pub cost: CostTensor,
}

/// Counterexample to the triangle inequality on the points {0, 1, 2}:
/// mu = [delta_0, 0], nu = [0, delta_1], lambda = [delta_2, 0] with |x - y|
/// on the diagonal and the epsilon-discrete distance (epsilon = 0.1) off it.
pub fn three_diracs() -> (VectorMeasure, VectorMeasure, VectorMeasure, MetricSpec) {
    let s = SupportSet::on_line(&[0.0, 1.0, 2.0]).unwrap();
    let mu = VectorMeasure::dirac(s.clone(), 0, 2, 0).unwrap();
    let nu = VectorMeasure::dirac(s.clone(), 1, 2, 1).unwrap();
    let lambda = VectorMeasure::dirac(s.clone(), 0, 2, 2).unwrap();
    let cost = GroundCost::DiscreteEpsilon {
        epsilon: 0.1,
        q: 2.0,
    }
    .tensor(2, &s, &s)
    .unwrap();
    (mu, nu, lambda, MetricSpec::new(cost, 1.0).unwrap())
}

/// Random instance with `n` species, independent source and target supports
/// of at most `max_atoms` points, and costs uniform in `[0.1, 1.1)`.
pub fn positive_case<R: Rng>(r: &mut R, n: usize, max_atoms: usize) -> Case {
    let m = r.gen_range(1..=max_atoms);
    let k = r.gen_range(1..=max_atoms);
    let zero = r.gen_range(0.0..0.5);
    let src = random_support(r, m, 2);
    let dst = random_support(r, k, 2);
    let mu = random_measure(r, &src, n, zero);
    let nu = random_measure(r, &dst, n, zero);
    let cost = CostTensor::from_fn(n, m, k, |_, _, _, _| 0.1 + r.gen::<f64>()).unwrap();
    Case { mu, nu, cost }
}

/// Random instances for the strong duality sweep.
pub fn duality_cases(count: usize) -> Vec<Case> {
    let mut r = rng(0x5eed_0002);
    (0..count)
        .map(|t| positive_case(&mut r, 1 + t % 3, 6))
        .collect()
}

/// Random instances whose flat size is within the oracle limit. All but one
/// have at most 30 flat cells; the last is a full 6 x 6 instance.
pub fn oracle_cases(count: usize) -> Vec<Case> {
    let mut r = rng(0x5eed_0003);
    let mut out = Vec::with_capacity(count);
    while out.len() + 1 < count {
        let n = r.gen_range(1..=3);
        let case = positive_case(&mut r, n, 6 / n);
        let flat = flatten(&case.mu, &case.nu, &case.cost).unwrap();
        if flat.rows() * flat.cols() <= 30 {
            out.push(case);
        }
    }
    let s = random_support(&mut r, 3, 2);
    let weights = |r: &mut InstanceRng| -> Vec<Vec<f64>> {
        let w: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..3).map(|_| r.gen_range(0.1..1.0)).collect())
            .collect();
        let total: f64 = w.iter().flatten().sum();
        w.into_iter()
            .map(|row| row.into_iter().map(|x| x / total).collect())
            .collect()
    };
    let mu = VectorMeasure::new(s.clone(), weights(&mut r)).unwrap();
    let nu = VectorMeasure::new(s, weights(&mut r)).unwrap();
    let cost = random_cost(&mut r, 2, 3, 3, 1.0);
    out.push(Case { mu, nu, cost });
    out
}

/// Instances with one scalar cost shared by every species pair.
pub fn uniform_cost_cases(count: usize) -> Vec<(Case, Vec<Vec<f64>>)> {
    let mut r = rng(0x5eed_0004);
    (0..count)
        .map(|t| {
            let n = 1 + t % 3;
            let (m, k) = (r.gen_range(1..=5), r.gen_range(1..=5));
            let src = random_support(&mut r, m, 2);
            let dst = random_support(&mut r, k, 2);
            let mu = random_measure(&mut r, &src, n, 0.3);
            let nu = random_measure(&mut r, &dst, n, 0.3);
            let base: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..k).map(|_| r.gen::<f64>()).collect())
                .collect();
            let cost = CostTensor::uniform(&base, n).unwrap();
            (Case { mu, nu, cost }, base)
        })
        .collect()
}

/// Euclidean distance matrix of a support with coordinates.
pub fn euclidean(s: &SupportSet) -> Vec<Vec<f64>> {
    let c = s.coords().unwrap();
    c.iter()
        .map(|x| c.iter().map(|y| lq_distance(x, y, 2.0)).collect())
        .collect()
}

pub struct TriangleCase {
    pub mu: VectorMeasure,
    pub nu: VectorMeasure,
    pub lambda: VectorMeasure,
    pub spec: MetricSpec,
}

/// Families `d` on the diagonal and `d + t` off it, with `t >= 0` (every
/// fifth family has `t = 0`), and three random measures on a shared support.
pub fn triangle_cases(count: usize, p: f64) -> Vec<TriangleCase> {
    let mut r = rng(0x5eed_0005 ^ p.to_bits());
    (0..count)
        .map(|t| {
            let n = 1 + t % 3;
            let m = r.gen_range(2..=4);
            let s = random_support(&mut r, m, 2);
            let shift = if t % 5 == 0 { 0.0 } else { r.gen::<f64>() };
            let cost = build_kappa_cost(&euclidean(&s), shift, n).unwrap();
            let spec = MetricSpec::new(cost, p).unwrap();
            TriangleCase {
                mu: random_measure(&mut r, &s, n, 0.3),
                nu: random_measure(&mut r, &s, n, 0.3),
                lambda: random_measure(&mut r, &s, n, 0.3),
                spec,
            }
        })
        .collect()
}

/// Exhaustive assignment value `((1/n) min_sigma sum_i d_{i sigma(i)}^p)^(1/p)`
/// for tuples whose `i`-th point is atom `i`.
pub fn permutation_minimum(spec: &MetricSpec) -> f64 {
    let n = spec.species();
    let best = (0..n)
        .permutations(n)
        .map(|sigma| {
            sigma
                .iter()
                .enumerate()
                .map(|(i, &j)| spec.distance(i, j, i, j).powf(spec.p()))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    (best / n as f64).powf(1.0 / spec.p())
}

/// Random tuple pair with per-pair costs `||x - y||_q + t_ij`, `t_ii = 0`.
pub fn tuple_case<R: Rng>(r: &mut R, n: usize, p: f64) -> (SupportSet, SupportSet, MetricSpec) {
    let tuple = |r: &mut R, tag: &str| {
        SupportSet::new(
            (0..n)
                .map(|i| Point::new(format!("{tag}{i}"), vec![r.gen(), r.gen()]))
                .collect(),
        )
        .unwrap()
    };
    let x = tuple(r, "x");
    let y = tuple(r, "y");
    let shifts: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { r.gen() }).collect())
        .collect();
    let q = [1.0, 2.0, f64::INFINITY][r.gen_range(0..3)];
    let (cx, cy) = (x.coords().unwrap(), y.coords().unwrap());
    let cost = CostTensor::from_fn(n, n, n, |i, j, a, b| lq_distance(cx[a], cy[b], q) + shifts[i][j])
        .unwrap();
    (x, y, MetricSpec::new(cost, p).unwrap())
}
