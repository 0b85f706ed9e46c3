//! Seeded random instances for tests, benches and the self-test.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measures::{build_kappa_cost, lq_distance, CostTensor, Point, SupportSet, VectorMeasure};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `m` points with coordinates uniform in the unit cube of dimension `dim`.
pub fn random_support<R: Rng>(rng: &mut R, m: usize, dim: usize) -> SupportSet {
    let points = (0..m)
        .map(|a| Point::new(format!("p{a}"), (0..dim).map(|_| rng.gen::<f64>()).collect()))
        .collect();
    SupportSet::new(points).expect("generated labels are unique")
}

/// Probability measure with `n` species. Each weight is zero with
/// probability `zero_fraction`; at least one weight is always positive.
pub fn random_measure<R: Rng>(
    rng: &mut R,
    support: &SupportSet,
    n: usize,
    zero_fraction: f64,
) -> VectorMeasure {
    let m = support.len();
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.gen::<f64>() < zero_fraction {
                        0.0
                    } else {
                        rng.gen_range(0.05..1.0)
                    }
                })
                .collect()
        })
        .collect();
    if w.iter().flatten().all(|&x| x == 0.0) {
        w[rng.gen_range(0..n)][rng.gen_range(0..m)] = 1.0;
    }
    let total: f64 = w.iter().flatten().sum();
    for x in w.iter_mut().flatten() {
        *x /= total;
    }
    VectorMeasure::new(support.clone(), w).expect("generated weights are finite")
}

/// Cost with every entry uniform in `[0, scale)`.
pub fn random_cost<R: Rng>(rng: &mut R, n: usize, rows: usize, cols: usize, scale: f64) -> CostTensor {
    CostTensor::from_fn(n, rows, cols, |_, _, _, _| rng.gen::<f64>() * scale)
        .expect("generated costs are finite")
}

/// Species-switching family `d(x,y) + kappa` off the diagonal, with `d` the
/// Euclidean distance between the support points.
pub fn random_kappa_family<R: Rng>(rng: &mut R, support: &SupportSet, n: usize) -> Result<CostTensor> {
    let coords = support.coords()?;
    let base: Vec<Vec<f64>> = coords
        .iter()
        .map(|x| coords.iter().map(|y| lq_distance(x, y, 2.0)).collect())
        .collect();
    let kappa = rng.gen::<f64>();
    build_kappa_cost(&base, kappa, n)
}

/// A random transport instance on a shared support.
#[derive(Debug, Clone)]
pub struct Instance {
    pub source: VectorMeasure,
    pub target: VectorMeasure,
    pub cost: CostTensor,
}

/// Instance with `n` species on `m` points and an unstructured cost.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, m: usize, zero_fraction: f64) -> Instance {
    let support = random_support(rng, m, 2);
    let source = random_measure(rng, &support, n, zero_fraction);
    let target = random_measure(rng, &support, n, zero_fraction);
    let cost = random_cost(rng, n, m, m, 1.0);
    Instance {
        source,
        target,
        cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::validate_measure;

    #[test]
    fn same_seed_same_instance() {
        let a = random_instance(&mut rng(7), 3, 4, 0.2);
        let b = random_instance(&mut rng(7), 3, 4, 0.2);
        assert_eq!(a.source, b.source);
        assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn measures_are_probabilities() {
        let mut r = rng(1);
        for _ in 0..20 {
            let s = random_support(&mut r, 3, 1);
            assert!(validate_measure(&random_measure(&mut r, &s, 2, 0.9)).is_ok());
        }
    }
}
