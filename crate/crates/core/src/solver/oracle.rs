//! Exhaustive reference solver for small instances.
//!
//! Every vertex of a transportation polytope is the basic solution of some
//! spanning tree of the complete bipartite graph between sources and sinks.
//! The oracle walks all spanning trees, solves each tree's flow equations by
//! peeling leaves, keeps the nonnegative ones and returns the smallest cost.
//! It shares nothing with the simplex engine beyond the flat reduction.

use crate::error::{Error, Result};
use crate::measures::{CostTensor, VectorMeasure};
use crate::solver::flat::{flatten, FlatProblem};

/// Largest flat side length the oracle accepts.
pub const ORACLE_LIMIT: usize = 6;

/// Exact optimal value by basis enumeration, or `+inf` when every
/// nonnegative basic solution routes mass through an infinite cost.
pub fn brute_force_oracle(mu: &VectorMeasure, nu: &VectorMeasure, cost: &CostTensor) -> Result<f64> {
    let total_mu = mu.total_mass();
    let total_nu = nu.total_mass();
    if (total_mu - total_nu).abs() > crate::measures::MASS_TOLERANCE {
        return Err(Error::MassMismatch {
            source_mass: total_mu,
            target_mass: total_nu,
        });
    }
    let flat = flatten(mu, nu, cost)?;
    brute_force_flat(&flat)
}

pub fn brute_force_flat(flat: &FlatProblem) -> Result<f64> {
    let (m, n) = (flat.rows(), flat.cols());
    if m > ORACLE_LIMIT || n > ORACLE_LIMIT {
        return Err(Error::OracleSizeExceeded {
            rows: m,
            cols: n,
            limit: ORACLE_LIMIT,
        });
    }
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    let mut search = TreeSearch::new(flat);
    search.run();
    Ok(search.best)
}

struct TreeSearch<'a> {
    flat: &'a FlatProblem,
    m: usize,
    n: usize,
    // union-find over m + n nodes, union by size, undo log for backtracking
    parent: Vec<usize>,
    size: Vec<usize>,
    undo: Vec<(usize, usize)>,
    chosen: Vec<usize>,
    best: f64,
    tol: f64,
    // scratch for leaf peeling
    degree: Vec<usize>,
    residual: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
    stack: Vec<usize>,
    done: Vec<bool>,
}

impl<'a> TreeSearch<'a> {
    fn new(flat: &'a FlatProblem) -> Self {
        let (m, n) = (flat.rows(), flat.cols());
        let total: f64 = flat.supply().iter().sum();
        Self {
            flat,
            m,
            n,
            parent: (0..m + n).collect(),
            size: vec![1; m + n],
            undo: Vec::new(),
            chosen: Vec::with_capacity(m + n - 1),
            best: f64::INFINITY,
            tol: 1e-12 * total.max(1.0),
            degree: vec![0; m + n],
            residual: vec![0.0; m + n],
            adjacency: vec![Vec::new(); m + n],
            stack: Vec::with_capacity(m + n),
            done: vec![false; m * n],
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn run(&mut self) {
        self.extend(0);
    }

    fn extend(&mut self, next_arc: usize) {
        let needed = self.m + self.n - 1 - self.chosen.len();
        if needed == 0 {
            self.evaluate();
            return;
        }
        let arcs = self.m * self.n;
        let mut k = next_arc;
        while k + needed <= arcs {
            let (s, t) = (k / self.n, self.m + k % self.n);
            let (rs, rt) = (self.find(s), self.find(t));
            if rs != rt {
                let (big, small) = if self.size[rs] >= self.size[rt] {
                    (rs, rt)
                } else {
                    (rt, rs)
                };
                self.parent[small] = big;
                self.size[big] += self.size[small];
                self.undo.push((small, big));
                self.chosen.push(k);

                self.extend(k + 1);

                self.chosen.pop();
                let (small, big) = self.undo.pop().expect("undo log in sync");
                self.parent[small] = small;
                self.size[big] -= self.size[small];
            }
            k += 1;
        }
    }

    /// Solves the tree's flow equations by repeatedly clearing a leaf.
    fn evaluate(&mut self) {
        let (m, n) = (self.m, self.n);
        for v in 0..m + n {
            self.degree[v] = 0;
            self.adjacency[v].clear();
        }
        for (v, s) in self.flat.sources.iter().enumerate() {
            self.residual[v] = s.mass;
        }
        for (t, s) in self.flat.sinks.iter().enumerate() {
            self.residual[m + t] = s.mass;
        }
        for &k in &self.chosen {
            let (s, t) = (k / n, m + k % n);
            self.degree[s] += 1;
            self.degree[t] += 1;
            self.adjacency[s].push(k);
            self.adjacency[t].push(k);
        }
        self.stack.clear();
        for v in 0..m + n {
            if self.degree[v] == 1 {
                self.stack.push(v);
            }
        }
        for &k in &self.chosen {
            self.done[k] = false;
        }
        let mut value = 0.0;
        let mut cleared = 0;
        while let Some(v) = self.stack.pop() {
            if self.degree[v] != 1 {
                continue;
            }
            let done = &self.done;
            let k = match self.adjacency[v].iter().copied().find(|&k| !done[k]) {
                Some(k) => k,
                None => continue,
            };
            self.done[k] = true;
            cleared += 1;
            let flow = self.residual[v];
            if flow < -self.tol {
                return;
            }
            let c = self.flat.cost[k];
            if flow > self.tol {
                if c.is_infinite() {
                    return;
                }
                value += c * flow;
            }
            let (s, t) = (k / n, m + k % n);
            let other = if v == s { t } else { s };
            self.residual[v] = 0.0;
            self.residual[other] -= flow;
            self.degree[v] -= 1;
            self.degree[other] -= 1;
            if self.degree[other] == 1 {
                self.stack.push(other);
            }
        }
        debug_assert_eq!(cleared, m + n - 1);
        if value < self.best {
            self.best = value;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::SupportSet;

    #[test]
    fn forced_single_cell() {
        let s = SupportSet::on_line(&[0.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![2.0]]).unwrap();
        let cost = CostTensor::from_fn(1, 1, 1, |_, _, _, _| 3.5).unwrap();
        assert_eq!(brute_force_oracle(&mu, &mu, &cost).unwrap(), 7.0);
    }

    #[test]
    fn constant_cost_collapses_to_constant() {
        let s = SupportSet::on_line(&[0.0, 1.0, 2.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![0.2, 0.1, 0.1], vec![0.3, 0.0, 0.3]]).unwrap();
        let nu = VectorMeasure::new(s, vec![vec![0.0, 0.5, 0.1], vec![0.1, 0.2, 0.1]]).unwrap();
        let cost = CostTensor::from_fn(2, 3, 3, |_, _, _, _| 5.0).unwrap();
        let v = brute_force_oracle(&mu, &nu, &cost).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn classical_two_by_two() {
        // move 0.5 from 0 to 1 on the line: value 0.5
        let s = SupportSet::on_line(&[0.0, 1.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![1.0, 0.0]]).unwrap();
        let nu = VectorMeasure::new(s, vec![vec![0.5, 0.5]]).unwrap();
        let cost = CostTensor::from_blocks(vec![vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]]]).unwrap();
        assert!((brute_force_oracle(&mu, &nu, &cost).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn size_limit_enforced() {
        let pts: Vec<f64> = (0..7).map(f64::from).collect();
        let s = SupportSet::on_line(&pts).unwrap();
        let mu = VectorMeasure::new(s, vec![vec![1.0 / 7.0; 7]]).unwrap();
        let cost = CostTensor::from_fn(1, 7, 7, |_, _, _, _| 0.0).unwrap();
        assert!(matches!(
            brute_force_oracle(&mu, &mu, &cost),
            Err(Error::OracleSizeExceeded { .. })
        ));
    }

    #[test]
    fn blocked_species_is_infeasible() {
        let s = SupportSet::on_line(&[0.0]).unwrap();
        let mu = VectorMeasure::new(s.clone(), vec![vec![1.0], vec![0.0]]).unwrap();
        let nu = VectorMeasure::new(s, vec![vec![0.0], vec![1.0]]).unwrap();
        let cost = CostTensor::from_fn(2, 1, 1, |i, j, _, _| if i == j { 0.0 } else { f64::INFINITY })
            .unwrap();
        assert_eq!(brute_force_oracle(&mu, &nu, &cost).unwrap(), f64::INFINITY);
    }
}
