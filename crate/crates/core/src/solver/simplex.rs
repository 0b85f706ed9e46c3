//! Primal network simplex on the flat bipartite transportation problem.
//!
//! Arcs run from every source to every sink. A basis is a spanning tree of
//! `m + n - 1` arcs; tree flows follow from the marginals and node potentials
//! from the tree arc costs. Entering arcs are picked by Bland's rule (lowest
//! arc index with negative reduced cost) and ties in the ratio test go to the
//! lowest arc index.
//!
//! Degeneracy is removed by perturbing the marginals: every source gets an
//! extra `delta` and the last sink absorbs `m * delta`. Under this
//! perturbation no basic flow is zero, so every pivot makes progress. Final
//! flows are recomputed on the optimal tree from the original marginals.
//!
//! Arcs with `+inf` cost are kept in the graph with a lexicographic cost
//! `(1, 0)` against `(0, c)` for finite arcs. The optimum first minimizes
//! flow on forbidden arcs, so a positive forbidden flow at the end proves
//! that no finite-cost plan exists.

use crate::error::{Error, Result};
use crate::solver::flat::FlatProblem;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    /// Relative size of the marginal perturbation.
    pub perturbation: f64,
    /// Relative threshold below which a reduced cost counts as nonnegative.
    pub reduced_cost_tol: f64,
    /// Relative flow on forbidden arcs tolerated before declaring infeasibility.
    pub feasibility_tol: f64,
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            perturbation: 1e-12,
            reduced_cost_tol: 1e-11,
            feasibility_tol: 1e-9,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    /// Dense row-major flow on the unperturbed marginals.
    pub flow: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub basis: Vec<usize>,
    /// Tree potentials `(u, v)` with `u[root] = 0`; `None` when a forbidden
    /// arc sits in the optimal tree and the potentials are not finite.
    pub potentials: Option<(Vec<f64>, Vec<f64>)>,
    pub pivots: usize,
    pub feasible: bool,
}

/// Lexicographic cost: (forbidden part, finite part).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct LexCost {
    forbidden: f64,
    finite: f64,
}

impl LexCost {
    fn of(c: f64) -> Self {
        if c.is_infinite() {
            LexCost {
                forbidden: 1.0,
                finite: 0.0,
            }
        } else {
            LexCost {
                forbidden: 0.0,
                finite: c,
            }
        }
    }

    fn sub(self, o: LexCost) -> LexCost {
        LexCost {
            forbidden: self.forbidden - o.forbidden,
            finite: self.finite - o.finite,
        }
    }

    // forbidden parts are sums of +-1, hence exact integers
    fn is_negative(self, tol: f64) -> bool {
        self.forbidden < -0.5 || (self.forbidden.abs() < 0.5 && self.finite < -tol)
    }
}

struct Tree {
    m: usize,
    n: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    adjacency: Vec<Vec<(usize, usize)>>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    order: Vec<usize>,
}

const ROOT: usize = 0;
const NONE: usize = usize::MAX;

impl Tree {
    fn new(m: usize, n: usize, basis: Vec<usize>) -> Self {
        let mut in_basis = vec![false; m * n];
        for &k in &basis {
            in_basis[k] = true;
        }
        let mut t = Tree {
            m,
            n,
            basis,
            in_basis,
            adjacency: vec![Vec::new(); m + n],
            parent: vec![NONE; m + n],
            parent_arc: vec![NONE; m + n],
            depth: vec![0; m + n],
            order: Vec::with_capacity(m + n),
        };
        t.rebuild();
        t
    }

    #[inline]
    fn endpoints(&self, k: usize) -> (usize, usize) {
        (k / self.n, self.m + k % self.n)
    }

    fn rebuild(&mut self) {
        for adj in &mut self.adjacency {
            adj.clear();
        }
        for &k in &self.basis {
            let (s, t) = (k / self.n, self.m + k % self.n);
            self.adjacency[s].push((t, k));
            self.adjacency[t].push((s, k));
        }
        // keep traversal independent of insertion order
        for adj in &mut self.adjacency {
            adj.sort_unstable();
        }
        self.parent.fill(NONE);
        self.parent_arc.fill(NONE);
        self.order.clear();
        self.order.push(ROOT);
        self.depth[ROOT] = 0;
        let mut head = 0;
        while head < self.order.len() {
            let v = self.order[head];
            head += 1;
            for idx in 0..self.adjacency[v].len() {
                let (w, k) = self.adjacency[v][idx];
                if w != ROOT && self.parent[w] == NONE && w != self.parent[v] {
                    self.parent[w] = v;
                    self.parent_arc[w] = k;
                    self.depth[w] = self.depth[v] + 1;
                    self.order.push(w);
                }
            }
        }
        debug_assert_eq!(self.order.len(), self.m + self.n, "basis must span all nodes");
    }

    fn flows(&self, supply: &[f64], demand: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut acc: Vec<f64> = supply
            .iter()
            .copied()
            .chain(demand.iter().map(|d| -d))
            .collect();
        let mut flow = vec![0.0; m * n];
        for &v in self.order.iter().rev() {
            if v == ROOT {
                continue;
            }
            let k = self.parent_arc[v];
            // a sink child draws -acc from its source parent; a source child pushes acc
            flow[k] = if v >= m { -acc[v] } else { acc[v] };
            let p = self.parent[v];
            acc[p] += acc[v];
        }
        flow
    }

    fn potentials(&self, cost: &[LexCost]) -> Vec<LexCost> {
        let mut pot = vec![LexCost::default(); self.m + self.n];
        for &v in &self.order {
            if v == ROOT {
                continue;
            }
            pot[v] = cost[self.parent_arc[v]].sub(pot[self.parent[v]]);
        }
        pot
    }

    /// Arcs on the tree path from `from` to `to`, paired with whether the
    /// path walks them from sink to source.
    fn path(&self, from: usize, to: usize) -> Vec<(usize, bool)> {
        let (mut a, mut b) = (from, to);
        let mut up_from = Vec::new();
        let mut up_to = Vec::new();
        while self.depth[a] > self.depth[b] {
            up_from.push((self.parent_arc[a], a >= self.m));
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            up_to.push((self.parent_arc[b], self.parent[b] >= self.m));
            b = self.parent[b];
        }
        while a != b {
            up_from.push((self.parent_arc[a], a >= self.m));
            a = self.parent[a];
            up_to.push((self.parent_arc[b], self.parent[b] >= self.m));
            b = self.parent[b];
        }
        up_from.extend(up_to.into_iter().rev());
        up_from
    }

    fn replace(&mut self, leaving: usize, entering: usize) {
        let pos = self
            .basis
            .iter()
            .position(|&k| k == leaving)
            .expect("leaving arc is basic");
        self.basis[pos] = entering;
        self.in_basis[leaving] = false;
        self.in_basis[entering] = true;
        self.rebuild();
    }
}

/// Northwest-corner staircase: always `m + n - 1` arcs forming a tree.
fn northwest_corner(m: usize, n: usize, supply: &[f64], demand: &[f64]) -> Vec<usize> {
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut s, mut t) = (0, 0);
    let mut rs = supply[0];
    let mut rd = demand[0];
    loop {
        basis.push(s * n + t);
        if s == m - 1 && t == n - 1 {
            break;
        }
        let x = rs.min(rd);
        if (rs <= rd && s < m - 1) || t == n - 1 {
            rd -= x;
            s += 1;
            rs = supply[s];
        } else {
            rs -= x;
            t += 1;
            rd = demand[t];
        }
    }
    basis
}

pub(crate) fn network_simplex(flat: &FlatProblem, opts: &SimplexOptions) -> Result<SimplexOutcome> {
    let (m, n) = (flat.rows(), flat.cols());
    if m == 0 || n == 0 {
        return Ok(SimplexOutcome {
            flow: Vec::new(),
            basis: Vec::new(),
            potentials: Some((vec![0.0; m], vec![0.0; n])),
            pivots: 0,
            feasible: m == n,
        });
    }
    let supply = flat.supply();
    let demand = flat.demand();
    let total: f64 = supply.iter().sum();
    let delta = opts.perturbation * total;
    let p_supply: Vec<f64> = supply.iter().map(|s| s + delta).collect();
    let mut p_demand = demand.clone();
    p_demand[n - 1] += m as f64 * delta;

    let cost: Vec<LexCost> = flat.cost.iter().map(|&c| LexCost::of(c)).collect();
    let scale = 1.0
        + flat
            .cost
            .iter()
            .filter(|c| c.is_finite())
            .fold(0.0_f64, |acc, c| acc.max(c.abs()));
    let rc_tol = opts.reduced_cost_tol * scale;
    let tie_tol = 1e-14 * total;
    let max_pivots = opts
        .max_pivots
        .unwrap_or_else(|| 10_000 + 50 * (m + n) * m * n);

    let mut tree = Tree::new(m, n, northwest_corner(m, n, &p_supply, &p_demand));
    let mut pivots = 0;
    loop {
        let pot = tree.potentials(&cost);
        let entering = (0..m * n).find(|&k| {
            if tree.in_basis[k] {
                return false;
            }
            let (s, t) = tree.endpoints(k);
            let reduced = LexCost {
                forbidden: cost[k].forbidden - pot[s].forbidden - pot[t].forbidden,
                finite: cost[k].finite - pot[s].finite - pot[t].finite,
            };
            reduced.is_negative(rc_tol)
        });
        let Some(entering) = entering else { break };
        if pivots >= max_pivots {
            return Err(Error::PivotLimit(max_pivots));
        }
        let flow = tree.flows(&p_supply, &p_demand);
        let (s, t) = tree.endpoints(entering);
        // the cycle pushes along s -> t, then returns from t to s through the tree
        let mut leaving = None::<(usize, f64)>;
        for (k, decreasing) in tree.path(t, s) {
            if !decreasing {
                continue;
            }
            let f = flow[k].max(0.0);
            leaving = match leaving {
                None => Some((k, f)),
                Some((lk, lf)) if f < lf - tie_tol || (f <= lf + tie_tol && k < lk) => Some((k, f)),
                keep => keep,
            };
        }
        let (leaving, _) = leaving.expect("a tree cycle always has a decreasing arc");
        tree.replace(leaving, entering);
        pivots += 1;
    }

    let mut flow = tree.flows(&supply, &demand);
    let feas_tol = opts.feasibility_tol * total.max(f64::MIN_POSITIVE);
    let mut feasible = true;
    for &k in &tree.basis {
        if flat.cost[k].is_infinite() && flow[k] > feas_tol {
            feasible = false;
        }
    }
    let noise = 1e-15 * total;
    for (k, f) in flow.iter_mut().enumerate() {
        if *f <= noise || (flat.cost[k].is_infinite() && feasible) {
            *f = 0.0;
        }
    }

    let has_forbidden_basic = tree.basis.iter().any(|&k| flat.cost[k].is_infinite());
    let potentials = if has_forbidden_basic {
        None
    } else {
        let pot = tree.potentials(&cost);
        let u = pot[..m].iter().map(|p| p.finite).collect();
        let v = pot[m..].iter().map(|p| p.finite).collect();
        Some((u, v))
    };
    let mut basis = tree.basis.clone();
    basis.sort_unstable();
    Ok(SimplexOutcome {
        flow,
        basis,
        potentials,
        pivots,
        feasible,
    })
}

/// Optimal potentials for a given optimal flow, via shortest paths in the
/// residual graph. Used when the optimal tree contains a forbidden arc.
///
/// Forward arcs `s -> t` cost `c_st`; arcs carrying flow also admit the
/// reverse move `t -> s` at `-c_st`. With `d` the shortest distances from a
/// virtual root joined to every node at zero cost, `u_s = -d_s` and
/// `v_t = d_t` satisfy `u_s + v_t <= c_st` everywhere, with equality on the
/// flow's support.
pub(crate) fn residual_potentials(flat: &FlatProblem, flow: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (flat.rows(), flat.cols());
    let mut dist = vec![0.0_f64; m + n];
    let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
    for s in 0..m {
        for t in 0..n {
            let c = flat.cost_at(s, t);
            if c.is_finite() {
                arcs.push((s, m + t, c));
                if flow[s * n + t] > 0.0 {
                    arcs.push((m + t, s, -c));
                }
            }
        }
    }
    for _ in 0..m + n {
        let mut changed = false;
        for &(from, to, c) in &arcs {
            let cand = dist[from] + c;
            if cand < dist[to] - 1e-15 * (1.0 + cand.abs()) {
                dist[to] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let u = dist[..m].iter().map(|d| -d).collect();
    let v = dist[m..].to_vec();
    (u, v)
}
