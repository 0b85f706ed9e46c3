//! Multi-species discrete measures and matrix-valued cost families.
//!
//! A [`VectorMeasure`] holds `n` weight rows over one shared finite
//! [`SupportSet`]; row `i` is the mass of species `i`. A [`CostTensor`] holds
//! the `n x n` family of `M x N` cost blocks `c_ij(x_a, y_b)`, where entry
//! `(i, j, a, b)` is the price of moving species-`i` mass at source atom `a`
//! into species-`j` mass at target atom `b`.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance on total mass used by [`validate_measure`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// One atom of a support set: an opaque label, optionally with coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub label: String,
    pub coords: Option<Vec<f64>>,
}

impl Point {
    pub fn new(label: impl Into<String>, coords: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            coords: Some(coords),
        }
    }

    pub fn labeled(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            coords: None,
        }
    }

    /// Two points coincide when their coordinates agree (if both carry
    /// coordinates) or, otherwise, when their labels agree.
    pub fn coincides(&self, other: &Point) -> bool {
        match (&self.coords, &other.coords) {
            (Some(a), Some(b)) => a == b,
            _ => self.label == other.label,
        }
    }
}

/// A finite, non-empty set of labelled points.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    points: Vec<Point>,
}

impl SupportSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSupport("support set is empty".into()));
        }
        let mut seen = HashSet::new();
        for p in &points {
            if !seen.insert(p.label.as_str()) {
                return Err(Error::InvalidSupport(format!(
                    "duplicate label {:?}",
                    p.label
                )));
            }
        }
        let dims: HashSet<usize> = points
            .iter()
            .filter_map(|p| p.coords.as_ref().map(Vec::len))
            .collect();
        if dims.len() > 1 {
            return Err(Error::InvalidSupport(
                "coordinate vectors have differing dimensions".into(),
            ));
        }
        if points
            .iter()
            .filter_map(|p| p.coords.as_ref())
            .flatten()
            .any(|c| !c.is_finite())
        {
            return Err(Error::InvalidSupport("non-finite coordinate".into()));
        }
        Ok(Self { points })
    }

    /// Points on the real line labelled by their coordinate.
    pub fn on_line(xs: &[f64]) -> Result<Self> {
        Self::new(
            xs.iter()
                .map(|&x| Point::new(format!("{x}"), vec![x]))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, a: usize) -> &Point {
        &self.points[a]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p.label == label)
    }

    /// Coordinates of every point, or an error naming the first point without any.
    pub fn coords(&self) -> Result<Vec<&[f64]>> {
        self.points
            .iter()
            .map(|p| {
                p.coords.as_deref().ok_or_else(|| {
                    Error::InvalidSupport(format!("point {:?} has no coordinates", p.label))
                })
            })
            .collect()
    }

    /// Label-wise union, keeping the first occurrence of each label.
    pub fn union(sets: &[&SupportSet]) -> Result<SupportSet> {
        let mut seen = HashSet::new();
        let mut points = Vec::new();
        for set in sets {
            for p in set.points() {
                if seen.insert(p.label.clone()) {
                    points.push(p.clone());
                }
            }
        }
        SupportSet::new(points)
    }
}

/// `n` nonnegative weight rows over a shared support.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMeasure {
    support: SupportSet,
    weights: Vec<Vec<f64>>,
}

impl VectorMeasure {
    /// Checks shapes and finiteness only; sign and mass are left to
    /// [`validate_measure`] so that violations can be reported in full.
    pub fn new(support: SupportSet, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::DimensionMismatch(
                "a measure needs at least one species".into(),
            ));
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != support.len() {
                return Err(Error::DimensionMismatch(format!(
                    "species {} has {} weights but the support has {} points",
                    i + 1,
                    row.len(),
                    support.len()
                )));
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidMeasure(vec![MeasureViolation::NonFinite {
                    species: i,
                }]));
            }
        }
        Ok(Self { support, weights })
    }

    /// Validated constructor: rejects measures that fail [`validate_measure`].
    pub fn probability(support: SupportSet, weights: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::new(support, weights)?;
        m.validated(MassCheck::Probability)
    }

    /// Species `i` carries a unit Dirac mass at atom `atom`; all other rows are zero.
    pub fn dirac(support: SupportSet, species: usize, n: usize, atom: usize) -> Result<Self> {
        let mut weights = vec![vec![0.0; support.len()]; n];
        weights[species][atom] = 1.0;
        Self::new(support, weights)
    }

    pub fn validated(self, check: MassCheck) -> Result<Self> {
        let verdict = validate_measure_with(&self, check);
        if verdict.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidMeasure(verdict.violations))
        }
    }

    pub fn species(&self) -> usize {
        self.weights.len()
    }

    pub fn atoms(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, species: usize, atom: usize) -> f64 {
        self.weights[species][atom]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    pub fn species_mass(&self, species: usize) -> f64 {
        self.weights[species].iter().sum()
    }

    /// Sum of all species rows, as a single-species measure.
    pub fn collapse(&self) -> VectorMeasure {
        let mut row = vec![0.0; self.atoms()];
        for w in &self.weights {
            for (acc, x) in row.iter_mut().zip(w) {
                *acc += x;
            }
        }
        VectorMeasure {
            support: self.support.clone(),
            weights: vec![row],
        }
    }

    /// Rescales every weight so the total mass is one.
    pub fn normalized(&self) -> Result<VectorMeasure> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure(vec![MeasureViolation::TotalMass {
                total,
            }]));
        }
        Ok(VectorMeasure {
            support: self.support.clone(),
            weights: self
                .weights
                .iter()
                .map(|r| r.iter().map(|w| w / total).collect())
                .collect(),
        })
    }
}

/// Which mass condition [`validate_measure_with`] enforces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassCheck {
    /// Total mass equals one within the given absolute tolerance.
    Probability,
    ProbabilityWithin(f64),
    /// Only sign constraints; any total mass is accepted.
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureViolation {
    NegativeWeight { species: usize, atom: usize, weight: f64 },
    TotalMass { total: f64 },
    NonFinite { species: usize },
}

impl fmt::Display for MeasureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureViolation::NegativeWeight {
                species,
                atom,
                weight,
            } => write!(
                f,
                "negative weight {weight} at species {}, atom {}",
                species + 1,
                atom + 1
            ),
            MeasureViolation::TotalMass { total } => write!(f, "total mass {total} ≠ 1"),
            MeasureViolation::NonFinite { species } => {
                write!(f, "non-finite weight in species {}", species + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureVerdict {
    pub violations: Vec<MeasureViolation>,
}

impl MeasureVerdict {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks membership in the set of admissible `n`-species distributions.
pub fn validate_measure(m: &VectorMeasure) -> MeasureVerdict {
    validate_measure_with(m, MassCheck::Probability)
}

pub fn validate_measure_with(m: &VectorMeasure, check: MassCheck) -> MeasureVerdict {
    let mut violations = Vec::new();
    for (i, row) in m.weights.iter().enumerate() {
        if row.iter().any(|w| !w.is_finite()) {
            violations.push(MeasureViolation::NonFinite { species: i });
        }
        for (a, &w) in row.iter().enumerate() {
            if w < 0.0 {
                violations.push(MeasureViolation::NegativeWeight {
                    species: i,
                    atom: a,
                    weight: w,
                });
            }
        }
    }
    let tol = match check {
        MassCheck::Probability => Some(MASS_TOLERANCE),
        MassCheck::ProbabilityWithin(t) => Some(t),
        MassCheck::Unnormalized => None,
    };
    if let Some(tol) = tol {
        let total = m.total_mass();
        if (total - 1.0).abs() > tol {
            violations.push(MeasureViolation::TotalMass { total });
        }
    }
    MeasureVerdict { violations }
}

/// The `n x n` family of `M x N` cost blocks. Entries are finite or `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTensor {
    species: usize,
    rows: usize,
    cols: usize,
    // (i, j, a, b) -> ((i * n + j) * rows + a) * cols + b
    data: Vec<f64>,
    symmetric: bool,
    metric_family: bool,
}

impl CostTensor {
    /// Builds from nested blocks `blocks[i][j][a][b]`.
    ///
    /// Square blocks are assumed to share one support, so `a == b` marks
    /// identical points for the metric-family flag.
    pub fn from_blocks(blocks: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let n = blocks.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("cost has no blocks".into()));
        }
        let rows = blocks
            .first()
            .and_then(|r| r.first())
            .map(Vec::len)
            .unwrap_or(0);
        let cols = blocks
            .first()
            .and_then(|r| r.first())
            .and_then(|b| b.first())
            .map(Vec::len)
            .unwrap_or(0);
        Self::from_blocks_shaped(blocks, rows, cols)
    }

    /// Like [`CostTensor::from_blocks`] but checks every block against an
    /// expected `rows x cols` shape.
    pub fn from_blocks_shaped(
        blocks: Vec<Vec<Vec<Vec<f64>>>>,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let n = blocks.len();
        if n == 0 || rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("cost blocks are empty".into()));
        }
        let mut data = Vec::with_capacity(n * n * rows * cols);
        for (i, row) in blocks.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "cost block row {} has {} blocks, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, block) in row.iter().enumerate() {
                let block_cols = block.first().map(Vec::len).unwrap_or(0);
                if block.len() != rows || block.iter().any(|r| r.len() != cols) {
                    return Err(Error::BlockShape {
                        i: i + 1,
                        j: j + 1,
                        rows: block.len(),
                        cols: block_cols,
                        expected_rows: rows,
                        expected_cols: cols,
                    });
                }
                for r in block {
                    data.extend_from_slice(r);
                }
            }
        }
        let matches: Vec<(usize, usize)> = if rows == cols {
            (0..rows).map(|a| (a, a)).collect()
        } else {
            Vec::new()
        };
        Self::from_raw(n, rows, cols, data, &matches)
    }

    /// Evaluates `f(i, j, a, b)` on every entry.
    pub fn from_fn(
        n: usize,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n * rows * cols);
        for i in 0..n {
            for j in 0..n {
                for a in 0..rows {
                    for b in 0..cols {
                        data.push(f(i, j, a, b));
                    }
                }
            }
        }
        let matches: Vec<(usize, usize)> = if rows == cols {
            (0..rows).map(|a| (a, a)).collect()
        } else {
            Vec::new()
        };
        Self::from_raw(n, rows, cols, data, &matches)
    }

    /// The same family repeated in every block: `c_ij = c` for all species pairs.
    pub fn uniform(base: &[Vec<f64>], n: usize) -> Result<Self> {
        let rows = base.len();
        let cols = base.first().map(Vec::len).unwrap_or(0);
        Self::from_fn(n, rows, cols, |_, _, a, b| base[a][b])
    }

    fn from_raw(
        species: usize,
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        matches: &[(usize, usize)],
    ) -> Result<Self> {
        if species == 0 || rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("cost tensor is empty".into()));
        }
        if let Some(pos) = data.iter().position(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
            let (i, j, a, b) = unflatten(pos, species, rows, cols);
            return Err(Error::InvalidCost(format!(
                "entry ({},{},{},{}) is {}",
                i + 1,
                j + 1,
                a + 1,
                b + 1,
                data[pos]
            )));
        }
        let mut t = Self {
            species,
            rows,
            cols,
            data,
            symmetric: false,
            metric_family: false,
        };
        t.symmetric = t.compute_symmetric();
        t.metric_family = t.compute_metric_family(matches);
        Ok(t)
    }

    fn compute_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.species;
        (0..n).all(|i| {
            (0..n).all(|j| {
                (0..self.rows)
                    .all(|a| (0..self.cols).all(|b| self.get(i, j, a, b) == self.get(j, i, b, a)))
            })
        })
    }

    fn compute_metric_family(&self, matches: &[(usize, usize)]) -> bool {
        let finite_nonneg = self.data.iter().all(|c| c.is_finite() && *c >= 0.0);
        finite_nonneg
            && (0..self.species)
                .all(|i| matches.iter().all(|&(a, b)| self.get(i, i, a, b) == 0.0))
    }

    /// Recomputes the metric-family flag using label matching between the
    /// supports the blocks were evaluated on.
    pub fn with_supports(mut self, source: &SupportSet, target: &SupportSet) -> Result<Self> {
        if source.len() != self.rows || target.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "cost blocks are {}x{} but supports have {} and {} points",
                self.rows,
                self.cols,
                source.len(),
                target.len()
            )));
        }
        let matches: Vec<(usize, usize)> = source
            .points()
            .iter()
            .enumerate()
            .filter_map(|(a, p)| target.index_of(&p.label).map(|b| (a, b)))
            .collect();
        let same = source.points().len() == target.points().len()
            && source
                .points()
                .iter()
                .zip(target.points())
                .all(|(p, q)| p.label == q.label);
        self.symmetric = same && self.compute_symmetric();
        self.metric_family = self.compute_metric_family(&matches);
        Ok(self)
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

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_metric_family(&self) -> bool {
        self.metric_family
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.data[((i * self.species + j) * self.rows + a) * self.cols + b]
    }

    pub fn block(&self, i: usize, j: usize) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|a| (0..self.cols).map(|b| self.get(i, j, a, b)).collect())
            .collect()
    }

    pub fn blocks(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.species)
            .map(|i| (0..self.species).map(|j| self.block(i, j)).collect())
            .collect()
    }

    pub fn has_infinite(&self) -> bool {
        self.data.iter().any(|c| c.is_infinite())
    }

    pub fn max_finite_abs(&self) -> f64 {
        self.data
            .iter()
            .filter(|c| c.is_finite())
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Entry-wise `c^p`; requires nonnegative entries when `p != 1`.
    pub fn powf(&self, p: f64) -> Result<CostTensor> {
        if p == 1.0 {
            return Ok(self.clone());
        }
        if self.data.iter().any(|c| *c < 0.0) {
            return Err(Error::InvalidCost(
                "negative entries cannot be raised to a power".into(),
            ));
        }
        let mut t = self.clone();
        for c in &mut t.data {
            *c = c.powf(p);
        }
        Ok(t)
    }

    /// The transposed family `c'_ji(b, a) = c_ij(a, b)`.
    pub fn transpose(&self) -> CostTensor {
        let n = self.species;
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..n {
            for i in 0..n {
                for b in 0..self.cols {
                    for a in 0..self.rows {
                        data.push(self.get(i, j, a, b));
                    }
                }
            }
        }
        CostTensor {
            species: n,
            rows: self.cols,
            cols: self.rows,
            data,
            symmetric: self.symmetric,
            metric_family: self.metric_family,
        }
    }
}

fn unflatten(pos: usize, n: usize, rows: usize, cols: usize) -> (usize, usize, usize, usize) {
    let b = pos % cols;
    let a = (pos / cols) % rows;
    let ij = pos / (cols * rows);
    (ij / n, ij % n, a, b)
}

/// A distance family together with its exponent `p >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    costs: CostTensor,
    p: f64,
}

impl MetricSpec {
    pub fn new(costs: CostTensor, p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponent p must be a finite real >= 1, got {p}"
            )));
        }
        if costs.has_infinite() || costs.data.iter().any(|c| *c < 0.0) {
            return Err(Error::InvalidCost(
                "distance families must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { costs, p })
    }

    pub fn costs(&self) -> &CostTensor {
        &self.costs
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn species(&self) -> usize {
        self.costs.species
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.costs.get(i, j, a, b)
    }

    /// The transport cost `d_ij^p`.
    pub fn powered(&self) -> CostTensor {
        self.costs
            .powf(self.p)
            .expect("metric entries are nonnegative")
    }
}

/// `c_ii = base`, `c_ij = base + kappa` for `i != j`.
pub fn build_kappa_cost(base: &[Vec<f64>], kappa: f64, n: usize) -> Result<CostTensor> {
    if kappa.is_nan() {
        return Err(Error::InvalidCost("kappa is NaN".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("species count must be >= 1".into()));
    }
    let rows = base.len();
    let cols = base.first().map(Vec::len).unwrap_or(0);
    if rows == 0 || cols == 0 || base.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("base matrix is ragged or empty".into()));
    }
    if base.iter().flatten().any(|c| c.is_nan()) {
        return Err(Error::InvalidCost("base matrix contains NaN".into()));
    }
    if base.iter().flatten().any(|c| *c < 0.0) {
        return Err(Error::InvalidCost("base distances must be nonnegative".into()));
    }
    CostTensor::from_fn(n, rows, cols, |i, j, a, b| {
        if i == j {
            base[a][b]
        } else {
            base[a][b] + kappa
        }
    })
}

/// `q`-norm of a coordinate difference.
pub fn lq_distance(x: &[f64], y: &[f64], q: f64) -> f64 {
    if q == f64::INFINITY {
        return x
            .iter()
            .zip(y)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    }
    if q == 1.0 {
        return x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    }
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs().powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// A rule that evaluates a cost family between any two support sets.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundCost {
    /// Blocks given on a fixed labelled ground set; supports are looked up by label.
    Explicit { points: SupportSet, costs: CostTensor },
    /// `c_ii = |x - y|_q`, `c_ij = |x - y|_q + kappa`.
    NormPlusKappa { kappa: f64, q: f64 },
    /// `c_ii = |x - y|_q`; off-diagonal blocks are `epsilon` between distinct
    /// points and `0` between coinciding ones.
    DiscreteEpsilon { epsilon: f64, q: f64 },
}

impl GroundCost {
    pub fn tensor(&self, n: usize, source: &SupportSet, target: &SupportSet) -> Result<CostTensor> {
        let t = match self {
            GroundCost::Explicit { points, costs } => {
                if costs.species() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "cost family has {} species, expected {n}",
                        costs.species()
                    )));
                }
                let lookup = |s: &SupportSet| -> Result<Vec<usize>> {
                    s.points()
                        .iter()
                        .map(|p| {
                            points.index_of(&p.label).ok_or_else(|| {
                                Error::InvalidSupport(format!(
                                    "point {:?} is not in the cost's ground set",
                                    p.label
                                ))
                            })
                        })
                        .collect()
                };
                let ra = lookup(source)?;
                let rb = lookup(target)?;
                CostTensor::from_fn(n, source.len(), target.len(), |i, j, a, b| {
                    costs.get(i, j, ra[a], rb[b])
                })?
            }
            GroundCost::NormPlusKappa { kappa, q } => {
                check_q(*q)?;
                let xs = source.coords()?;
                let ys = target.coords()?;
                let base: Vec<Vec<f64>> = xs
                    .iter()
                    .map(|x| ys.iter().map(|y| lq_distance(x, y, *q)).collect())
                    .collect();
                build_kappa_cost(&base, *kappa, n)?
            }
            GroundCost::DiscreteEpsilon { epsilon, q } => {
                check_q(*q)?;
                if !(epsilon.is_finite() && *epsilon >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "epsilon must be finite and nonnegative, got {epsilon}"
                    )));
                }
                let xs = source.coords()?;
                let ys = target.coords()?;
                CostTensor::from_fn(n, source.len(), target.len(), |i, j, a, b| {
                    if i == j {
                        lq_distance(xs[a], ys[b], *q)
                    } else if source.point(a).coincides(target.point(b)) {
                        0.0
                    } else {
                        *epsilon
                    }
                })?
            }
        };
        t.with_supports(source, target)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("norm exponent q must be >= 1, got {q}")))
    }
}
