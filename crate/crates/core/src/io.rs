//! JSON file formats: problems, measures, metric families, plans and reports.
//!
//! Numbers are 64-bit floats. A cost entry may be the string `"inf"` for
//! `+infinity`. Species and atom indices in plans are zero-based.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::de::{self, DeserializeOwned, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dual::{
    check_dual_feasible_within, check_optimality_within, OptimalityVerdict, PotentialPair,
};
use crate::error::{Error, Result};
use crate::measures::{
    validate_measure_with, CostTensor, GroundCost, MassCheck, MetricSpec, Point, SupportSet,
    VectorMeasure, MASS_TOLERANCE,
};
use crate::plan::{CouplingTensor, PlanEntry};
use crate::solver::{SolveReport, SolveStatus};

/// A cost entry: any finite float, or `+inf` written as `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostValue(pub f64);

impl Serialize for CostValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for CostValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = CostValue;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<CostValue, E> {
                Ok(CostValue(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<CostValue, E> {
                Ok(CostValue(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<CostValue, E> {
                Ok(CostValue(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<CostValue, E> {
                if v == "inf" {
                    Ok(CostValue(f64::INFINITY))
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<usize>,
    pub points: Vec<PointFile>,
    pub weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

fn default_q() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostFile {
    /// `blocks[i][j]` is the `M x N` block `c_ij`.
    Explicit { blocks: Vec<Vec<Vec<Vec<CostValue>>>> },
    LpNormPlusKappa { kappa: f64, q: f64 },
    DiscreteEpsilon {
        epsilon: f64,
        #[serde(default = "default_q")]
        q: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub species: usize,
    pub source: MeasureFile,
    pub target: MeasureFile,
    pub cost: CostFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

/// A cost family for distance computations. Explicit blocks are square,
/// over `points`; generator kinds evaluate on point coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub species: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<PointFile>>,
    pub cost: CostFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportsFile {
    pub points: Vec<PointFile>,
}

/// A plan on its own, or any report carrying one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub species: usize,
    pub source_atoms: usize,
    pub target_atoms: usize,
    pub plan: Vec<PlanEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub mass_tolerance: f64,
    /// Require total mass one; otherwise only sign constraints are checked.
    pub require_probability: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            mass_tolerance: MASS_TOLERANCE,
            require_probability: true,
        }
    }
}

/// A loaded, validated transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub source: VectorMeasure,
    pub target: VectorMeasure,
    /// The cost family as given.
    pub cost: CostTensor,
    /// Present when the file sets an exponent; the family is then a distance family.
    pub metric: Option<MetricSpec>,
}

impl Problem {
    /// The cost actually minimized: `d^p` for metric problems, `c` otherwise.
    pub fn transport_cost(&self) -> CostTensor {
        match &self.metric {
            Some(m) => m.powered(),
            None => self.cost.clone(),
        }
    }

    pub fn p(&self) -> f64 {
        self.metric.as_ref().map_or(1.0, MetricSpec::p)
    }
}

/// Parses JSON with the failing field path and source position in errors.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    parse_json(&fs::read_to_string(path)?)
}

pub fn read_json_from<T: DeserializeOwned>(mut reader: impl Read) -> Result<T> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_json(&text)
}

fn support_from(points: &[PointFile]) -> Result<SupportSet> {
    SupportSet::new(
        points
            .iter()
            .map(|p| Point {
                label: p.label.clone(),
                coords: p.coords.clone(),
            })
            .collect(),
    )
}

fn points_to_file(s: &SupportSet) -> Vec<PointFile> {
    s.points()
        .iter()
        .map(|p| PointFile {
            label: p.label.clone(),
            coords: p.coords.clone(),
        })
        .collect()
}

fn measure_to_file(m: &VectorMeasure) -> MeasureFile {
    MeasureFile {
        species: None,
        points: points_to_file(m.support()),
        weights: m.weights().to_vec(),
        normalize: false,
    }
}

/// Builds and validates a measure from its file form.
pub fn measure_from_file(
    file: &MeasureFile,
    species: Option<usize>,
    normalize: bool,
    opts: &LoadOptions,
) -> Result<VectorMeasure> {
    let n = species.or(file.species).unwrap_or(file.weights.len());
    if file.weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n} weight rows, found {}",
            file.weights.len()
        )));
    }
    let support = support_from(&file.points)?;
    let mut m = VectorMeasure::new(support, file.weights.clone())?;
    if normalize || file.normalize {
        m = m.normalized()?;
    }
    let check = if opts.require_probability {
        MassCheck::ProbabilityWithin(opts.mass_tolerance)
    } else {
        MassCheck::Unnormalized
    };
    let verdict = validate_measure_with(&m, check);
    if verdict.is_ok() {
        Ok(m)
    } else {
        Err(Error::InvalidMeasure(verdict.violations))
    }
}

fn explicit_blocks(blocks: &[Vec<Vec<Vec<CostValue>>>]) -> Vec<Vec<Vec<Vec<f64>>>> {
    blocks
        .iter()
        .map(|row| {
            row.iter()
                .map(|b| b.iter().map(|r| r.iter().map(|c| c.0).collect()).collect())
                .collect()
        })
        .collect()
}

fn check_block_grid(blocks: &[Vec<Vec<Vec<CostValue>>>], n: usize) -> Result<()> {
    if blocks.len() != n || blocks.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "cost must have {n}x{n} blocks"
        )));
    }
    Ok(())
}

/// Evaluates a cost description between two supports.
pub fn cost_from_file(
    cost: &CostFile,
    n: usize,
    source: &SupportSet,
    target: &SupportSet,
) -> Result<CostTensor> {
    match cost {
        CostFile::Explicit { blocks } => {
            check_block_grid(blocks, n)?;
            CostTensor::from_blocks_shaped(explicit_blocks(blocks), source.len(), target.len())?
                .with_supports(source, target)
        }
        CostFile::LpNormPlusKappa { kappa, q } => GroundCost::NormPlusKappa {
            kappa: *kappa,
            q: *q,
        }
        .tensor(n, source, target),
        CostFile::DiscreteEpsilon { epsilon, q } => GroundCost::DiscreteEpsilon {
            epsilon: *epsilon,
            q: *q,
        }
        .tensor(n, source, target),
    }
}

pub fn problem_from_file(file: &ProblemFile, opts: &LoadOptions) -> Result<Problem> {
    let n = file.species;
    if n == 0 {
        return Err(Error::InvalidParameter("species must be >= 1".into()));
    }
    let source = measure_from_file(&file.source, Some(n), file.normalize, opts)
        .map_err(|e| context("source", e))?;
    let target = measure_from_file(&file.target, Some(n), file.normalize, opts)
        .map_err(|e| context("target", e))?;
    let cost = cost_from_file(&file.cost, n, source.support(), target.support())?;
    let metric = file.p.map(|p| MetricSpec::new(cost.clone(), p)).transpose()?;
    Ok(Problem {
        source,
        target,
        cost,
        metric,
    })
}

fn context(which: &str, e: Error) -> Error {
    match e {
        Error::DimensionMismatch(msg) => Error::DimensionMismatch(format!("{which}: {msg}")),
        Error::InvalidSupport(msg) => Error::InvalidSupport(format!("{which}: {msg}")),
        other => other,
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    load_problem_with(path, &LoadOptions::default())
}

pub fn load_problem_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Problem> {
    let file: ProblemFile = read_json(path)?;
    problem_from_file(&file, opts)
}

pub fn load_problem_from(reader: impl Read, opts: &LoadOptions) -> Result<Problem> {
    let file: ProblemFile = read_json_from(reader)?;
    problem_from_file(&file, opts)
}

/// Problem file with the cost written out as explicit blocks.
pub fn problem_to_file(problem: &Problem) -> ProblemFile {
    let blocks = problem
        .cost
        .blocks()
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|b| {
                    b.into_iter()
                        .map(|r| r.into_iter().map(CostValue).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    ProblemFile {
        species: problem.source.species(),
        source: measure_to_file(&problem.source),
        target: measure_to_file(&problem.target),
        cost: CostFile::Explicit { blocks },
        p: problem.metric.as_ref().map(MetricSpec::p),
        normalize: false,
    }
}

pub fn save_problem(problem: &Problem) -> String {
    serde_json::to_string_pretty(&problem_to_file(problem)).expect("problem files always serialize")
}

/// A cost family that can be evaluated on any supports drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricFamily {
    pub species: usize,
    pub ground: GroundCost,
    pub p: Option<f64>,
}

impl MetricFamily {
    pub fn spec(&self, source: &SupportSet, target: &SupportSet, p: f64) -> Result<MetricSpec> {
        MetricSpec::new(self.ground.tensor(self.species, source, target)?, p)
    }
}

pub fn metric_from_file(file: &MetricFile) -> Result<MetricFamily> {
    let n = file.species;
    if n == 0 {
        return Err(Error::InvalidParameter("species must be >= 1".into()));
    }
    let ground = match &file.cost {
        CostFile::Explicit { blocks } => {
            let points = file.points.as_ref().ok_or_else(|| {
                Error::InvalidSupport("explicit metric blocks need a \"points\" list".into())
            })?;
            let points = support_from(points)?;
            check_block_grid(blocks, n)?;
            let costs =
                CostTensor::from_blocks_shaped(explicit_blocks(blocks), points.len(), points.len())?;
            GroundCost::Explicit { points, costs }
        }
        CostFile::LpNormPlusKappa { kappa, q } => GroundCost::NormPlusKappa {
            kappa: *kappa,
            q: *q,
        },
        CostFile::DiscreteEpsilon { epsilon, q } => GroundCost::DiscreteEpsilon {
            epsilon: *epsilon,
            q: *q,
        },
    };
    Ok(MetricFamily {
        species: n,
        ground,
        p: file.p,
    })
}

pub fn load_metric(path: impl AsRef<Path>) -> Result<MetricFamily> {
    metric_from_file(&read_json(path)?)
}

pub fn load_measure(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<VectorMeasure> {
    let file: MeasureFile = read_json(path)?;
    measure_from_file(&file, None, false, opts)
}

pub fn load_support(path: impl AsRef<Path>) -> Result<SupportSet> {
    let file: SupportsFile = read_json(path)?;
    support_from(&file.points)
}

pub fn plan_from_file(file: &PlanFile) -> Result<CouplingTensor> {
    CouplingTensor::new(
        file.species,
        file.source_atoms,
        file.target_atoms,
        file.plan.iter().copied(),
    )
}

pub fn plan_to_file(plan: &CouplingTensor) -> PlanFile {
    PlanFile {
        species: plan.species(),
        source_atoms: plan.rows(),
        target_atoms: plan.cols(),
        plan: plan.entries().to_vec(),
    }
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<CouplingTensor> {
    plan_from_file(&read_json(path)?)
}

/// Machine-readable solve report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub status: String,
    /// `None` when infeasible.
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub dual_value: Option<f64>,
    pub gap: Option<f64>,
    pub pivots: usize,
    pub species: usize,
    pub source_atoms: usize,
    pub target_atoms: usize,
    pub plan: Vec<PlanEntry>,
    pub potentials: Option<PotentialPair>,
    pub dual_feasible: Option<bool>,
    pub slackness: Option<SlacknessFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlacknessFile {
    pub ok: bool,
    /// `[i, j, a, b, mass, slack]` for every entry that is not tight.
    pub violations: Vec<(usize, usize, usize, usize, f64, f64)>,
}

impl From<&OptimalityVerdict> for SlacknessFile {
    fn from(v: &OptimalityVerdict) -> Self {
        SlacknessFile {
            ok: v.ok,
            violations: v
                .violations
                .iter()
                .map(|x| (x.i, x.j, x.a, x.b, x.mass, x.slack))
                .collect(),
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Report for a solve, with certificates evaluated against `cost`.
pub fn report_to_file(report: &SolveReport, cost: &CostTensor, p: Option<f64>, tol: f64) -> ReportFile {
    let optimal = report.status == SolveStatus::Optimal;
    let (dual_feasible, slackness) = if optimal {
        let feas = check_dual_feasible_within(&report.potentials, cost, tol);
        let slack = check_optimality_within(&report.plan, &report.potentials, cost, tol);
        (Some(feas.ok), Some(SlacknessFile::from(&slack)))
    } else {
        (None, None)
    };
    let distance = match p {
        Some(p) if optimal => Some(report.primal_value.max(0.0).powf(1.0 / p)),
        _ => None,
    };
    ReportFile {
        status: match report.status {
            SolveStatus::Optimal => "optimal".into(),
            SolveStatus::Infeasible => "infeasible".into(),
        },
        value: finite(report.primal_value),
        distance,
        p,
        dual_value: finite(report.dual_value),
        gap: finite(report.gap),
        pivots: report.pivots,
        species: report.plan.species(),
        source_atoms: report.plan.rows(),
        target_atoms: report.plan.cols(),
        plan: report.plan.entries().to_vec(),
        potentials: optimal.then(|| report.potentials.clone()),
        dual_feasible,
        slackness,
    }
}
