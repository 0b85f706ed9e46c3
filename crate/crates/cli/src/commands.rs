use std::path::Path;

use serde::Serialize;
use serde_json::json;

use vot_core::dual::DUAL_FEASIBILITY_TOLERANCE;
use vot_core::io::{
    load_measure, load_metric, load_plan, load_problem_with, load_support, plan_to_file,
    report_to_file, LoadOptions, MetricFamily, ReportFile,
};
use vot_core::measures::MASS_TOLERANCE;
use vot_core::metrics::{check_mti, glue_plans_within};
use vot_core::random::{random_instance, rng};
use vot_core::solver::{solve_primal_with, SolverOptions};
use vot_core::{
    brute_force_oracle, check_dual_feasible, check_metric_axioms, check_optimality, tuple_distance,
    Error, MetricSpec, Result, SolveReport, SupportSet, VectorMeasure,
};

use crate::output::{emit, significant};
use crate::Outcome;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Absolute tolerance on total masses.
    pub mass: f64,
    /// Tolerance for marginals, dual feasibility and slackness.
    pub certificate: f64,
}

impl Tolerances {
    pub fn from_override(tol: Option<f64>) -> Self {
        match tol {
            Some(t) => Self {
                mass: t,
                certificate: t,
            },
            None => Self {
                mass: MASS_TOLERANCE,
                certificate: DUAL_FEASIBILITY_TOLERANCE,
            },
        }
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            mass_tolerance: self.mass,
            ..SolverOptions::default()
        }
    }
}

fn summarize(report: &ReportFile) {
    match (report.value, &report.slackness) {
        (Some(v), Some(s)) => eprintln!(
            "optimal value {} (gap {:.3e}, {} pivots); slackness {}",
            significant(v),
            report.gap.unwrap_or(f64::NAN),
            report.pivots,
            if s.ok { "OK" } else { "VIOLATED" }
        ),
        _ => eprintln!("infeasible: every transference plan uses an infinite cost"),
    }
}

pub fn solve(problem: &Path, out: Option<&Path>, tol: &Tolerances) -> Result<Outcome> {
    let opts = LoadOptions {
        mass_tolerance: tol.mass,
        require_probability: true,
    };
    let problem = load_problem_with(problem, &opts)?;
    let cost = problem.transport_cost();
    let report = solve_primal_with(&problem.source, &problem.target, &cost, &tol.solver())?;
    let p = problem.metric.as_ref().map(MetricSpec::p);
    let file = report_to_file(&report, &cost, p, tol.certificate);
    emit(&file, out)?;
    summarize(&file);
    Ok(if report.is_optimal() {
        Outcome::Ok
    } else {
        Outcome::Infeasible
    })
}

fn unnormalized(tol: &Tolerances) -> LoadOptions {
    LoadOptions {
        mass_tolerance: tol.mass,
        require_probability: false,
    }
}

fn species_match(family: &MetricFamily, n: usize) -> Result<()> {
    if family.species == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "metric has {} species, inputs have {n}",
            family.species
        )))
    }
}

/// Solves under `d^p`; prints the distance and optionally writes the report.
fn distance_report(
    mu: &VectorMeasure,
    nu: &VectorMeasure,
    spec: &MetricSpec,
    out: Option<&Path>,
    tol: &Tolerances,
) -> Result<Outcome> {
    let cost = spec.powered();
    let report: SolveReport = solve_primal_with(mu, nu, &cost, &tol.solver())?;
    let file = report_to_file(&report, &cost, Some(spec.p()), tol.certificate);
    if let Some(path) = out {
        emit(&file, Some(path))?;
    }
    match file.distance {
        Some(d) => {
            println!("{}", significant(d));
            Ok(Outcome::Ok)
        }
        None => {
            eprintln!("infeasible: every transference plan uses an infinite cost");
            Ok(Outcome::Infeasible)
        }
    }
}

pub fn distance(
    a: &Path,
    b: &Path,
    metric: &Path,
    p: Option<f64>,
    out: Option<&Path>,
    tol: &Tolerances,
) -> Result<Outcome> {
    let family = load_metric(metric)?;
    let mu = load_measure(a, &unnormalized(tol))?;
    let nu = load_measure(b, &unnormalized(tol))?;
    species_match(&family, mu.species())?;
    species_match(&family, nu.species())?;
    let p = p.or(family.p).unwrap_or(1.0);
    let spec = family.spec(mu.support(), nu.support(), p)?;
    distance_report(&mu, &nu, &spec, out, tol)
}

pub fn tuple(
    x: &Path,
    y: &Path,
    metric: &Path,
    p: Option<f64>,
    out: Option<&Path>,
    tol: &Tolerances,
) -> Result<Outcome> {
    let family = load_metric(metric)?;
    let xs = load_support(x)?;
    let ys = load_support(y)?;
    species_match(&family, xs.len())?;
    let p = p.or(family.p).unwrap_or(1.0);
    let spec = family.spec(&xs, &ys, p)?;
    let d = tuple_distance(&xs, &ys, &spec)?;
    if let Some(path) = out {
        let file = report_to_file(&d.report, &spec.powered(), Some(p), tol.certificate);
        emit(&file, Some(path))?;
    }
    println!("{}", significant(d.value));
    Ok(Outcome::Ok)
}

fn label(s: &SupportSet, a: usize) -> &str {
    &s.point(a).label
}

pub fn audit(metric: &Path, supports: &Path, full: bool, out: Option<&Path>) -> Result<Outcome> {
    let family = load_metric(metric)?;
    let points = load_support(supports)?;
    let spec = family.spec(&points, &points, family.p.unwrap_or(1.0))?;
    let labels: Vec<&str> = points.points().iter().map(|p| p.label.as_str()).collect();
    let (mti, body, ok) = if full {
        let verdict = check_metric_axioms(&spec)?;
        let ok = verdict.all_hold();
        eprintln!(
            "symmetric: {}; mixed triangle: {}; zero diagonal: {}; off-diagonal positive: {}",
            verdict.symmetric, verdict.mti.satisfied, verdict.zero_diagonal, verdict.off_diagonal_positive
        );
        if verdict.is_pseudodistance() {
            eprintln!("off-diagonal distances vanish: W_p is only a pseudodistance");
        }
        let body = json!({ "mode": "metric", "points": labels, "verdict": verdict });
        (verdict.mti, body, ok)
    } else {
        let report = check_mti(&spec)?;
        let ok = report.satisfied;
        let body = json!({ "mode": "mti", "points": labels, "report": report });
        (report, body, ok)
    };
    for v in mti.violations.iter().take(10) {
        eprintln!(
            "mixed triangle violated for species ({},{},{}) at points ({},{},{}): {} > {}",
            v.i + 1,
            v.j + 1,
            v.k + 1,
            label(&points, v.x),
            label(&points, v.y),
            label(&points, v.z),
            significant(v.lhs),
            significant(v.rhs)
        );
    }
    if mti.violations.len() > 10 {
        eprintln!("... {} violations in total", mti.violations.len());
    }
    emit(&body, out)?;
    Ok(if ok { Outcome::Ok } else { Outcome::Violations })
}

#[derive(Serialize)]
struct GlueFile {
    composed: vot_core::io::PlanFile,
    /// `[i, j, k, x, y, z, mass]`
    three_point_mass: Vec<(usize, usize, usize, usize, usize, usize, f64)>,
}

pub fn glue(
    plan_ab: &Path,
    plan_bc: &Path,
    nu: &Path,
    out: Option<&Path>,
    tol: &Tolerances,
) -> Result<Outcome> {
    let ab = load_plan(plan_ab)?;
    let bc = load_plan(plan_bc)?;
    let nu = load_measure(nu, &unnormalized(tol))?;
    let glued = glue_plans_within(&ab, &bc, &nu, tol.certificate)?;
    let file = GlueFile {
        composed: plan_to_file(&glued.composed),
        three_point_mass: glued
            .three_point_mass
            .iter()
            .map(|e| (e.i, e.j, e.k, e.x, e.y, e.z, e.mass))
            .collect(),
    };
    emit(&file, out)?;
    Ok(Outcome::Ok)
}

pub fn selftest(seed: u64, count: usize) -> Result<Outcome> {
    let mut r = rng(seed);
    let mut failures = 0;
    let mut worst_oracle = 0.0_f64;
    let mut worst_gap = 0.0_f64;
    for t in 0..count {
        let n = 1 + t % 2;
        let inst = random_instance(&mut r, n, 4 / n, 0.2);
        let report = solve_primal_with(&inst.source, &inst.target, &inst.cost, &SolverOptions::default())?;
        let oracle = brute_force_oracle(&inst.source, &inst.target, &inst.cost)?;
        let err = (report.primal_value - oracle).abs() / (1.0 + oracle.abs());
        let gap = report.gap.abs() / (1.0 + report.primal_value.abs());
        worst_oracle = worst_oracle.max(err);
        worst_gap = worst_gap.max(gap);
        let certified = check_dual_feasible(&report.potentials, &inst.cost).ok
            && check_optimality(&report.plan, &report.potentials, &inst.cost).ok;
        if err > 1e-9 || !report.gap_within_tolerance() || !certified {
            failures += 1;
            eprintln!("instance {t}: simplex {} vs oracle {oracle}, gap {}", report.primal_value, report.gap);
        }
    }
    println!(
        "selftest seed {seed}: {count} instances, worst oracle error {worst_oracle:.2e}, worst gap {worst_gap:.2e}: {}",
        if failures == 0 { "PASS" } else { "FAIL" }
    );
    Ok(if failures == 0 {
        Outcome::Ok
    } else {
        Outcome::Violations
    })
}
