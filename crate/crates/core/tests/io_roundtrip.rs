use proptest::prelude::*;
use vot_core::io::{
    parse_json, plan_from_file, problem_from_file, report_to_file, save_problem, LoadOptions,
    PlanFile, Problem, ProblemFile, ReportFile,
};
use vot_core::plan::MARGINAL_TOLERANCE;
use vot_core::{solve_primal, CostTensor, Point, SupportSet, VectorMeasure};

fn weights(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), n).prop_filter_map(
        "needs positive mass",
        |w| {
            let total: f64 = w.iter().flatten().sum();
            (total > 1e-3).then(|| {
                w.into_iter()
                    .map(|r| r.into_iter().map(|x| x / total).collect())
                    .collect()
            })
        },
    )
}

fn problem() -> impl Strategy<Value = Problem> {
    (1usize..=3, 1usize..=4, 1usize..=4).prop_flat_map(|(n, m, k)| {
        (
            weights(n, m),
            weights(n, k),
            prop::collection::vec(
                prop_oneof![9 => -1e3f64..1e3, 1 => Just(f64::INFINITY)],
                n * n * m * k,
            ),
            prop::collection::vec(-1e6f64..1e6, m),
        )
            .prop_map(move |(wm, wk, costs, coords)| {
                let src = SupportSet::new(
                    coords
                        .iter()
                        .enumerate()
                        .map(|(a, &x)| Point::new(format!("s{a}"), vec![x]))
                        .collect(),
                )
                .unwrap();
                let dst = SupportSet::new((0..k).map(|b| Point::labeled(format!("t{b}"))).collect()).unwrap();
                let cost =
                    CostTensor::from_fn(n, m, k, |i, j, a, b| costs[((i * n + j) * m + a) * k + b]).unwrap();
                Problem {
                    source: VectorMeasure::new(src, wm).unwrap(),
                    target: VectorMeasure::new(dst, wk).unwrap(),
                    cost,
                    metric: None,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn save_then_load_reproduces_every_bit(p in problem()) {
        let text = save_problem(&p);
        let file: ProblemFile = parse_json(&text).unwrap();
        let loaded = problem_from_file(&file, &LoadOptions::default()).unwrap();
        for (a, b) in p.source.weights().iter().flatten().zip(loaded.source.weights().iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in p.target.weights().iter().flatten().zip(loaded.target.weights().iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        let (n, m, k) = (p.cost.species(), p.cost.rows(), p.cost.cols());
        for i in 0..n { for j in 0..n { for a in 0..m { for b in 0..k {
            prop_assert_eq!(p.cost.get(i, j, a, b).to_bits(), loaded.cost.get(i, j, a, b).to_bits());
        }}}}
        prop_assert_eq!(save_problem(&loaded), text);
    }

    #[test]
    fn plans_reloaded_from_reports_stay_feasible(p in problem()) {
        let report = solve_primal(&p.source, &p.target, &p.cost).unwrap();
        prop_assume!(report.is_optimal());
        let file = report_to_file(&report, &p.cost, None, 1e-8);
        let text = serde_json::to_string(&file).unwrap();
        let back: ReportFile = parse_json(&text).unwrap();
        prop_assert_eq!(&back, &file);
        let plan = plan_from_file(&parse_json::<PlanFile>(&text).unwrap()).unwrap();
        prop_assert_eq!(&plan, &report.plan);
        prop_assert!(plan.check_marginals(&p.source, &p.target, MARGINAL_TOLERANCE).is_feasible());
    }
}
