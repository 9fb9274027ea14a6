//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use qubo_mapf::bench::{run_benchmark, run_seed, BenchReport};
use qubo_mapf::oracle::{check_exhaustive, enumerate_cases, OracleOutcome};
use qubo_mapf::scenario::ScenarioSpec;
use qubo_mapf::{
    fold, plan_multi, validate_plan, Assignment, Cell, PenaltyBuilder, PenaltyWeights,
};
use qubo_mapf::{GridMap, Plan, PlanStatus, RobotSpec, WindowConfig};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn moves(m: Option<usize>) -> String {
    m.map_or("none".into(), |m| m.to_string())
}

fn plan(spec: &ScenarioSpec) -> Plan {
    plan_multi(
        &spec.map,
        &spec.robots,
        &spec.weights,
        &spec.window,
        &spec.solver,
    )
    .expect("scenario plans")
}

fn oracle() -> Outcome {
    let started = Instant::now();
    let cases = enumerate_cases(3, 3, 4);
    let weights = PenaltyWeights::default();
    let aggr = WindowConfig::default().aggressiveness;
    let mut bad = Vec::new();
    for case in &cases {
        match check_exhaustive(case, &weights, aggr) {
            OracleOutcome::Optimal { .. } => {}
            other => bad.push(format!("{other:?}")),
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let first = bad.first().cloned().unwrap_or_default();
    outcome(
        bad.is_empty() && secs < 30.0,
        format!(
            "{}/{} cases optimal in {secs:.2}s {first}",
            cases.len() - bad.len(),
            cases.len()
        ),
    )
}

fn table_row(name: &str, min_match: f64, min_reduction: f64, max_secs: Option<f64>) -> Outcome {
    let started = Instant::now();
    let spec = common::scenario(name);
    let report = run_benchmark(&spec, 20);
    let secs = started.elapsed().as_secs_f64();
    let matched = report.match_rate();
    let reduction = report.min_reduction_pct().unwrap_or(0.0);
    let in_time = max_secs.is_none_or(|m| secs < m);
    outcome(
        matched >= min_match && reduction >= min_reduction && in_time,
        format!(
            "{name}: match {:.0}% (need {:.0}%), classical {} moves, min reduction {reduction:.2}% (need {min_reduction}%), {secs:.1}s",
            matched * 100.0,
            min_match * 100.0,
            moves(report.classical.total_moves),
        ),
    )
}

fn ratio_bound() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["crossing_10x10", "corners_10x10"] {
        let report: BenchReport = run_benchmark(&common::scenario(name), 5);
        let ratio = report.ratio();
        pass &= ratio.is_some_and(|r| r <= 1.06);
        parts.push(format!(
            "{name}: best {} vs classical {}, ratio {}",
            moves(report.best_moves()),
            moves(report.classical.total_moves),
            ratio.map_or("n/a".into(), |r| format!("{r:.3}")),
        ));
    }
    outcome(pass, format!("{} (bound 1.06)", parts.join("; ")))
}

fn full_preprocess() -> Outcome {
    let spec = common::scenario("crossing_10x10");
    let plan = plan(&spec);
    let windows = plan.window_log.len();
    let solved = plan
        .window_log
        .iter()
        .filter(|w| w.preprocess.solved_by_preprocess)
        .count();
    let valid = validate_plan(&spec.map, &plan).is_ok();
    outcome(
        plan.solved_by_preprocess() && valid && plan.status() == PlanStatus::ReachedGoal,
        format!("crossing_10x10: {solved}/{windows} windows solved by preprocessing, plan valid: {valid}"),
    )
}

fn penalty_equivalence() -> Outcome {
    let mut rng = common::rng(2024);
    let (mut n, mut worst) = (0, 0.0f64);
    while n < 1000 {
        let Some(spec) = common::random_window(&mut rng) else {
            continue;
        };
        let mut spec = spec;
        spec.weights = common::random_weights(&mut rng);
        let adm = qubo_mapf::penalty::raw_admissible(&spec);
        let model = PenaltyBuilder::new(&spec, &adm).build();
        let x = common::random_assignment(&mut rng, &spec);
        worst = worst.max((model.energy_bits(&x) - common::direct_energy(&spec, &x)).abs());
        n += 1;
    }
    outcome(
        worst < 1e-9,
        format!("{n} pairs, max |difference| {worst:.2e} (tol 1e-9)"),
    )
}

fn normalization() -> Outcome {
    let mut rng = common::rng(77);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=14);
        let m = common::random_model(&mut rng, n, 0.5);
        let (_, before) = common::brute_force(&m, 1e-9);
        for scale in [1.0, 2.0, 5.0] {
            let (normed, _) = m.normalize(scale);
            if common::brute_force(&normed, 1e-9).1 != before {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("200 models x 3 scales, {mismatches} argmin mismatches"),
    )
}

fn fold_soundness() -> Outcome {
    let mut rng = common::rng(99);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let m = common::random_model(&mut rng, n, 0.5);
        let (mut one, mut zero) = (BTreeSet::new(), BTreeSet::new());
        for v in 0..n {
            match rng.gen_range(0..3) {
                0 => {
                    one.insert(v);
                }
                1 => {
                    zero.insert(v);
                }
                _ => {}
            }
        }
        let folded = fold(&m, &one, &zero);
        let k = folded.model.num_vars();
        for bits in 0..1u64 << k {
            let y = Assignment::from_bits(&common::bits(bits, k));
            worst = worst.max((folded.model.energy(&y) - m.energy(&folded.expand(&y))).abs());
            checked += 1;
        }
    }
    outcome(
        worst < 1e-9,
        format!("200 models, {checked} reduced assignments, max |difference| {worst:.2e}"),
    )
}

/// Plans from every shipped scenario plus random small instances.
fn corpus_plans() -> Vec<(GridMap, Plan)> {
    let mut out = Vec::new();
    for name in [
        "staircase_5x5",
        "ring_5x5",
        "crossing_10x10",
        "corners_10x10",
    ] {
        let mut spec = common::scenario(name);
        let base = spec.solver.seed;
        for k in 0..3 {
            spec.solver.seed = run_seed(base, k);
            out.push((spec.map.clone(), plan(&spec)));
        }
    }
    let mut rng = common::rng(31);
    for k in 0..100 {
        let size = rng.gen_range(3..=6);
        let map = common::random_map(&mut rng, size, size, 0.2);
        let mut free: Vec<Cell> = map.free_cells().collect();
        let n = rng.gen_range(1..=3);
        if free.len() < 2 * n {
            continue;
        }
        free.shuffle(&mut rng);
        let robots: Vec<RobotSpec> = (0..n)
            .map(|id| RobotSpec {
                id,
                start: free[2 * id],
                goal: free[2 * id + 1],
                release: 0,
            })
            .collect();
        let mut spec = ScenarioSpec::new(map, robots);
        spec.solver.num_reads = 30;
        spec.solver.sweeps = 300;
        spec.solver.seed = k;
        out.push((spec.map.clone(), plan(&spec)));
    }
    out
}

fn validator_completeness() -> Outcome {
    let plans = corpus_plans();
    let mut reached = 0;
    let mut failures = Vec::new();
    for (map, plan) in &plans {
        reached += plan
            .robots
            .iter()
            .filter(|r| r.status == PlanStatus::ReachedGoal)
            .count();
        if let Err(e) = common::independent_check(map, plan) {
            failures.push(e);
        }
        if let Err(e) = validate_plan(map, plan) {
            failures.push(format!("{e:?}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} plans, {reached} reached robots, {} violations {}",
            plans.len(),
            failures.len(),
            failures.first().cloned().unwrap_or_default()
        ),
    )
}

fn determinism() -> Outcome {
    let spec = common::scenario("ring_5x5");
    let plan_json = || serde_json::to_string(&plan(&spec).to_json(false)).unwrap();
    let bench_json = || serde_json::to_string(&run_benchmark(&spec, 3).to_json(false)).unwrap();
    let plans_equal = plan_json() == plan_json();
    let bench_equal = bench_json() == bench_json();
    outcome(
        plans_equal && bench_equal,
        format!("ring_5x5 plan JSON identical: {plans_equal}, bench JSON identical: {bench_equal}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle ground truth", oracle),
        ("single robot 5x5", || {
            table_row("staircase_5x5", 0.9, 95.0, Some(60.0))
        }),
        ("two robots 5x5", || table_row("ring_5x5", 0.8, 96.0, None)),
        ("10x10 ratio bound", ratio_bound),
        ("full preprocessing", full_preprocess),
        ("penalty equivalence", penalty_equivalence),
        ("normalization argmin", normalization),
        ("fold soundness", fold_soundness),
        ("validator completeness", validator_completeness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
