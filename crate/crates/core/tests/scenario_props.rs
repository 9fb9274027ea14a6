mod common;

use proptest::prelude::*;
use qubo_mapf::bench::run_benchmark;
use qubo_mapf::penalty::NormScale;
use qubo_mapf::scenario::{parse_scenario, serialize_scenario, ScenarioSpec};
use qubo_mapf::{Backend, Cell, Connectivity, RobotSpec};
use rand::seq::SliceRandom;
use rand::Rng;

fn random_spec(rng: &mut impl Rng) -> Option<ScenarioSpec> {
    let rows = rng.gen_range(2..=6);
    let cols = rng.gen_range(2..=6);
    let mut map = common::random_map(rng, rows, cols, 0.25);
    if rng.gen_bool(0.3) {
        map = map.with_connectivity(Connectivity::Eight);
    }
    let mut free: Vec<Cell> = map.free_cells().collect();
    let n = rng.gen_range(1..=3);
    if free.len() < 2 * n {
        return None;
    }
    free.shuffle(rng);
    let robots = (0..n)
        .map(|k| RobotSpec {
            id: k * 3 + rng.gen_range(0..3),
            start: free[2 * k],
            goal: free[2 * k + 1],
            release: rng.gen_range(0..3),
        })
        .collect();
    let mut s = ScenarioSpec::new(map, robots);
    s.name = format!("case_{}", rng.gen_range(0..1000));
    s.weights = common::random_weights(rng);
    if rng.gen_bool(0.5) {
        s.weights.k_obs = Some(rng.gen_range(0.1..4.0));
    }
    if rng.gen_bool(0.5) {
        s.weights.norm_scale = NormScale::Fixed(rng.gen_range(0.5..8.0));
    }
    s.window.window_len = rng.gen_range(2..12);
    s.window.max_windows = rng.gen_range(1..50);
    s.window.max_retries = rng.gen_range(1..5);
    s.window.aggressiveness = rng.gen_range(0.5..6.0);
    s.window.allow_wait = rng.gen_bool(0.5);
    s.window.escalate = rng.gen_bool(0.5);
    s.window.candidates = rng.gen_range(1..10);
    s.solver.backend = if rng.gen_bool(0.5) {
        Backend::Annealer
    } else {
        Backend::Exhaustive
    };
    s.solver.num_reads = rng.gen_range(1..200);
    s.solver.sweeps = rng.gen_range(1..2000);
    let lo = rng.gen_range(0.01..1.0);
    s.solver.beta_range = (lo, lo + rng.gen_range(0.5..20.0));
    s.solver.seed = rng.gen();
    s.repeats = rng.gen_range(1..40);
    Some(s)
}

proptest! {
    #[test]
    fn parse_inverts_serialize(seed in any::<u64>()) {
        let Some(spec) = random_spec(&mut common::rng(seed)) else { return Ok(()) };
        let text = serialize_scenario(&spec);
        let back = parse_scenario(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(serialize_scenario(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_robot_bench_never_beats_classical(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let map = common::random_map(&mut rng, 5, 5, 0.2);
        let mut free: Vec<Cell> = map.free_cells().collect();
        if free.len() < 2 {
            return Ok(());
        }
        free.shuffle(&mut rng);
        let mut spec = ScenarioSpec::new(map, vec![RobotSpec { id: 0, start: free[0], goal: free[1], release: 0 }]);
        spec.solver.num_reads = 20;
        spec.solver.sweeps = 200;
        spec.solver.seed = seed;
        let report = run_benchmark(&spec, 3);
        let Some(classical) = report.classical.total_moves else { return Ok(()) };
        for run in report.runs.iter().filter(|r| r.success) {
            prop_assert!(run.total_moves.unwrap() >= classical);
        }
    }
}

#[test]
fn bench_json_is_byte_identical() {
    let spec = common::scenario("ring_5x5");
    let a = serde_json::to_string(&run_benchmark(&spec, 3).to_json(false)).unwrap();
    let b = serde_json::to_string(&run_benchmark(&spec, 3).to_json(false)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn corpus_round_trips() {
    for name in [
        "staircase_5x5",
        "ring_5x5",
        "crossing_10x10",
        "corners_10x10",
    ] {
        let spec = common::scenario(name);
        assert_eq!(
            parse_scenario(&serialize_scenario(&spec)).unwrap(),
            spec,
            "{name}"
        );
    }
}
