mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use qubo_mapf::penalty::raw_admissible;
use qubo_mapf::{fix_logical, fix_numeric_diagonal, fold, Assignment, Cell, GoalMode, GridMap};
use qubo_mapf::{PenaltyBuilder, PenaltyWeights, RobotWindow, WindowSpec};

/// Every shortest path from `start` to `goal`, as cell sequences.
fn shortest_paths(map: &GridMap, start: Cell, goal: Cell) -> Vec<Vec<Cell>> {
    let to_goal = map.distances_from(goal, &BTreeSet::new());
    let Some(d) = to_goal[map.index(start)] else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut stack = vec![vec![start]];
    while let Some(p) = stack.pop() {
        let last = *p.last().unwrap();
        if p.len() == d + 1 {
            out.push(p);
            continue;
        }
        let remaining = d - (p.len() - 1);
        for &n in map.adjacent(last) {
            if to_goal[map.index(n)] == Some(remaining - 1) {
                let mut q = p.clone();
                q.push(n);
                stack.push(q);
            }
        }
    }
    out
}

fn window(map: GridMap, start: Cell, goal: Cell, horizon: usize, allow_wait: bool) -> WindowSpec {
    WindowSpec {
        map,
        robots: vec![RobotWindow {
            robot: 0,
            start,
            goal,
            horizon,
            offset: 0,
            visited: BTreeSet::new(),
            exclude_visited: true,
            goal_mode: GoalMode::LateTime,
            allow_wait,
        }],
        parked: Vec::new(),
        weights: PenaltyWeights::default(),
        span: horizon,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn logical_fixing_keeps_every_shortest_path(
        seed in any::<u64>(), rows in 1usize..=3, cols in 1usize..=3, w in 1usize..=4, wait in any::<bool>(),
    ) {
        let mut rng = common::rng(seed);
        let map = common::random_map(&mut rng, rows, cols, 0.25);
        let free: Vec<Cell> = map.free_cells().collect();
        for &start in &free {
            for &goal in &free {
                let Some(d) = map.distance(start, goal) else { continue };
                if d == 0 || d > w {
                    continue;
                }
                let horizon = if wait { w } else { d };
                let spec = window(map.clone(), start, goal, horizon, wait);
                let (_, adm) = fix_logical(&spec).unwrap();
                for path in shortest_paths(&map, start, goal) {
                    for t in 0..=horizon {
                        let c = path[t.min(d)];
                        prop_assert!(
                            adm[0][t].contains(&c),
                            "{:?} pruned at t={} on {:?}", c, t, map.to_text()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn fold_preserves_energy(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = common::rng(seed);
        let m = common::random_model(&mut rng, n, 0.5);
        let mut one = BTreeSet::new();
        let mut zero = BTreeSet::new();
        for v in 0..n {
            match rand::Rng::gen_range(&mut rng, 0..3) {
                0 => { one.insert(v); }
                1 => { zero.insert(v); }
                _ => {}
            }
        }
        let folded = fold(&m, &one, &zero);
        let k = folded.model.num_vars();
        prop_assert_eq!(k, folded.free.len());
        for bits in 0..1u64 << k {
            let y = Assignment::from_bits(&common::bits(bits, k));
            let full = folded.expand(&y);
            prop_assert!(zero.iter().all(|&v| !full.get(v)));
            prop_assert!(one.iter().all(|&v| full.get(v)));
            prop_assert!((folded.model.energy(&y) - m.energy(&full)).abs() < 1e-9);
            prop_assert_eq!(folded.restrict(&full), y);
        }
    }

    #[test]
    fn numeric_fixing_keeps_the_minimum(seed in any::<u64>(), n in 1usize..=14, aggr in 0.5f64..4.0) {
        let mut rng = common::rng(seed);
        let mut m = common::random_model(&mut rng, n, 0.3);
        // a few strongly positive diagonals so fixing has something to do
        for v in 0..n {
            if rand::Rng::gen_bool(&mut rng, 0.3) {
                m.add_linear(v, 60.0);
            }
        }
        let fixed = fix_numeric_diagonal(&m, aggr);
        let (min, _) = common::brute_force(&m, 0.0);
        let folded = fold(&m, &BTreeSet::new(), &fixed);
        let (reduced_min, _) = common::brute_force(&folded.model, 0.0);
        prop_assert!((min - reduced_min).abs() < 1e-9, "{} vs {}", min, reduced_min);
    }

    #[test]
    fn numeric_fixing_on_window_models(seed in any::<u64>(), aggr in 0.5f64..4.0) {
        let mut rng = common::rng(seed);
        let Some(spec) = common::random_window(&mut rng) else { return Ok(()) };
        let Ok((report, adm)) = fix_logical(&spec) else { return Ok(()) };
        let model = PenaltyBuilder::new(&spec, &adm).build();
        let raw_adm = raw_admissible(&spec);
        prop_assert!(model.len() <= PenaltyBuilder::new(&spec, &raw_adm).build().len());
        let logical = fold(&model, &report.fixed_one, &report.fixed_zero);
        if logical.model.num_vars() > 16 {
            return Ok(());
        }
        let numeric = fix_numeric_diagonal(&logical.model, aggr);
        let reduced = fold(&logical.model, &BTreeSet::new(), &numeric);
        let (a, _) = common::brute_force(&logical.model, 0.0);
        let (b, _) = common::brute_force(&reduced.model, 0.0);
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }
}

#[test]
fn staircase_reduction_at_least_95() {
    let spec = common::scenario("staircase_5x5");
    let plan = qubo_mapf::plan_multi(
        &spec.map,
        &spec.robots,
        &spec.weights,
        &spec.window,
        &spec.solver,
    )
    .unwrap();
    assert!(plan.reduction_pct() >= 95.0, "{}", plan.reduction_pct());
}
