#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use qubo_mapf::grid::euclidean;
use qubo_mapf::penalty::{ApproxMetric, GoalSchedule};
use qubo_mapf::scenario::{parse_scenario, ScenarioSpec};
use qubo_mapf::{manhattan, Cell, GoalMode, GridMap, PenaltyWeights, Plan, PlanStatus, QuboModel};
use qubo_mapf::{RobotWindow, VarLayout, WindowSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.scn"))
}

pub fn scenario(name: &str) -> ScenarioSpec {
    let path = scenario_path(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn random_map(rng: &mut impl Rng, rows: usize, cols: usize, density: f64) -> GridMap {
    let text: Vec<String> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.gen_bool(density) { '#' } else { '.' })
                .collect()
        })
        .collect();
    GridMap::parse(&text.join("\n")).unwrap()
}

pub fn random_weights(rng: &mut impl Rng) -> PenaltyWeights {
    let mut w = PenaltyWeights::default();
    for k in [
        &mut w.k_hot,
        &mut w.k_adj,
        &mut w.k_start,
        &mut w.k_goal,
        &mut w.k_lock,
        &mut w.k_bt,
        &mut w.k_tel,
        &mut w.k_approx,
        &mut w.k_coll,
        &mut w.visited_soft,
    ] {
        *k = rng.gen_range(0.1..5.0);
    }
    w.goal_ramp_max = rng.gen_range(1.0..3.0);
    w.potential_radius = rng.gen_range(0..3);
    w.goal_schedule = *[
        GoalSchedule::Late,
        GoalSchedule::Constant,
        GoalSchedule::Early,
    ]
    .choose(rng)
    .unwrap();
    w.approx_metric = *[
        ApproxMetric::Manhattan,
        ApproxMetric::Euclidean,
        ApproxMetric::Geodesic,
    ]
    .choose(rng)
    .unwrap();
    w
}

/// A random window on a grid of at most 4x4 with one to three robots, or `None` when the
/// drawn map has too few free cells.
pub fn random_window(rng: &mut impl Rng) -> Option<WindowSpec> {
    let rows = rng.gen_range(1..=4);
    let cols = rng.gen_range(1..=4);
    let map = random_map(rng, rows, cols, 0.2);
    let free: Vec<Cell> = map.free_cells().collect();
    if free.len() < 2 {
        return None;
    }
    let robots = rng.gen_range(1..=3usize.min(free.len() / 2).max(1));
    let mut goals = free.clone();
    goals.shuffle(rng);
    let mut windows = Vec::new();
    for r in 0..robots {
        let start = *free.choose(rng).unwrap();
        let visited: BTreeSet<Cell> = free.iter().copied().filter(|_| rng.gen_bool(0.2)).collect();
        windows.push(RobotWindow {
            robot: r,
            start,
            goal: goals[r],
            horizon: rng.gen_range(1..=4),
            offset: rng.gen_range(0..=2),
            visited,
            exclude_visited: false,
            goal_mode: if rng.gen_bool(0.5) {
                GoalMode::LateTime
            } else {
                GoalMode::Approximation
            },
            allow_wait: rng.gen_bool(0.5),
        });
    }
    let parked: Vec<Cell> = free.iter().copied().filter(|_| rng.gen_bool(0.1)).collect();
    let span = rng.gen_range(1..=4);
    Some(WindowSpec {
        map,
        robots: windows,
        parked,
        weights: random_weights(rng),
        span,
    })
}

/// Per robot and local step, the cells set in `x` (layout indexing of `spec`).
pub fn occupancy(spec: &WindowSpec, x: &[bool]) -> Vec<Vec<BTreeSet<Cell>>> {
    let layout = spec.layout();
    spec.robots
        .iter()
        .enumerate()
        .map(|(r, rw)| {
            (0..=rw.horizon)
                .map(|t| {
                    spec.map
                        .free_cells()
                        .filter(|&c| x[layout.index(r, rw.offset + t, c).unwrap()])
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Random bits on the free-cell variables of every robot's active steps; all else 0.
pub fn random_assignment(rng: &mut impl Rng, spec: &WindowSpec) -> Vec<bool> {
    let layout: VarLayout = spec.layout();
    let mut x = vec![false; layout.num_vars()];
    let p = rng.gen_range(0.05..0.6);
    for (r, rw) in spec.robots.iter().enumerate() {
        for t in 0..=rw.horizon {
            for c in spec.map.free_cells() {
                if rng.gen_bool(p) {
                    x[layout.index(r, rw.offset + t, c).unwrap()] = true;
                }
            }
        }
    }
    x
}

fn potential(map: &GridMap, c: Cell, radius: usize) -> f64 {
    if radius == 0 {
        return 0.0;
    }
    let r = radius as isize;
    let (mut blocked, mut total) = (0.0, 0.0);
    for di in -r..=r {
        for dj in -r..=r {
            if (di, dj) == (0, 0) {
                continue;
            }
            total += 1.0;
            let (i, j) = (c.i as isize + di, c.j as isize + dj);
            let inside = i >= 0 && j >= 0 && (i as usize) < map.rows() && (j as usize) < map.cols();
            if !inside || map.is_obstacle(Cell::new(i as usize, j as usize)) {
                blocked += 1.0;
            }
        }
    }
    blocked / total
}

fn closeness(map: &GridMap, c: Cell, goal: Cell, metric: ApproxMetric) -> f64 {
    let (rows, cols) = (map.rows() as f64, map.cols() as f64);
    let (d, d_max) = match metric {
        ApproxMetric::Manhattan => (manhattan(c, goal) as f64, rows + cols - 2.0),
        ApproxMetric::Euclidean => (
            euclidean(c, goal),
            ((rows - 1.0).powi(2) + (cols - 1.0).powi(2)).sqrt(),
        ),
        ApproxMetric::Geodesic => {
            let dist = map.distances_from(goal, &BTreeSet::new());
            let Some(d) = dist[map.index(c)] else {
                return 0.0;
            };
            (
                d as f64,
                dist.iter().flatten().copied().max().unwrap_or(0) as f64,
            )
        }
    };
    (1.0 - d / d_max.max(1.0)).max(0.0)
}

/// The window's penalty sum evaluated term by term on the decoded occupancy.
pub fn direct_energy(spec: &WindowSpec, x: &[bool]) -> f64 {
    let occ = occupancy(spec, x);
    let w = &spec.weights;
    let map = &spec.map;
    let has = |r: usize, t: usize, c: Cell| occ[r][t].contains(&c);
    let mut e = 0.0;
    for (r, rw) in spec.robots.iter().enumerate() {
        let h = rw.horizon;
        for t in 0..=h {
            let n = occ[r][t].len() as f64;
            e += w.k_hot * (1.0 - n).powi(2);
        }
        for t in 0..h {
            for &c in &occ[r][t] {
                let next = occ[r][t + 1]
                    .iter()
                    .filter(|&&d| manhattan(c, d) == 1 || (rw.allow_wait && d == c))
                    .count() as f64;
                e += w.k_adj * (1.0 - next);
            }
        }
        if has(r, 0, rw.start) {
            e -= w.k_start;
        }
        match rw.goal_mode {
            GoalMode::LateTime => {
                for t in 1..=h {
                    if has(r, t, rw.goal) {
                        let frac = t as f64 / h as f64;
                        let f = match w.goal_schedule {
                            GoalSchedule::Late => 1.0 + (w.goal_ramp_max - 1.0) * frac,
                            GoalSchedule::Constant => 1.0,
                            GoalSchedule::Early => w.goal_ramp_max - (w.goal_ramp_max - 1.0) * frac,
                        };
                        e -= w.k_goal * f;
                    }
                }
            }
            GoalMode::Approximation => {
                for &c in &occ[r][h] {
                    let reward = closeness(map, c, rw.goal, w.approx_metric)
                        * (1.0 - potential(map, c, w.potential_radius));
                    e -= w.k_approx * reward;
                }
            }
        }
        for t in 0..h {
            if has(r, t, rw.goal) && !has(r, t + 1, rw.goal) {
                e += w.k_lock;
            }
        }
        let mut visits: BTreeMap<Cell, usize> = BTreeMap::new();
        for t in 0..=h {
            for &c in &occ[r][t] {
                if c != rw.goal {
                    *visits.entry(c).or_default() += 1;
                }
                if c != rw.start && rw.visited.contains(&c) {
                    e += w.k_bt * w.visited_soft;
                }
            }
        }
        for n in visits.values() {
            e += w.k_bt * (n * n.saturating_sub(1) / 2) as f64;
        }
        for t in 0..manhattan(rw.start, rw.goal).min(h + 1) {
            if has(r, t, rw.goal) {
                e += w.k_tel;
            }
        }
    }
    // robot a at global time tau, if active
    let at = |r: usize, tau: usize| -> Option<&BTreeSet<Cell>> {
        let rw = &spec.robots[r];
        (tau >= rw.offset && tau <= rw.offset + rw.horizon).then(|| &occ[r][tau - rw.offset])
    };
    let horizon = spec.layout().horizon;
    let n = spec.robots.len();
    for a in 0..n {
        for b in a + 1..n {
            for tau in 0..=horizon {
                if let (Some(ca), Some(cb)) = (at(a, tau), at(b, tau)) {
                    e += w.k_coll * ca.intersection(cb).count() as f64;
                }
            }
        }
    }
    for a in 0..n {
        let ra = &spec.robots[a];
        if ra.goal_mode != GoalMode::LateTime || !has(a, ra.horizon, ra.goal) {
            continue;
        }
        let end_a = ra.offset + ra.horizon;
        for b in (0..n).filter(|&b| b != a) {
            let end_b = spec.robots[b].offset + spec.robots[b].horizon;
            for tau in end_a + 1..=end_b {
                if at(b, tau).is_some_and(|cb| cb.contains(&ra.goal)) {
                    e += w.k_coll;
                }
            }
        }
    }
    for &p in &spec.parked {
        for r in 0..n {
            for t in 0..=spec.robots[r].horizon {
                if has(r, t, p) {
                    e += w.k_coll;
                }
            }
        }
    }
    e
}

/// Random QUBO over `n` variables with coefficients in [-10, 10].
pub fn random_model(rng: &mut impl Rng, n: usize, density: f64) -> QuboModel {
    let mut m = QuboModel::new(n);
    m.add_constant(rng.gen_range(-5.0..5.0));
    for a in 0..n {
        m.accumulate(a, a, rng.gen_range(-10.0..10.0));
        for b in a + 1..n {
            if rng.gen_bool(density) {
                m.accumulate(a, b, rng.gen_range(-10.0..10.0));
            }
        }
    }
    m
}

pub fn bits(k: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| k >> i & 1 == 1).collect()
}

/// Minimum energy and every assignment within `tol` of it, by enumeration.
pub fn brute_force(model: &QuboModel, tol: f64) -> (f64, BTreeSet<u64>) {
    let n = model.num_vars();
    let energies: Vec<f64> = (0..1u64 << n)
        .map(|k| model.energy_bits(&bits(k, n)))
        .collect();
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let arg = (0..1u64 << n)
        .filter(|&k| energies[k as usize] <= min + tol)
        .collect();
    (min, arg)
}

/// Independent plan check for robots that reached their goal: start at release on the
/// start cell, unit moves or waits on free cells, end on the goal, and no shared cell at
/// any time, counting robots parked on their goals after arrival.
pub fn independent_check(map: &GridMap, plan: &Plan) -> Result<(), String> {
    let done: Vec<_> = plan
        .robots
        .iter()
        .filter(|r| r.status == PlanStatus::ReachedGoal)
        .collect();
    for r in &done {
        let cells = &r.path.cells;
        if r.path.start != r.release
            || cells.first() != Some(&r.start)
            || cells.last() != Some(&r.goal)
        {
            return Err(format!("robot {}: wrong endpoints", r.id));
        }
        for (t, c) in cells.iter().enumerate() {
            if !map.is_free(*c) {
                return Err(format!("robot {}: blocked cell at step {t}", r.id));
            }
        }
        for (t, pair) in cells.windows(2).enumerate() {
            if manhattan(pair[0], pair[1]) > 1 {
                return Err(format!("robot {}: jump at step {t}", r.id));
            }
        }
    }
    let horizon = done
        .iter()
        .map(|r| r.path.start + r.path.cells.len())
        .max()
        .unwrap_or(0);
    for tau in 0..horizon {
        let mut seen: BTreeMap<Cell, usize> = BTreeMap::new();
        for r in &done {
            if tau < r.path.start {
                continue;
            }
            let k = (tau - r.path.start).min(r.path.cells.len() - 1);
            if let Some(other) = seen.insert(r.path.cells[k], r.id) {
                return Err(format!(
                    "robots {other} and {} share a cell at t={tau}",
                    r.id
                ));
            }
        }
    }
    Ok(())
}
