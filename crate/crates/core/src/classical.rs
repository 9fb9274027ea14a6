//! Classical reference planners: A*, Dijkstra and prioritized space-time A*.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use thiserror::Error;

use crate::grid::{manhattan, Cell, GridMap};
use crate::multi::RobotSpec;
use crate::postprocess::TimedPath;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassicalError {
    #[error("no path from {start} to {goal}")]
    Infeasible { start: Cell, goal: Cell },
    #[error("{0} is not a free cell")]
    BadCell(Cell),
}

/// Shortest path (cells, start and goal included) under unit step cost. Ties on `f` go to
/// the smaller row-major cell index.
pub fn astar(map: &GridMap, start: Cell, goal: Cell) -> Result<Vec<Cell>, ClassicalError> {
    best_first(map, start, goal, |c| manhattan(c, goal))
}

pub fn dijkstra(map: &GridMap, start: Cell, goal: Cell) -> Result<Vec<Cell>, ClassicalError> {
    best_first(map, start, goal, |_| 0)
}

fn best_first(
    map: &GridMap,
    start: Cell,
    goal: Cell,
    h: impl Fn(Cell) -> usize,
) -> Result<Vec<Cell>, ClassicalError> {
    for c in [start, goal] {
        if !map.is_free(c) {
            return Err(ClassicalError::BadCell(c));
        }
    }
    let n = map.rows() * map.cols();
    let mut g = vec![usize::MAX; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = map.index(start);
    g[s] = 0;
    open.push(Reverse((h(start), s)));
    while let Some(Reverse((_, k))) = open.pop() {
        if closed[k] {
            continue;
        }
        closed[k] = true;
        let c = map.cell_at(k);
        if c == goal {
            let mut path = vec![c];
            let mut cur = k;
            while let Some(p) = parent[cur] {
                path.push(map.cell_at(p));
                cur = p;
            }
            path.reverse();
            return Ok(path);
        }
        for &nb in map.adjacent(c) {
            let m = map.index(nb);
            if !closed[m] && g[k] + 1 < g[m] {
                g[m] = g[k] + 1;
                parent[m] = Some(k);
                open.push(Reverse((g[m] + h(nb), m)));
            }
        }
    }
    Err(ClassicalError::Infeasible { start, goal })
}

/// Plans robots one after another in index order with space-time A* (waiting allowed),
/// avoiding every cell earlier robots hold at the same time, including goals they have
/// parked on. Swaps between robots are not forbidden.
pub fn prioritized_plan(
    map: &GridMap,
    robots: &[RobotSpec],
) -> Vec<Result<TimedPath, ClassicalError>> {
    let mut reserved: HashSet<(usize, Cell)> = HashSet::new();
    // (cell, time from which it stays occupied)
    let mut parked: Vec<(Cell, usize)> = Vec::new();
    let mut out = Vec::with_capacity(robots.len());
    for r in robots {
        let result = space_time_astar(map, r, &reserved, &parked);
        if let Ok(path) = &result {
            for (t, c) in path.steps() {
                reserved.insert((t, c));
            }
            parked.push((r.goal, path.end()));
        }
        out.push(result);
    }
    out
}

fn space_time_astar(
    map: &GridMap,
    robot: &RobotSpec,
    reserved: &HashSet<(usize, Cell)>,
    parked: &[(Cell, usize)],
) -> Result<TimedPath, ClassicalError> {
    for c in [robot.start, robot.goal] {
        if !map.is_free(c) {
            return Err(ClassicalError::BadCell(c));
        }
    }
    let infeasible = ClassicalError::Infeasible {
        start: robot.start,
        goal: robot.goal,
    };
    let dist = map.distances_from(robot.goal, &BTreeSet::new());
    let h = |c: Cell| dist[map.index(c)];
    let Some(h0) = h(robot.start) else {
        return Err(infeasible);
    };
    let blocked = |t: usize, c: Cell| {
        reserved.contains(&(t, c)) || parked.iter().any(|&(p, from)| p == c && t >= from)
    };
    // The goal must stay free once we settle on it.
    let last_claim = reserved
        .iter()
        .filter(|(_, c)| *c == robot.goal)
        .map(|&(t, _)| t)
        .max();
    let horizon_end = reserved
        .iter()
        .map(|&(t, _)| t)
        .max()
        .unwrap_or(0)
        .max(robot.release)
        + 2 * map.rows() * map.cols();

    if blocked(robot.release, robot.start) {
        return Err(infeasible);
    }
    let n = map.rows() * map.cols();
    // node = (t - release) * n + cell index
    let mut parent: std::collections::HashMap<usize, usize> = Default::default();
    let mut closed: HashSet<usize> = HashSet::new();
    let mut open = BinaryHeap::new();
    let s = map.index(robot.start);
    open.push(Reverse((h0, 0usize, s)));
    while let Some(Reverse((_, dt, k))) = open.pop() {
        let node = dt * n + k;
        if !closed.insert(node) {
            continue;
        }
        let c = map.cell_at(k);
        let t = robot.release + dt;
        if c == robot.goal && last_claim.is_none_or(|lc| lc < t) {
            let mut cells = vec![c];
            let mut cur = node;
            while let Some(&p) = parent.get(&cur) {
                cells.push(map.cell_at(p % n));
                cur = p;
            }
            cells.reverse();
            return Ok(TimedPath::new(robot.release, cells));
        }
        if t >= horizon_end {
            continue;
        }
        let mut next: Vec<Cell> = map.adjacent(c).to_vec();
        next.push(c);
        for nb in next {
            if blocked(t + 1, nb) {
                continue;
            }
            let m = map.index(nb);
            let child = (dt + 1) * n + m;
            if closed.contains(&child) {
                continue;
            }
            let Some(hn) = h(nb) else { continue };
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(child) {
                e.insert(node);
                open.push(Reverse((dt + 1 + hn, dt + 1, m)));
            }
        }
    }
    Err(infeasible)
}

/// Total moves of a prioritized plan, when every robot succeeded.
pub fn total_moves(
    paths: &[Result<TimedPath, ClassicalError>],
    robots: &[RobotSpec],
) -> Option<usize> {
    paths
        .iter()
        .zip(robots)
        .map(|(p, r)| p.as_ref().ok().map(|p| p.end() - r.release))
        .sum()
}
