//! Repairs applied to decoded solver output: one-hot continuity, invalid-move detection and
//! wait insertion for vertex clashes between robots.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, GridMap};

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepairError {
    #[error("step 0 does not hold the expected cell {expected}")]
    StartMismatch { expected: Cell },
    #[error("no cell active at step {t}")]
    EmptyStep { t: usize },
    #[error("step {t}: {count} active cells continue the path")]
    Ambiguous { t: usize, count: usize },
    #[error("step {t}: no active cell continues the path")]
    Broken { t: usize },
}

/// Collapses every step to a single cell by keeping the one cell that continues the path.
///
/// `prev` is the cell expected at step 0. Steps that already hold exactly one cell are
/// kept as they are; invalid moves there are left to [`detect_invalid_move`].
pub fn fix_one_hot_continuity(
    occupancy: &[BTreeSet<Cell>],
    prev: Cell,
    map: &GridMap,
    allow_wait: bool,
) -> Result<Vec<Cell>, RepairError> {
    let mut path = Vec::with_capacity(occupancy.len());
    let mut last = prev;
    for (t, cells) in occupancy.iter().enumerate() {
        let kept = if t == 0 {
            if !cells.contains(&prev) {
                return Err(RepairError::StartMismatch { expected: prev });
            }
            prev
        } else {
            match cells.len() {
                0 => return Err(RepairError::EmptyStep { t }),
                1 => *cells.first().unwrap(),
                _ => {
                    let mut it = cells.iter().filter(|&&c| map.is_move(last, c, allow_wait));
                    match (it.next(), it.next()) {
                        (Some(&c), None) => c,
                        (None, _) => return Err(RepairError::Broken { t }),
                        (Some(_), Some(_)) => {
                            let count = 2 + it.count();
                            return Err(RepairError::Ambiguous { t, count });
                        }
                    }
                }
            }
        };
        path.push(kept);
        last = kept;
    }
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OneHot,
    Adjacency,
    Obstacle,
    EarlyGoal,
    VertexCollision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    pub kind: ViolationKind,
}

/// First step that leaves the grid, enters an obstacle, or is not a legal move from the
/// previous step.
pub fn detect_invalid_move(path: &[Cell], map: &GridMap, allow_wait: bool) -> Option<Violation> {
    for (t, &c) in path.iter().enumerate() {
        if !map.is_free(c) {
            return Some(Violation {
                t,
                kind: ViolationKind::Obstacle,
            });
        }
        if t > 0 && !map.is_move(path[t - 1], c, allow_wait) {
            return Some(Violation {
                t,
                kind: ViolationKind::Adjacency,
            });
        }
    }
    None
}

/// A robot's cells on the global clock: `cells[k]` is occupied at time `start + k`.
/// After its last step the robot stays on its final cell.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedPath {
    pub start: usize,
    pub cells: Vec<Cell>,
}

impl TimedPath {
    pub fn new(start: usize, cells: Vec<Cell>) -> Self {
        Self { start, cells }
    }

    /// Global time of the last step.
    pub fn end(&self) -> usize {
        self.start + self.cells.len().saturating_sub(1)
    }

    /// Cell at global time `t`: `None` before the path starts, the final cell after it ends.
    pub fn at(&self, t: usize) -> Option<Cell> {
        if t < self.start || self.cells.is_empty() {
            return None;
        }
        Some(self.cells[(t - self.start).min(self.cells.len() - 1)])
    }

    pub fn last(&self) -> Option<Cell> {
        self.cells.last().copied()
    }

    /// `(t, cell)` pairs.
    pub fn steps(&self) -> impl Iterator<Item = (usize, Cell)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(|(k, &c)| (self.start + k, c))
    }

    /// The cell sequence with consecutive repeats removed.
    pub fn route(&self) -> Vec<Cell> {
        let mut out = self.cells.clone();
        out.dedup();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexConflict {
    pub t: usize,
    pub cell: Cell,
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapConflict {
    /// The swap happens between `t` and `t + 1`.
    pub t: usize,
    pub a: usize,
    pub b: usize,
}

/// Every vertex conflict, robots parked on their final cells included.
pub fn vertex_conflicts(paths: &[TimedPath]) -> Vec<VertexConflict> {
    let horizon = paths.iter().map(TimedPath::end).max().unwrap_or(0);
    let mut out = Vec::new();
    for t in 0..=horizon {
        let mut seen: BTreeMap<Cell, usize> = BTreeMap::new();
        for (r, p) in paths.iter().enumerate() {
            if let Some(c) = p.at(t) {
                if let Some(&a) = seen.get(&c) {
                    out.push(VertexConflict {
                        t,
                        cell: c,
                        a,
                        b: r,
                    });
                } else {
                    seen.insert(c, r);
                }
            }
        }
    }
    out
}

pub fn swap_conflicts(paths: &[TimedPath]) -> Vec<SwapConflict> {
    let horizon = paths.iter().map(TimedPath::end).max().unwrap_or(0);
    let mut out = Vec::new();
    for t in 0..horizon {
        for a in 0..paths.len() {
            for b in a + 1..paths.len() {
                let (Some(a0), Some(a1), Some(b0), Some(b1)) = (
                    paths[a].at(t),
                    paths[a].at(t + 1),
                    paths[b].at(t),
                    paths[b].at(t + 1),
                ) else {
                    continue;
                };
                if a0 != a1 && a0 == b1 && a1 == b0 {
                    out.push(SwapConflict { t, a, b });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClashReport {
    /// `(robot, global time)` of each inserted wait.
    pub waits: Vec<(usize, usize)>,
    pub unresolved: Vec<VertexConflict>,
    pub swaps: Vec<SwapConflict>,
}

impl ClashReport {
    pub fn is_clean(&self) -> bool {
        self.unresolved.is_empty()
    }
}

/// Default wait budget: two map diameters per robot.
pub fn default_wait_budget(map: &GridMap, robots: usize) -> usize {
    2 * robots * map.max_manhattan()
}

/// Inserts waits until no two robots share a cell at the same time, or the budget runs out.
///
/// At the earliest conflict the higher-index robot waits one more step on the cell before
/// the conflict cell, unless the conflict cell is the lower-index robot's final cell. Cell sequences never change, only their timing.
/// Conflicts no wait can fix (a robot parked on the cell, or the conflict at a robot's
/// first step) are reported unresolved.
pub fn resolve_clash_wait(paths: &mut [TimedPath], budget: usize) -> ClashReport {
    let mut report = ClashReport::default();
    let mut spent = 0;
    let mut blocked: BTreeSet<VertexConflict> = BTreeSet::new();
    loop {
        let next = vertex_conflicts(paths)
            .into_iter()
            .find(|c| !blocked.contains(c));
        let Some(conflict) = next else { break };
        let parked = [conflict.a, conflict.b]
            .iter()
            .any(|&r| conflict.t > paths[r].end());
        // A robot arriving on its own final cell has to let the other one through first.
        let mut order = [conflict.b, conflict.a];
        if paths[conflict.a].last() == Some(conflict.cell) {
            order.swap(0, 1);
        }
        let waiter = order.into_iter().find(|&r| {
            let p = &paths[r];
            !parked && conflict.t > p.start && conflict.t <= p.end()
        });
        match waiter {
            Some(r) if spent < budget => {
                let p = &mut paths[r];
                let k = conflict.t - p.start;
                let before = p.cells[k - 1];
                p.cells.insert(k, before);
                report.waits.push((r, conflict.t));
                spent += 1;
            }
            _ => {
                blocked.insert(conflict);
                report.unresolved.push(conflict);
            }
        }
    }
    report.swaps = swap_conflicts(paths);
    report
}

impl PartialOrd for VertexConflict {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VertexConflict {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.t, self.cell, self.a, self.b).cmp(&(other.t, other.cell, other.a, other.b))
    }
}
