//! Several robots on one global clock: variable offsets, release times and the joint
//! planning entry point.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::grid::{manhattan, Cell, GridMap};
use crate::penalty::{GoalMode, PenaltyWeights, RobotWindow, WindowSpec};
use crate::qubo::VarIndex;
use crate::solver::SolverConfig;
use crate::window::{plan_robots, MapHook, Plan, PlanError, StaticMap, WindowConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub id: usize,
    pub start: Cell,
    pub goal: Cell,
    /// Global time at which the robot becomes active.
    pub release: usize,
}

/// Global timeline: time 0 is the first release, each robot is active over
/// `[release, release + horizon estimate]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalClock {
    pub horizon: usize,
    pub intervals: Vec<(usize, usize)>,
}

impl GlobalClock {
    /// Horizon estimate per robot: twice the Manhattan distance, at least one step.
    pub fn new(robots: &[RobotSpec]) -> Self {
        let base = robots.iter().map(|r| r.release).min().unwrap_or(0);
        let intervals: Vec<(usize, usize)> = robots
            .iter()
            .map(|r| {
                let rel = r.release - base;
                (rel, rel + (2 * manhattan(r.start, r.goal)).max(1))
            })
            .collect();
        let horizon = intervals.iter().map(|&(_, e)| e).max().unwrap_or(0);
        Self { horizon, intervals }
    }
}

/// Base variable index of every robot's block: `r * M * N * (T + 1)`.
pub fn allocate_offsets(robots: usize, rows: usize, cols: usize, horizon: usize) -> Vec<VarIndex> {
    (0..robots)
        .map(|r| r * rows * cols * (horizon + 1))
        .collect()
}

/// Start and goal cells must be free, goals distinct, and robots released together must not
/// share a start.
pub fn validate_robots(map: &GridMap, robots: &[RobotSpec]) -> Result<(), PlanError> {
    if robots.is_empty() {
        return Err(PlanError::Robots("at least one robot is required".into()));
    }
    let mut ids = BTreeSet::new();
    let mut goals: BTreeMap<Cell, usize> = BTreeMap::new();
    let mut starts: BTreeMap<(usize, Cell), usize> = BTreeMap::new();
    for r in robots {
        for c in [r.start, r.goal] {
            map.check_free(c).map_err(|source| PlanError::Robot {
                robot: r.id,
                source,
            })?;
        }
        if !ids.insert(r.id) {
            return Err(PlanError::Robots(format!("duplicate robot id {}", r.id)));
        }
        if let Some(other) = goals.insert(r.goal, r.id) {
            return Err(PlanError::Robots(format!(
                "robots {other} and {} share goal {}",
                r.id, r.goal
            )));
        }
        if let Some(other) = starts.insert((r.release, r.start), r.id) {
            return Err(PlanError::Robots(format!(
                "robots {other} and {} start on {} at the same time",
                r.id, r.start
            )));
        }
    }
    Ok(())
}

/// Joint windowed planning for all robots.
pub fn plan_multi(
    map: &GridMap,
    robots: &[RobotSpec],
    weights: &PenaltyWeights,
    window: &WindowConfig,
    solver: &SolverConfig,
) -> Result<Plan, PlanError> {
    plan_multi_with_hook(map, robots, weights, window, solver, &mut StaticMap)
}

pub fn plan_multi_with_hook(
    map: &GridMap,
    robots: &[RobotSpec],
    weights: &PenaltyWeights,
    window: &WindowConfig,
    solver: &SolverConfig,
    hook: &mut dyn MapHook,
) -> Result<Plan, PlanError> {
    validate_robots(map, robots)?;
    plan_robots(map, robots, weights, window, solver, hook)
}

/// The whole problem as one window on the global clock, without windowing: every robot
/// gets its estimated horizon at its release offset. Used for exporting the raw model.
pub fn monolithic_spec(
    map: &GridMap,
    robots: &[RobotSpec],
    weights: &PenaltyWeights,
) -> WindowSpec {
    let clock = GlobalClock::new(robots);
    WindowSpec {
        map: map.clone(),
        robots: robots
            .iter()
            .zip(&clock.intervals)
            .map(|(r, &(from, to))| RobotWindow {
                robot: r.id,
                start: r.start,
                goal: r.goal,
                horizon: to - from,
                offset: from,
                visited: BTreeSet::new(),
                exclude_visited: false,
                goal_mode: GoalMode::LateTime,
                allow_wait: true,
            })
            .collect(),
        parked: Vec::new(),
        weights: weights.clone(),
        span: clock.horizon,
    }
}
