//! Time-window planning: each window is built, preprocessed, sampled, repaired and
//! validated on its own, then stitched onto the robots' paths.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::grid::{manhattan, Cell, GridError, GridMap};
use crate::multi::RobotSpec;
use crate::penalty::{GoalMode, PenaltyError, PenaltyWeights, RobotWindow, WindowSpec};
use crate::postprocess::{
    default_wait_budget, detect_invalid_move, fix_one_hot_continuity, resolve_clash_wait,
    vertex_conflicts, ClashReport, TimedPath, Violation, ViolationKind,
};
use crate::preprocess::{prepare_window, FixReport, Prepared};
use crate::qubo::{decode, Assignment};
use crate::solver::{sub_seed, Backend, Sampler, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid window config: {0}")]
    Config(String),
    #[error(transparent)]
    Weights(#[from] PenaltyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("robot {robot}: {source}")]
    Robot { robot: usize, source: GridError },
    #[error("{0}")]
    Robots(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_len: usize,
    pub max_windows: usize,
    pub max_retries: usize,
    /// Outlier threshold, in standard deviations, for numeric diagonal fixing.
    pub aggressiveness: f64,
    /// Let robots wait in place inside a window. Off by default: waiting then only comes
    /// from goal parking and clash wait insertion, which keeps the reachable layers thin.
    pub allow_wait: bool,
    /// Retry a failed window once with doubled length before giving up.
    pub escalate: bool,
    /// Distinct low-energy samples examined per solver call.
    pub candidates: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_len: 6,
            max_windows: 20,
            max_retries: 5,
            aggressiveness: 3.0,
            allow_wait: false,
            escalate: true,
            candidates: 8,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.window_len < 2 {
            return Err(PlanError::Config("window_len must be at least 2".into()));
        }
        if self.max_windows == 0 || self.max_retries == 0 || self.candidates == 0 {
            return Err(PlanError::Config(
                "max_windows, max_retries and candidates must be positive".into(),
            ));
        }
        if self.aggressiveness.is_nan() || self.aggressiveness < 0.0 {
            return Err(PlanError::Config(
                "aggressiveness must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    ReachedGoal,
    MaxWindowsExhausted,
    UnresolvedConflict,
    Infeasible,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::ReachedGoal => "reached_goal",
            PlanStatus::MaxWindowsExhausted => "max_windows_exhausted",
            PlanStatus::UnresolvedConflict => "unresolved_conflict",
            PlanStatus::Infeasible => "infeasible",
        }
    }
}

/// Where a stretch of a robot's path came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub window: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotPlan {
    pub id: usize,
    pub start: Cell,
    pub goal: Cell,
    pub release: usize,
    pub path: TimedPath,
    pub status: PlanStatus,
    pub segments: Vec<Segment>,
}

impl RobotPlan {
    /// Moves from release to arrival, waits included; `None` unless the goal was reached.
    pub fn moves(&self) -> Option<usize> {
        (self.status == PlanStatus::ReachedGoal).then(|| self.path.end() - self.release)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowEvent {
    pub attempt: usize,
    pub robot: Option<usize>,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub backend: Backend,
    pub num_vars: usize,
    pub best_energy: f64,
    pub histogram: Vec<(f64, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub index: usize,
    pub start_time: usize,
    pub window_len: usize,
    pub escalated: bool,
    pub robots: Vec<usize>,
    pub goal_modes: Vec<GoalMode>,
    pub preprocess: FixReport,
    /// Solver invocations, retries included.
    pub solver_calls: usize,
    pub stats: Option<SolveStats>,
    pub events: Vec<WindowEvent>,
    pub success: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub robots: Vec<RobotPlan>,
    pub window_log: Vec<WindowRecord>,
    pub clash: ClashReport,
}

impl Plan {
    pub fn status(&self) -> PlanStatus {
        self.robots
            .iter()
            .map(|r| r.status)
            .max()
            .unwrap_or(PlanStatus::ReachedGoal)
    }

    pub fn all_reached(&self) -> bool {
        self.status() == PlanStatus::ReachedGoal
    }

    /// Sum of per-robot moves, when every robot reached its goal.
    pub fn total_moves(&self) -> Option<usize> {
        self.robots.iter().map(RobotPlan::moves).sum()
    }

    pub fn original_vars(&self) -> usize {
        self.window_log
            .iter()
            .map(|w| w.preprocess.original_count)
            .sum()
    }

    pub fn reduced_vars(&self) -> usize {
        self.window_log
            .iter()
            .map(|w| w.preprocess.reduced_count)
            .sum()
    }

    pub fn reduction_pct(&self) -> f64 {
        crate::preprocess::reduction_pct(self.original_vars(), self.reduced_vars())
    }

    pub fn solved_by_preprocess(&self) -> bool {
        !self.window_log.is_empty()
            && self
                .window_log
                .iter()
                .all(|w| w.preprocess.solved_by_preprocess)
    }

    pub fn paths(&self) -> Vec<TimedPath> {
        self.robots.iter().map(|r| r.path.clone()).collect()
    }

    /// JSON view: per-robot `[t, i, j]` arrays, statuses, preprocessing totals and the
    /// window log. Wall-clock times only with `timings`.
    pub fn to_json(&self, timings: bool) -> Value {
        let robots: Vec<Value> = self
            .robots
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "start": [r.start.i, r.start.j],
                    "goal": [r.goal.i, r.goal.j],
                    "release": r.release,
                    "status": r.status,
                    "moves": r.moves(),
                    "path": r.path.steps().map(|(t, c)| [t, c.i, c.j]).collect::<Vec<_>>(),
                })
            })
            .collect();
        let windows: Vec<Value> = self
            .window_log
            .iter()
            .map(|w| {
                let mut v = serde_json::to_value(w).expect("window record serializes");
                if timings {
                    v["elapsed_ms"] = json!(w.elapsed.as_secs_f64() * 1e3);
                }
                v
            })
            .collect();
        json!({
            "status": self.status(),
            "total_moves": self.total_moves(),
            "preprocess": {
                "original": self.original_vars(),
                "reduced": self.reduced_vars(),
                "reduction_pct": self.reduction_pct(),
                "solved_by_preprocess": self.solved_by_preprocess(),
            },
            "robots": robots,
            "clash": self.clash,
            "window_log": windows,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StitchError {
    #[error("window starts at {found}, path ends at {expected}")]
    BoundaryMismatch { expected: Cell, found: Cell },
    #[error("empty window path")]
    Empty,
}

/// Appends a window path, dropping its first cell, which must repeat the path's last one.
/// Returns the global time range the window now covers.
pub fn stitch(path: &mut TimedPath, window: &[Cell]) -> Result<(usize, usize), StitchError> {
    let Some(&first) = window.first() else {
        return Err(StitchError::Empty);
    };
    match path.last() {
        None => path.cells.extend_from_slice(window),
        Some(last) if last == first => path.cells.extend_from_slice(&window[1..]),
        Some(last) => {
            return Err(StitchError::BoundaryMismatch {
                expected: last,
                found: first,
            })
        }
    }
    Ok((path.end() + 1 - window.len(), path.end()))
}

/// Checks a per-step occupancy: exactly one cell per step, legal moves, no obstacles, and no
/// goal claim earlier than the Manhattan bound from the first cell.
pub fn validate_path(
    map: &GridMap,
    steps: &[BTreeSet<Cell>],
    goal: Cell,
    allow_wait: bool,
) -> Result<(), Violation> {
    let mut cells = Vec::with_capacity(steps.len());
    for (t, s) in steps.iter().enumerate() {
        if s.len() != 1 {
            return Err(Violation {
                t,
                kind: ViolationKind::OneHot,
            });
        }
        cells.push(*s.first().unwrap());
    }
    validate_cells(map, &cells, goal, allow_wait)
}

pub fn validate_cells(
    map: &GridMap,
    cells: &[Cell],
    goal: Cell,
    allow_wait: bool,
) -> Result<(), Violation> {
    if let Some(v) = detect_invalid_move(cells, map, allow_wait) {
        return Err(v);
    }
    if let Some(&first) = cells.first() {
        let bound = manhattan(first, goal);
        if let Some(t) = cells.iter().position(|&c| c == goal) {
            if t < bound {
                return Err(Violation {
                    t,
                    kind: ViolationKind::EarlyGoal,
                });
            }
        }
    }
    Ok(())
}

/// Full check of a plan's successful robots: each path starts on its start at release, is
/// legal step by step (waits allowed), ends on its goal, and no two of them ever share a
/// cell. Returns the offending robot index with the violation.
pub fn validate_plan(map: &GridMap, plan: &Plan) -> Result<(), (usize, Violation)> {
    let mut reached = Vec::new();
    let mut owners = Vec::new();
    for (k, r) in plan.robots.iter().enumerate() {
        if r.status != PlanStatus::ReachedGoal {
            continue;
        }
        let bad = |t, kind| (k, Violation { t, kind });
        if r.path.start != r.release || r.path.cells.first() != Some(&r.start) {
            return Err(bad(r.release, ViolationKind::OneHot));
        }
        if r.path.last() != Some(r.goal) {
            return Err(bad(r.path.end(), ViolationKind::OneHot));
        }
        validate_cells(map, &r.path.cells, r.goal, true).map_err(|v| (k, v))?;
        reached.push(r.path.clone());
        owners.push(k);
    }
    if let Some(c) = vertex_conflicts(&reached).first() {
        return Err((
            owners[c.b],
            Violation {
                t: c.t,
                kind: ViolationKind::VertexCollision,
            },
        ));
    }
    Ok(())
}

/// Called before each window; may return a replacement map for that window onwards.
pub trait MapHook {
    fn before_window(&mut self, window: usize, time: usize, map: &GridMap) -> Option<GridMap>;
}

/// The default hook: the map never changes.
pub struct StaticMap;

impl MapHook for StaticMap {
    fn before_window(&mut self, _: usize, _: usize, _: &GridMap) -> Option<GridMap> {
        None
    }
}

impl<F> MapHook for F
where
    F: FnMut(usize, usize, &GridMap) -> Option<GridMap>,
{
    fn before_window(&mut self, window: usize, time: usize, map: &GridMap) -> Option<GridMap> {
        self(window, time, map)
    }
}

/// Plans one robot; the single-robot case of [`plan_robots`].
pub fn plan_single(
    map: &GridMap,
    robot: &RobotSpec,
    weights: &PenaltyWeights,
    window: &WindowConfig,
    solver: &SolverConfig,
) -> Result<Plan, PlanError> {
    plan_robots(
        map,
        std::slice::from_ref(robot),
        weights,
        window,
        solver,
        &mut StaticMap,
    )
}

struct Track {
    spec: RobotSpec,
    path: TimedPath,
    visited: BTreeSet<Cell>,
    status: Option<PlanStatus>,
    segments: Vec<Segment>,
}

/// Windowed joint planning on a global clock.
///
/// Windows advance in lockstep. Each one holds every released, unfinished robot; robots
/// released while a window runs join at the next boundary. A robot whose goal is within
/// reach plans exactly up to its arrival and is parked afterwards; the others plan a full
/// window toward the goal. Failed windows are retried with fresh seeds, then once more at
/// double length; robots still without a valid path end as `max_windows_exhausted` while
/// the rest continue. Wait insertion runs over the finished paths as a safety net.
pub fn plan_robots(
    map: &GridMap,
    robots: &[RobotSpec],
    weights: &PenaltyWeights,
    window: &WindowConfig,
    solver: &SolverConfig,
    hook: &mut dyn MapHook,
) -> Result<Plan, PlanError> {
    window.validate()?;
    weights.validate()?;
    solver.validate()?;
    for r in robots {
        for c in [r.start, r.goal] {
            map.check_free(c).map_err(|source| PlanError::Robot {
                robot: r.id,
                source,
            })?;
        }
    }

    let mut map = map.clone();
    let mut tracks: Vec<Track> = robots
        .iter()
        .map(|r| {
            let status = if map.distance(r.start, r.goal).is_none() {
                Some(PlanStatus::Infeasible)
            } else if r.start == r.goal {
                Some(PlanStatus::ReachedGoal)
            } else {
                None
            };
            Track {
                spec: *r,
                path: TimedPath::new(r.release, vec![r.start]),
                visited: BTreeSet::new(),
                status,
                segments: Vec::new(),
            }
        })
        .collect();

    let mut log: Vec<WindowRecord> = Vec::new();
    let mut escalated = false;
    let mut tau = robots.iter().map(|r| r.release).min().unwrap_or(0);

    loop {
        let pending: Vec<usize> = (0..tracks.len())
            .filter(|&k| tracks[k].status.is_none())
            .collect();
        if pending.is_empty() {
            break;
        }
        let active: Vec<usize> = pending
            .iter()
            .copied()
            .filter(|&k| tracks[k].spec.release <= tau)
            .collect();
        if active.is_empty() {
            tau = pending
                .iter()
                .map(|&k| tracks[k].spec.release)
                .min()
                .unwrap();
            continue;
        }
        if log.len() >= window.max_windows {
            for k in pending {
                tracks[k].status = Some(PlanStatus::MaxWindowsExhausted);
            }
            break;
        }
        if let Some(m) = hook.before_window(log.len(), tau, &map) {
            map = m;
        }
        for &k in &active {
            let t = &mut tracks[k];
            let last = t.path.last().unwrap();
            while t.path.end() < tau {
                t.path.cells.push(last);
            }
            if map.distance(last, t.spec.goal).is_none() {
                t.status = Some(PlanStatus::Infeasible);
            }
        }
        let active: Vec<usize> = active
            .into_iter()
            .filter(|&k| tracks[k].status.is_none())
            .collect();
        if active.is_empty() {
            continue;
        }

        let mut len = window.window_len;
        let mut outcome = run_window(
            &map,
            &tracks,
            &active,
            tau,
            len,
            false,
            log.len(),
            weights,
            window,
            solver,
        );
        let failed = outcome.paths.iter().any(Option::is_none);
        if failed && window.escalate && !escalated && log.len() + 1 < window.max_windows {
            escalated = true;
            log.push(outcome.record);
            len *= 2;
            outcome = run_window(
                &map,
                &tracks,
                &active,
                tau,
                len,
                true,
                log.len(),
                weights,
                window,
                solver,
            );
        }
        let index = log.len();
        log.push(outcome.record);

        let mut span = 0;
        for (slot, &k) in active.iter().enumerate() {
            let t = &mut tracks[k];
            match &outcome.paths[slot] {
                Some(cells) => {
                    let (from, to) =
                        stitch(&mut t.path, cells).expect("window starts where the path ends");
                    t.segments.push(Segment {
                        window: index,
                        from,
                        to,
                    });
                    t.visited.extend(cells.iter().copied());
                    span = span.max(cells.len() - 1);
                    if t.path.last() == Some(t.spec.goal) {
                        t.status = Some(PlanStatus::ReachedGoal);
                    }
                }
                None => t.status = Some(PlanStatus::MaxWindowsExhausted),
            }
        }
        tau += span.max(1);
    }

    let reached: Vec<usize> = (0..tracks.len())
        .filter(|&k| tracks[k].status == Some(PlanStatus::ReachedGoal))
        .collect();
    let mut paths: Vec<TimedPath> = reached.iter().map(|&k| tracks[k].path.clone()).collect();
    let mut clash = resolve_clash_wait(&mut paths, default_wait_budget(&map, robots.len()));
    for (slot, &k) in reached.iter().enumerate() {
        tracks[k].path = std::mem::take(&mut paths[slot]);
    }
    for c in &mut clash.unresolved {
        c.a = reached[c.a];
        c.b = reached[c.b];
        let loser = if tracks[c.a].path.last() == Some(c.cell) {
            c.a
        } else {
            c.b
        };
        tracks[loser].status = Some(PlanStatus::UnresolvedConflict);
    }
    for s in &mut clash.swaps {
        s.a = reached[s.a];
        s.b = reached[s.b];
    }
    for w in &mut clash.waits {
        w.0 = reached[w.0];
    }

    Ok(Plan {
        robots: tracks
            .into_iter()
            .map(|t| RobotPlan {
                id: t.spec.id,
                start: t.spec.start,
                goal: t.spec.goal,
                release: t.spec.release,
                path: t.path,
                status: t.status.expect("every robot ends with a status"),
                segments: t.segments,
            })
            .collect(),
        window_log: log,
        clash,
    })
}

struct WindowOutcome {
    record: WindowRecord,
    /// Per active robot, its window path (clipped at goal arrival) or `None` on failure.
    paths: Vec<Option<Vec<Cell>>>,
}

/// Per-robot window problem for the robot's current position.
pub(crate) fn robot_window(
    map: &GridMap,
    robot: usize,
    cur: Cell,
    goal: Cell,
    visited: &BTreeSet<Cell>,
    len: usize,
    allow_wait: bool,
) -> Option<RobotWindow> {
    let mut excluded = visited.clone();
    excluded.remove(&cur);
    excluded.remove(&goal);
    let (distance, exclude_visited) = match map.distances_from(cur, &excluded)[map.index(goal)] {
        Some(d) => (d, true),
        None => (map.distance(cur, goal)?, false),
    };
    let late = distance <= len;
    Some(RobotWindow {
        robot,
        start: cur,
        goal,
        horizon: if late && !allow_wait {
            distance.max(1)
        } else {
            len
        },
        offset: 0,
        visited: visited.clone(),
        exclude_visited,
        goal_mode: if late {
            GoalMode::LateTime
        } else {
            GoalMode::Approximation
        },
        allow_wait,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_window(
    map: &GridMap,
    tracks: &[Track],
    active: &[usize],
    tau: usize,
    len: usize,
    escalated: bool,
    index: usize,
    weights: &PenaltyWeights,
    cfg: &WindowConfig,
    solver: &SolverConfig,
) -> WindowOutcome {
    let clock = Instant::now();
    let robots: Vec<RobotWindow> = active
        .iter()
        .map(|&k| {
            let t = &tracks[k];
            robot_window(
                map,
                t.spec.id,
                t.path.last().unwrap(),
                t.spec.goal,
                &t.visited,
                len,
                cfg.allow_wait,
            )
            .expect("feasibility checked before the window")
        })
        .collect();
    let mut parked: Vec<Cell> = tracks
        .iter()
        .filter(|t| t.status == Some(PlanStatus::ReachedGoal))
        .map(|t| t.spec.goal)
        .collect();
    // Robots released during this window sit on their start until the next boundary.
    parked.extend(
        tracks
            .iter()
            .filter(|t| t.status.is_none() && t.spec.release > tau && t.spec.release < tau + len)
            .map(|t| t.spec.start),
    );
    let spec = WindowSpec {
        map: map.clone(),
        robots,
        parked,
        weights: weights.clone(),
        span: len,
    };
    let mut record = WindowRecord {
        index,
        start_time: tau,
        window_len: len,
        escalated,
        robots: spec.robots.iter().map(|r| r.robot).collect(),
        goal_modes: spec.robots.iter().map(|r| r.goal_mode).collect(),
        preprocess: FixReport::default(),
        solver_calls: 0,
        stats: None,
        events: Vec::new(),
        success: false,
        elapsed: Duration::ZERO,
    };
    let failed = |mut record: WindowRecord, n: usize| {
        record.elapsed = clock.elapsed();
        WindowOutcome {
            record,
            paths: vec![None; n],
        }
    };

    let prepared = match prepare_window(&spec, cfg.aggressiveness) {
        Ok(p) => p,
        Err(e) => {
            record.events.push(WindowEvent {
                attempt: 0,
                robot: None,
                kind: "preprocess_error".into(),
                detail: e.to_string(),
            });
            return failed(record, active.len());
        }
    };
    record.preprocess = prepared.report.clone();

    let mut fallback: Option<Vec<Vec<Cell>>> = None;
    let mut partial: Vec<Option<Vec<Cell>>> = vec![None; active.len()];
    let free = prepared.folded.model.num_vars();
    let attempts = if free == 0 { 1 } else { cfg.max_retries };
    let mut accepted: Option<Vec<Vec<Cell>>> = None;

    'attempts: for attempt in 0..attempts {
        let candidates: Vec<Assignment> = if free == 0 {
            vec![Assignment::new()]
        } else {
            let scale = weights.norm_scale.resolve(free);
            let (normalized, factor) = prepared.folded.model.normalize(scale);
            let seed = sub_seed(solver.seed, ((index as u64) << 16) | attempt as u64);
            let samples = match solver.with_seed(seed).sample(&normalized) {
                Ok(s) => s,
                Err(e) => {
                    record.events.push(WindowEvent {
                        attempt,
                        robot: None,
                        kind: "solver_error".into(),
                        detail: e.to_string(),
                    });
                    break;
                }
            };
            record.solver_calls += 1;
            record.stats = Some(SolveStats {
                backend: solver.backend,
                num_vars: free,
                best_energy: samples.best_energy() / factor,
                histogram: samples
                    .energy_histogram()
                    .into_iter()
                    .map(|(e, n)| (e / factor, n))
                    .collect(),
            });
            samples
                .samples
                .iter()
                .take(cfg.candidates)
                .map(|s| s.assignment.clone())
                .collect()
        };

        for (rank, x) in candidates.iter().enumerate() {
            let decoded = decode_candidate(map, &spec, &prepared, x, tau, tracks);
            for (slot, r) in decoded.paths.iter().enumerate() {
                match r {
                    Ok(p) => {
                        if partial[slot].is_none() {
                            partial[slot] = Some(p.clone());
                        }
                    }
                    Err(detail) if rank == 0 => record.events.push(WindowEvent {
                        attempt,
                        robot: Some(spec.robots[slot].robot),
                        kind: "invalid".into(),
                        detail: detail.clone(),
                    }),
                    Err(_) => {}
                }
            }
            if rank == 0 {
                for &(slot, t) in &decoded.repairs {
                    record.events.push(WindowEvent {
                        attempt,
                        robot: Some(spec.robots[slot].robot),
                        kind: "continuity_repair".into(),
                        detail: format!("step {t}"),
                    });
                }
            }
            if decoded.paths.iter().all(Result::is_ok) {
                let paths: Vec<Vec<Cell>> = decoded.paths.into_iter().map(Result::unwrap).collect();
                if decoded.collisions == 0 {
                    accepted = Some(paths);
                    break 'attempts;
                }
                if fallback.is_none() {
                    record.events.push(WindowEvent {
                        attempt,
                        robot: None,
                        kind: "collision".into(),
                        detail: format!("{} vertex conflicts in sample {rank}", decoded.collisions),
                    });
                    fallback = Some(paths);
                }
            }
        }
        if attempt + 1 < attempts {
            record.events.push(WindowEvent {
                attempt,
                robot: None,
                kind: "retry".into(),
                detail: "no valid collision-free sample".into(),
            });
        }
    }

    record.elapsed = clock.elapsed();
    if let Some(paths) = accepted.or(fallback) {
        record.success = true;
        return WindowOutcome {
            record,
            paths: paths.into_iter().map(Some).collect(),
        };
    }
    WindowOutcome {
        record,
        paths: partial,
    }
}

struct Decoded {
    paths: Vec<Result<Vec<Cell>, String>>,
    collisions: usize,
    /// `(robot slot, step)` of each continuity repair.
    repairs: Vec<(usize, usize)>,
}

fn decode_candidate(
    map: &GridMap,
    spec: &WindowSpec,
    prepared: &Prepared,
    x: &Assignment,
    tau: usize,
    tracks: &[Track],
) -> Decoded {
    let full = prepared.folded.expand(x);
    let occupancy = decode(&full, &spec.layout()).expect("folded indices lie inside the layout");
    let mut repairs = Vec::new();
    let paths: Vec<Result<Vec<Cell>, String>> = spec
        .robots
        .iter()
        .enumerate()
        .map(|(slot, rw)| {
            let steps = &occupancy[slot][rw.offset..=rw.end()];
            for (t, s) in steps.iter().enumerate() {
                if s.len() > 1 {
                    repairs.push((slot, t));
                }
            }
            let mut cells = fix_one_hot_continuity(steps, rw.start, map, rw.allow_wait)
                .map_err(|e| e.to_string())?;
            validate_cells(map, &cells, rw.goal, rw.allow_wait)
                .map_err(|v| format!("{:?} at step {}", v.kind, v.t))?;
            if let Some(arrival) = cells.iter().position(|&c| c == rw.goal) {
                cells.truncate(arrival + 1);
            } else if rw.goal_mode == GoalMode::LateTime {
                return Err("goal not reached".into());
            }
            Ok(cells)
        })
        .collect();

    let mut timed: Vec<TimedPath> = tracks
        .iter()
        .filter(|t| t.status == Some(PlanStatus::ReachedGoal))
        .map(|t| TimedPath::new(tau, vec![t.spec.goal]))
        .collect();
    timed.extend(
        paths
            .iter()
            .filter_map(|p| p.as_ref().ok())
            .map(|cells| TimedPath::new(tau, cells.clone())),
    );
    let collisions = vertex_conflicts(&timed).len();
    Decoded {
        paths,
        collisions,
        repairs,
    }
}
