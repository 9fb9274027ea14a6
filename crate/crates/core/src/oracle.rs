//! Ground-truth checks on tiny grids: every map up to a size limit, every start/goal pair
//! within a window, solved exactly and compared with A*.

use std::collections::BTreeSet;

use crate::classical::astar;
use crate::grid::{Cell, GridMap};
use crate::penalty::{GoalMode, PenaltyWeights, RobotWindow, WindowSpec};
use crate::preprocess::{prepare_window, Prepared};
use crate::qubo::decode;
use crate::solver::{solve_annealing, solve_exhaustive, SolverConfig, EXHAUSTIVE_MAX_VARS};
use crate::window::validate_path;

/// Largest folded model the oracle solves exhaustively.
pub const ORACLE_MAX_FREE: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCase {
    pub map: GridMap,
    pub start: Cell,
    pub goal: Cell,
    /// Shortest-path length.
    pub distance: usize,
    pub allow_wait: bool,
    pub window_len: usize,
}

impl OracleCase {
    /// One late-time window: the horizon is the distance without waiting, `window_len` with it.
    pub fn window_spec(&self, weights: &PenaltyWeights) -> WindowSpec {
        let horizon = if self.allow_wait {
            self.window_len
        } else {
            self.distance
        };
        WindowSpec {
            map: self.map.clone(),
            robots: vec![RobotWindow {
                robot: 0,
                start: self.start,
                goal: self.goal,
                horizon,
                offset: 0,
                visited: BTreeSet::new(),
                exclude_visited: true,
                goal_mode: GoalMode::LateTime,
                allow_wait: self.allow_wait,
            }],
            parked: Vec::new(),
            weights: weights.clone(),
            span: horizon,
        }
    }
}

/// Every map of at most `max_rows x max_cols` cells (all obstacle patterns), every ordered
/// pair of distinct free cells at distance `1..=window_len`, with and without waiting.
pub fn enumerate_cases(max_rows: usize, max_cols: usize, window_len: usize) -> Vec<OracleCase> {
    let mut out = Vec::new();
    for rows in 1..=max_rows {
        for cols in 1..=max_cols {
            let n = rows * cols;
            for mask in 0u32..(1 << n) {
                let text: Vec<String> = (0..rows)
                    .map(|i| {
                        (0..cols)
                            .map(|j| {
                                if mask >> (i * cols + j) & 1 == 1 {
                                    '#'
                                } else {
                                    '.'
                                }
                            })
                            .collect()
                    })
                    .collect();
                let map = GridMap::parse(&text.join("\n")).expect("generated map parses");
                let free: Vec<Cell> = map.free_cells().collect();
                for &start in &free {
                    let dist = map.distances_from(start, &BTreeSet::new());
                    for &goal in &free {
                        let Some(d) = dist[map.index(goal)] else {
                            continue;
                        };
                        if d == 0 || d > window_len {
                            continue;
                        }
                        for allow_wait in [false, true] {
                            out.push(OracleCase {
                                map: map.clone(),
                                start,
                                goal,
                                distance: d,
                                allow_wait,
                                window_len,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleOutcome {
    /// Ground state decodes to a valid path of optimal length.
    Optimal {
        free_vars: usize,
    },
    /// Folded model larger than [`ORACLE_MAX_FREE`].
    Skipped {
        free_vars: usize,
    },
    Failed(String),
}

fn prepare(
    case: &OracleCase,
    weights: &PenaltyWeights,
    aggressiveness: f64,
) -> Result<(WindowSpec, Prepared), String> {
    let spec = case.window_spec(weights);
    let prepared = prepare_window(&spec, aggressiveness).map_err(|e| e.to_string())?;
    Ok((spec, prepared))
}

/// Solves the preprocessed window exhaustively and checks the decoded ground state: valid
/// path, and arrival time equal to the A* length.
pub fn check_exhaustive(
    case: &OracleCase,
    weights: &PenaltyWeights,
    aggressiveness: f64,
) -> OracleOutcome {
    let (spec, prepared) = match prepare(case, weights, aggressiveness) {
        Ok(p) => p,
        Err(e) => return OracleOutcome::Failed(e),
    };
    let free_vars = prepared.folded.model.num_vars();
    if free_vars > ORACLE_MAX_FREE.min(EXHAUSTIVE_MAX_VARS) {
        return OracleOutcome::Skipped { free_vars };
    }
    let samples = match solve_exhaustive(&prepared.folded.model) {
        Ok(s) => s,
        Err(e) => return OracleOutcome::Failed(e.to_string()),
    };
    let best = samples.best();
    let full = prepared.folded.expand(&best.assignment);
    let occupancy = match decode(&full, &spec.layout()) {
        Ok(o) => o,
        Err(e) => return OracleOutcome::Failed(e.to_string()),
    };
    let steps = &occupancy[0];
    if let Err(v) = validate_path(&case.map, steps, case.goal, case.allow_wait) {
        return OracleOutcome::Failed(format!("{:?} at step {}", v.kind, v.t));
    }
    let cells: Vec<Cell> = steps
        .iter()
        .map(|s| *s.first().expect("one-hot checked"))
        .collect();
    if cells[0] != case.start {
        return OracleOutcome::Failed("does not start on the start cell".into());
    }
    let Some(arrival) = cells.iter().position(|&c| c == case.goal) else {
        return OracleOutcome::Failed("goal not reached".into());
    };
    if cells[arrival..].iter().any(|&c| c != case.goal) {
        return OracleOutcome::Failed("leaves the goal".into());
    }
    let optimum = match astar(&case.map, case.start, case.goal) {
        Ok(p) => p.len() - 1,
        Err(e) => return OracleOutcome::Failed(e.to_string()),
    };
    if arrival != optimum {
        return OracleOutcome::Failed(format!("length {arrival}, A* {optimum}"));
    }
    OracleOutcome::Optimal { free_vars }
}

/// Whether the annealer's best energy matches the exact minimum on the preprocessed window.
/// `None` when the model is too large for the exhaustive solver.
pub fn annealer_agrees(
    case: &OracleCase,
    weights: &PenaltyWeights,
    aggressiveness: f64,
    solver: &SolverConfig,
) -> Option<bool> {
    let (_, prepared) = prepare(case, weights, aggressiveness).ok()?;
    let model = &prepared.folded.model;
    let exact = solve_exhaustive(model).ok()?.best_energy();
    let annealed = solve_annealing(model, solver).best_energy();
    Some((annealed - exact).abs() <= 1e-9 * exact.abs().max(1.0))
}
