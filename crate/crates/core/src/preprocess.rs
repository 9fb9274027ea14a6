//! Variable fixing: structural (reachability) and numeric (diagonal outliers), plus folding
//! fixed variables into the remaining coefficients.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{manhattan, Cell, GridError, LayerMode};
use crate::penalty::{Admissible, GoalMode, PenaltyBuilder, PenaltyError, WindowSpec};
use crate::qubo::{Assignment, QuboModel, VarIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error(transparent)]
    Spec(#[from] PenaltyError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("robot {robot}: goal {goal} cannot be reached within {horizon} steps")]
    InfeasibleWindow {
        robot: usize,
        goal: Cell,
        horizon: usize,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixReport {
    #[serde(skip)]
    pub fixed_one: BTreeSet<VarIndex>,
    #[serde(skip)]
    pub fixed_zero: BTreeSet<VarIndex>,
    #[serde(rename = "original")]
    pub original_count: usize,
    #[serde(rename = "reduced")]
    pub reduced_count: usize,
    pub reduction_pct: f64,
    pub solved_by_preprocess: bool,
}

impl FixReport {
    fn with_counts(mut self, original: usize, reduced: usize) -> Self {
        self.original_count = original;
        self.reduced_count = reduced;
        self.reduction_pct = reduction_pct(original, reduced);
        self.solved_by_preprocess = reduced == 0;
        self
    }
}

pub fn reduction_pct(original: usize, reduced: usize) -> f64 {
    if original == 0 {
        0.0
    } else {
        100.0 * (original - reduced) as f64 / original as f64
    }
}

/// Structural fixing from reachability.
///
/// Each robot keeps, at local step `t`, only the cells of its reachability layer `t` (cells
/// of earlier windows removed when the robot excludes them). In late-time mode cells that
/// cannot still reach the goal by the end of the local horizon are dropped as well. Goal
/// cells before the Manhattan bound are dropped, the start at step 0 and every singleton
/// layer are fixed to 1. Everything else in the layout is fixed to 0.
pub fn fix_logical(spec: &WindowSpec) -> Result<(FixReport, Admissible), PreprocessError> {
    spec.validate()?;
    let layout = spec.layout();
    let mut admissible: Admissible = Vec::with_capacity(spec.robots.len());
    let mut report = FixReport::default();

    for rw in &spec.robots {
        let mut excluded: BTreeSet<Cell> = if rw.exclude_visited {
            rw.visited.clone()
        } else {
            BTreeSet::new()
        };
        excluded.remove(&rw.start);
        let table = spec.map.bfs_layers(
            rw.start,
            rw.horizon,
            rw.allow_wait,
            LayerMode::Frontier(&excluded),
        )?;
        let mut layers = table.into_layers();

        let bound = manhattan(rw.start, rw.goal);
        for (t, layer) in layers.iter_mut().enumerate() {
            if t < bound {
                layer.retain(|&c| c != rw.goal);
            }
        }

        if rw.goal_mode == GoalMode::LateTime {
            let excluded_goal: BTreeSet<Cell> =
                excluded.iter().copied().filter(|&c| c != rw.goal).collect();
            let to_goal = spec.map.distances_from(rw.goal, &excluded_goal);
            for (t, layer) in layers.iter_mut().enumerate() {
                let slack = rw.horizon - t;
                layer.retain(|&c| to_goal[spec.map.index(c)].is_some_and(|d| d <= slack));
            }
            if layers.iter().any(Vec::is_empty) {
                return Err(PreprocessError::InfeasibleWindow {
                    robot: rw.robot,
                    goal: rw.goal,
                    horizon: rw.horizon,
                });
            }
        }
        admissible.push(layers);
    }

    for (r, layers) in admissible.iter().enumerate() {
        let offset = spec.robots[r].offset;
        for (t, layer) in layers.iter().enumerate() {
            if layer.len() == 1 {
                report
                    .fixed_one
                    .insert(layout.index_unchecked(r, offset + t, layer[0]));
            }
        }
    }
    let admitted: BTreeSet<VarIndex> = admissible
        .iter()
        .enumerate()
        .flat_map(|(r, layers)| {
            let offset = spec.robots[r].offset;
            layers.iter().enumerate().flat_map(move |(t, layer)| {
                layer
                    .iter()
                    .map(move |&c| layout.index_unchecked(r, offset + t, c))
            })
        })
        .collect();
    report.fixed_zero = (0..layout.num_vars())
        .filter(|v| !admitted.contains(v))
        .collect();
    let free = admitted.len() - report.fixed_one.len();
    Ok((report.with_counts(layout.num_vars(), free), admissible))
}

/// A model with fixed variables substituted and the rest renumbered densely.
#[derive(Clone, Debug, PartialEq)]
pub struct Folded {
    pub model: QuboModel,
    /// `free[k]` is the original index of folded variable `k`.
    pub free: Vec<VarIndex>,
    pub fixed_one: BTreeSet<VarIndex>,
    pub original_vars: usize,
}

impl Folded {
    /// Full assignment over the original indices: fixed ones plus the folded bits.
    pub fn expand(&self, folded: &Assignment) -> Assignment {
        let mut out = Assignment::from_ones(self.fixed_one.iter().copied());
        for k in folded.ones() {
            out.set(self.free[k], true);
        }
        out
    }

    /// Folded assignment read off a full one.
    pub fn restrict(&self, full: &Assignment) -> Assignment {
        Assignment::from_ones(
            self.free
                .iter()
                .enumerate()
                .filter(|(_, &v)| full.get(v))
                .map(|(k, _)| k),
        )
    }
}

/// Substitutes fixed values into `model`.
///
/// Zero-fixed variables lose every incident entry. One-fixed variables move their diagonal
/// into the constant and each coupling onto the partner's diagonal. The variables still
/// referenced afterwards become the folded model's variables, in increasing original order.
pub fn fold(
    model: &QuboModel,
    fixed_one: &BTreeSet<VarIndex>,
    fixed_zero: &BTreeSet<VarIndex>,
) -> Folded {
    debug_assert!(
        fixed_one.is_disjoint(fixed_zero),
        "fixed sets must be disjoint"
    );
    let mut sub = QuboModel::new(model.num_vars());
    sub.add_constant(model.constant());
    for (a, b, w) in model.iter() {
        if fixed_zero.contains(&a) || fixed_zero.contains(&b) {
            continue;
        }
        match (fixed_one.contains(&a), fixed_one.contains(&b)) {
            (true, true) => sub.add_constant(w),
            (true, false) => sub.add_linear(b, w),
            (false, true) => sub.add_linear(a, w),
            (false, false) => sub.accumulate(a, b, w),
        }
    }
    let free: Vec<VarIndex> = sub.support().into_iter().collect();
    let position: BTreeMap<VarIndex, usize> =
        free.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut dense = QuboModel::new(free.len());
    dense.add_constant(sub.constant());
    for (a, b, w) in sub.iter() {
        dense.accumulate(position[&a], position[&b], w);
    }
    Folded {
        model: dense,
        free,
        fixed_one: fixed_one.clone(),
        original_vars: model.num_vars(),
    }
}

/// Iteratively fixes to 0 variables whose diagonal is an outlier (above
/// `mean + aggressiveness * stddev` of all diagonals) and which no choice of the other
/// variables can make worth setting. Returns the indices fixed, in `model`'s numbering.
///
/// The compensation test alone guarantees soundness: if `q_vv + sum of negative couplings
/// of v > 0`, turning `v` off lowers the energy of every assignment with `v = 1`.
pub fn fix_numeric_diagonal(model: &QuboModel, aggressiveness: f64) -> BTreeSet<VarIndex> {
    let mut fixed = BTreeSet::new();
    let mut work = model.clone();
    loop {
        let support: Vec<VarIndex> = work.support().into_iter().collect();
        if support.len() < 2 {
            break;
        }
        let diag: Vec<f64> = support.iter().map(|&v| work.coefficient(v, v)).collect();
        let n = diag.len() as f64;
        let mean = diag.iter().sum::<f64>() / n;
        let sd = (diag.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        let threshold = mean + aggressiveness * sd;

        let mut negative: BTreeMap<VarIndex, f64> = BTreeMap::new();
        for (a, b, w) in work.quadratic_terms() {
            if w < 0.0 {
                *negative.entry(a).or_default() += w;
                *negative.entry(b).or_default() += w;
            }
        }
        let round: BTreeSet<VarIndex> = support
            .iter()
            .zip(&diag)
            .filter(|&(v, &d)| d > threshold && d + negative.get(v).copied().unwrap_or(0.0) > 0.0)
            .map(|(&v, _)| v)
            .collect();
        if round.is_empty() {
            break;
        }
        log::debug!("numeric fixing round: {} vars fixed to 0", round.len());
        let mut next = QuboModel::new(work.num_vars());
        next.add_constant(work.constant());
        for (a, b, w) in work.iter() {
            if !round.contains(&a) && !round.contains(&b) {
                next.accumulate(a, b, w);
            }
        }
        work = next;
        fixed.extend(round);
    }
    fixed
}

/// A window ready for sampling.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub report: FixReport,
    pub admissible: Admissible,
    /// The penalty model over admissible variables, in layout numbering.
    pub model: QuboModel,
    pub folded: Folded,
}

/// Builds the window QUBO over the admissible variables, then folds logical and numeric
/// fixes into it.
pub fn prepare_window(spec: &WindowSpec, aggressiveness: f64) -> Result<Prepared, PreprocessError> {
    let (mut report, admissible) = fix_logical(spec)?;
    let model = PenaltyBuilder::new(spec, &admissible).build();
    let mut folded = fold(&model, &report.fixed_one, &report.fixed_zero);
    let numeric = fix_numeric_diagonal(&folded.model, aggressiveness);
    if !numeric.is_empty() {
        report
            .fixed_zero
            .extend(numeric.iter().map(|&k| folded.free[k]));
        folded = fold(&model, &report.fixed_one, &report.fixed_zero);
    }
    let original = report.original_count;
    let report = report.with_counts(original, folded.model.num_vars());
    Ok(Prepared {
        report,
        admissible,
        model,
        folded,
    })
}
