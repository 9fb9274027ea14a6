//! Penalty terms of the path-planning QUBO, emitted into a [`QuboModel`] for one window.
//!
//! Every term is built over the admissible cells of each robot and time step only. A cell
//! that is not admissible behaves like a variable fixed to 0, so building over admissible
//! sets gives the same model as building over the raw grid and folding the zeros away.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{euclidean, manhattan, Cell, GridMap};
use crate::qubo::{QuboModel, VarIndex, VarLayout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("penalty weight `{0}` must be strictly positive")]
    NonPositiveWeight(&'static str),
    #[error("goal_ramp_max must be at least 1")]
    RampBelowOne,
    #[error("robot {robot}: {msg}")]
    BadRobot { robot: usize, msg: String },
}

/// How the goal reward is spread over the window when the goal is reachable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSchedule {
    /// Reward grows linearly from `k_goal` to `goal_ramp_max * k_goal` at the last step.
    #[default]
    Late,
    /// Same reward at every step; kept for experiments only.
    Constant,
    /// Largest reward at step 1, decaying to `k_goal`; kept for experiments only.
    Early,
}

/// Distance used by the approximation reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxMetric {
    #[default]
    Manhattan,
    Euclidean,
    /// Shortest-path distance around obstacles.
    Geodesic,
}

/// Normalization scale applied to the folded model before sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScale {
    /// 2.0 below 80 free variables, 1.0 otherwise.
    #[default]
    Auto,
    Fixed(f64),
}

impl NormScale {
    pub fn resolve(self, free_vars: usize) -> f64 {
        match self {
            NormScale::Auto if free_vars < 80 => 2.0,
            NormScale::Auto => 1.0,
            NormScale::Fixed(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub k_hot: f64,
    pub k_adj: f64,
    pub k_start: f64,
    pub k_goal: f64,
    pub k_lock: f64,
    pub k_bt: f64,
    pub k_tel: f64,
    pub k_approx: f64,
    pub k_coll: f64,
    pub goal_ramp_max: f64,
    pub norm_scale: NormScale,
    /// Multiplier on `k_bt` for cells carried over from earlier windows.
    pub visited_soft: f64,
    /// Chebyshev radius of the obstacle potential used by the approximation reward.
    pub potential_radius: usize,
    /// Explicit obstacle penalty; only meaningful when obstacle cells are admissible.
    pub k_obs: Option<f64>,
    pub goal_schedule: GoalSchedule,
    pub approx_metric: ApproxMetric,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            k_hot: 4.0,
            k_adj: 2.0,
            k_start: 4.0,
            k_goal: 2.0,
            k_lock: 1.0,
            k_bt: 1.5,
            k_tel: 3.0,
            k_approx: 1.0,
            k_coll: 4.0,
            goal_ramp_max: 2.0,
            norm_scale: NormScale::Auto,
            visited_soft: 0.5,
            potential_radius: 1,
            k_obs: None,
            goal_schedule: GoalSchedule::Late,
            approx_metric: ApproxMetric::Manhattan,
        }
    }
}

impl PenaltyWeights {
    pub fn validate(&self) -> Result<(), PenaltyError> {
        let named = [
            ("k_hot", self.k_hot),
            ("k_adj", self.k_adj),
            ("k_start", self.k_start),
            ("k_goal", self.k_goal),
            ("k_lock", self.k_lock),
            ("k_bt", self.k_bt),
            ("k_tel", self.k_tel),
            ("k_approx", self.k_approx),
            ("k_coll", self.k_coll),
            ("visited_soft", self.visited_soft),
        ];
        for (name, w) in named {
            if !(w.is_finite() && w > 0.0) {
                return Err(PenaltyError::NonPositiveWeight(name));
            }
        }
        if let NormScale::Fixed(s) = self.norm_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(PenaltyError::NonPositiveWeight("norm_scale"));
            }
        }
        if let Some(k) = self.k_obs {
            if !(k.is_finite() && k > 0.0) {
                return Err(PenaltyError::NonPositiveWeight("k_obs"));
            }
        }
        if self.goal_ramp_max.is_nan() || self.goal_ramp_max < 1.0 {
            return Err(PenaltyError::RampBelowOne);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    /// The goal is reachable inside the window: reward arriving, late steps more.
    LateTime,
    /// The goal is out of reach: reward ending the window close to it in open space.
    Approximation,
}

/// One robot's share of a planning window.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotWindow {
    /// Robot id, for reporting only; the variable block is the position in the spec.
    pub robot: usize,
    pub start: Cell,
    pub goal: Cell,
    /// Local horizon: the robot plans steps `0..=horizon`.
    pub horizon: usize,
    /// Window time of the robot's local step 0.
    pub offset: usize,
    /// Cells of earlier windows' paths.
    pub visited: BTreeSet<Cell>,
    /// Drop visited cells from the reachable layers instead of penalizing them.
    pub exclude_visited: bool,
    pub goal_mode: GoalMode,
    pub allow_wait: bool,
}

impl RobotWindow {
    pub fn end(&self) -> usize {
        self.offset + self.horizon
    }
}

/// A self-contained window problem: every window is a fresh QUBO with its own indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec {
    pub map: GridMap,
    pub robots: Vec<RobotWindow>,
    /// Goals of robots that already finished and stay parked for the whole window.
    pub parked: Vec<Cell>,
    pub weights: PenaltyWeights,
    /// Nominal window length; the variable layout covers at least `0..=span`.
    pub span: usize,
}

impl WindowSpec {
    pub fn horizon(&self) -> usize {
        self.robots
            .iter()
            .map(RobotWindow::end)
            .max()
            .unwrap_or(0)
            .max(self.span)
    }

    pub fn layout(&self) -> VarLayout {
        VarLayout::new(
            self.map.rows(),
            self.map.cols(),
            self.horizon(),
            self.robots.len(),
        )
    }

    pub fn validate(&self) -> Result<(), PenaltyError> {
        self.weights.validate()?;
        for r in &self.robots {
            let bad = |msg: String| PenaltyError::BadRobot {
                robot: r.robot,
                msg,
            };
            self.map
                .check_free(r.start)
                .map_err(|e| bad(format!("start: {e}")))?;
            self.map
                .check_free(r.goal)
                .map_err(|e| bad(format!("goal: {e}")))?;
            if r.horizon == 0 {
                return Err(bad("window horizon must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// `admissible[robot][t]`: sorted cells a robot may occupy at local step `t`.
pub type Admissible = Vec<Vec<Vec<Cell>>>;

/// Every free cell at every step; the unpreprocessed variable set.
pub fn raw_admissible(spec: &WindowSpec) -> Admissible {
    let free: Vec<Cell> = spec.map.free_cells().collect();
    spec.robots
        .iter()
        .map(|r| vec![free.clone(); r.horizon + 1])
        .collect()
}

/// Like [`raw_admissible`] but obstacle cells get variables too, for the explicit obstacle
/// penalty diagnostic.
pub fn raw_admissible_with_obstacles(spec: &WindowSpec) -> Admissible {
    let all: Vec<Cell> = (0..spec.map.rows() * spec.map.cols())
        .map(|k| spec.map.cell_at(k))
        .collect();
    spec.robots
        .iter()
        .map(|r| vec![all.clone(); r.horizon + 1])
        .collect()
}

/// Emits penalty contributions for a window over a given admissible variable set.
pub struct PenaltyBuilder<'a> {
    spec: &'a WindowSpec,
    admissible: &'a [Vec<Vec<Cell>>],
    layout: VarLayout,
}

impl<'a> PenaltyBuilder<'a> {
    pub fn new(spec: &'a WindowSpec, admissible: &'a [Vec<Vec<Cell>>]) -> Self {
        assert_eq!(
            spec.robots.len(),
            admissible.len(),
            "one admissible table per robot"
        );
        for (r, table) in spec.robots.iter().zip(admissible) {
            assert_eq!(
                table.len(),
                r.horizon + 1,
                "admissible steps must cover 0..=horizon"
            );
        }
        Self {
            spec,
            admissible,
            layout: spec.layout(),
        }
    }

    pub fn layout(&self) -> VarLayout {
        self.layout
    }

    pub fn var(&self, robot: usize, t: usize, c: Cell) -> VarIndex {
        self.layout
            .index_unchecked(robot, self.spec.robots[robot].offset + t, c)
    }

    fn cells(&self, robot: usize, t: usize) -> &[Cell] {
        self.admissible[robot]
            .get(t)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn admits(&self, robot: usize, t: usize, c: Cell) -> bool {
        self.cells(robot, t).binary_search(&c).is_ok()
    }

    /// All contributions for the window.
    pub fn build(&self) -> QuboModel {
        let mut model = QuboModel::new(self.layout.num_vars());
        for robot in 0..self.spec.robots.len() {
            self.apply_one_hot(&mut model, robot);
            self.apply_adjacency(&mut model, robot);
            self.apply_start(&mut model, robot);
            match self.spec.robots[robot].goal_mode {
                GoalMode::LateTime => self.apply_goal_late_time(&mut model, robot),
                GoalMode::Approximation => self.apply_approximation(&mut model, robot),
            }
            self.apply_goal_lock(&mut model, robot);
            self.apply_backtracking(&mut model, robot);
            self.apply_teleportation(&mut model, robot);
            if self.spec.weights.k_obs.is_some() {
                self.apply_obstacle(&mut model, robot);
            }
        }
        self.apply_vertex_collision(&mut model);
        model
    }

    /// `k_hot * (1 - sum_c x_{c,t})^2` per step, expanded as
    /// `k_hot * (1 - sum x + 2 sum_{pairs} x x)`.
    pub fn apply_one_hot(&self, model: &mut QuboModel, robot: usize) {
        let k = self.spec.weights.k_hot;
        for t in 0..=self.spec.robots[robot].horizon {
            model.add_constant(k);
            let vars: Vec<VarIndex> = self
                .cells(robot, t)
                .iter()
                .map(|&c| self.var(robot, t, c))
                .collect();
            for (n, &a) in vars.iter().enumerate() {
                model.add_linear(a, -k);
                for &b in &vars[n + 1..] {
                    model.accumulate(a, b, 2.0 * k);
                }
            }
        }
    }

    /// `k_adj * x_{c,t} * (1 - sum_{n in N(c)} x_{n,t+1})` for `t < horizon`.
    pub fn apply_adjacency(&self, model: &mut QuboModel, robot: usize) {
        let k = self.spec.weights.k_adj;
        let rw = &self.spec.robots[robot];
        for t in 0..rw.horizon {
            for &c in self.cells(robot, t) {
                let a = self.var(robot, t, c);
                model.add_linear(a, k);
                if !self.spec.map.is_free(c) {
                    continue;
                }
                for &n in self.spec.map.adjacent(c) {
                    if self.admits(robot, t + 1, n) {
                        model.accumulate(a, self.var(robot, t + 1, n), -k);
                    }
                }
                if rw.allow_wait && self.admits(robot, t + 1, c) {
                    model.accumulate(a, self.var(robot, t + 1, c), -k);
                }
            }
        }
    }

    /// `k_start * (1 - x_{s,0})^2` without its constant: `-k_start * x_{s,0}`.
    pub fn apply_start(&self, model: &mut QuboModel, robot: usize) {
        let start = self.spec.robots[robot].start;
        if self.admits(robot, 0, start) {
            model.add_linear(self.var(robot, 0, start), -self.spec.weights.k_start);
        }
    }

    /// Goal reward at every step `t >= 1`, scaled by the configured schedule.
    pub fn apply_goal_late_time(&self, model: &mut QuboModel, robot: usize) {
        let w = &self.spec.weights;
        let rw = &self.spec.robots[robot];
        let horizon = rw.horizon as f64;
        for t in 1..=rw.horizon {
            if !self.admits(robot, t, rw.goal) {
                continue;
            }
            let frac = t as f64 / horizon;
            let factor = match w.goal_schedule {
                GoalSchedule::Late => 1.0 + (w.goal_ramp_max - 1.0) * frac,
                GoalSchedule::Constant => 1.0,
                GoalSchedule::Early => w.goal_ramp_max - (w.goal_ramp_max - 1.0) * frac,
            };
            model.add_linear(self.var(robot, t, rw.goal), -w.k_goal * factor);
        }
    }

    /// `k_lock * x_{g,t} * (1 - x_{g,t+1})` for `t < horizon`.
    pub fn apply_goal_lock(&self, model: &mut QuboModel, robot: usize) {
        let k = self.spec.weights.k_lock;
        let rw = &self.spec.robots[robot];
        for t in 0..rw.horizon {
            if !self.admits(robot, t, rw.goal) {
                continue;
            }
            let a = self.var(robot, t, rw.goal);
            model.add_linear(a, k);
            if self.admits(robot, t + 1, rw.goal) {
                model.accumulate(a, self.var(robot, t + 1, rw.goal), -k);
            }
        }
    }

    /// `k_bt` on every pair of steps at the same non-goal cell, plus a softened linear
    /// penalty on cells visited by earlier windows.
    pub fn apply_backtracking(&self, model: &mut QuboModel, robot: usize) {
        let w = &self.spec.weights;
        let rw = &self.spec.robots[robot];
        let mut steps: std::collections::BTreeMap<Cell, Vec<usize>> = Default::default();
        for t in 0..=rw.horizon {
            for &c in self.cells(robot, t) {
                if c != rw.goal {
                    steps.entry(c).or_default().push(t);
                }
                if c != rw.start && rw.visited.contains(&c) {
                    model.add_linear(self.var(robot, t, c), w.k_bt * w.visited_soft);
                }
            }
        }
        for (c, ts) in steps {
            for (n, &t1) in ts.iter().enumerate() {
                for &t2 in &ts[n + 1..] {
                    model.accumulate(self.var(robot, t1, c), self.var(robot, t2, c), w.k_bt);
                }
            }
        }
    }

    /// `k_tel` on the goal at steps earlier than the Manhattan lower bound.
    pub fn apply_teleportation(&self, model: &mut QuboModel, robot: usize) {
        let rw = &self.spec.robots[robot];
        let bound = manhattan(rw.start, rw.goal);
        for t in 0..bound.min(rw.horizon + 1) {
            if self.admits(robot, t, rw.goal) {
                model.add_linear(self.var(robot, t, rw.goal), self.spec.weights.k_tel);
            }
        }
    }

    /// Final-step reward for ending near the goal in open space, used instead of the goal
    /// reward when the goal cannot be reached inside the window.
    pub fn apply_approximation(&self, model: &mut QuboModel, robot: usize) {
        let w = &self.spec.weights;
        let rw = &self.spec.robots[robot];
        let t = rw.horizon;
        let dist = GoalDistance::new(&self.spec.map, rw.goal, w.approx_metric);
        for &c in self.cells(robot, t) {
            let reward = dist.reward(&self.spec.map, c, w.potential_radius);
            model.add_linear(self.var(robot, t, c), -w.k_approx * reward);
        }
    }

    /// Explicit `k_obs` on obstacle variables (diagnostic; obstacles are normally absent).
    pub fn apply_obstacle(&self, model: &mut QuboModel, robot: usize) {
        let Some(k) = self.spec.weights.k_obs else {
            return;
        };
        for t in 0..=self.spec.robots[robot].horizon {
            for &c in self.cells(robot, t) {
                if self.spec.map.is_obstacle(c) {
                    model.add_linear(self.var(robot, t, c), k);
                }
            }
        }
    }

    /// Vertex-collision coupling between robots active at the same window time.
    ///
    /// A late-time robot whose local horizon ends before the window does is parked on its
    /// goal afterwards, so later claims of that cell by other robots are coupled to its
    /// arrival variable. Goals of robots that finished in earlier windows are penalized
    /// linearly.
    pub fn apply_vertex_collision(&self, model: &mut QuboModel) {
        let k = self.spec.weights.k_coll;
        let robots = &self.spec.robots;
        let horizon = self.spec.horizon();
        for a in 0..robots.len() {
            for b in a + 1..robots.len() {
                for tau in 0..=horizon {
                    let (Some(ta), Some(tb)) = (self.local(a, tau), self.local(b, tau)) else {
                        continue;
                    };
                    let cells_b = self.cells(b, tb);
                    for &c in self.cells(a, ta) {
                        if cells_b.binary_search(&c).is_ok() {
                            model.accumulate(self.var(a, ta, c), self.var(b, tb, c), k);
                        }
                    }
                }
            }
        }
        for a in 0..robots.len() {
            let ra = &robots[a];
            if ra.goal_mode != GoalMode::LateTime || !self.admits(a, ra.horizon, ra.goal) {
                continue;
            }
            let arrival = self.var(a, ra.horizon, ra.goal);
            for b in (0..robots.len()).filter(|&b| b != a) {
                for tau in ra.end() + 1..=robots[b].end() {
                    if let Some(tb) = self.local(b, tau) {
                        if self.admits(b, tb, ra.goal) {
                            model.accumulate(arrival, self.var(b, tb, ra.goal), k);
                        }
                    }
                }
            }
        }
        for &p in &self.spec.parked {
            for (r, rw) in robots.iter().enumerate() {
                for t in 0..=rw.horizon {
                    if self.admits(r, t, p) {
                        model.add_linear(self.var(r, t, p), k);
                    }
                }
            }
        }
    }

    fn local(&self, robot: usize, tau: usize) -> Option<usize> {
        let rw = &self.spec.robots[robot];
        (tau >= rw.offset && tau <= rw.end()).then(|| tau - rw.offset)
    }
}

/// `(1 - manhattan(c, goal) / D_max) * (1 - potential(c))`, in `[0, 1]`.
pub fn approximation_reward(map: &GridMap, c: Cell, goal: Cell, radius: usize) -> f64 {
    GoalDistance::new(map, goal, ApproxMetric::Manhattan).reward(map, c, radius)
}

/// Distance to one goal under an [`ApproxMetric`], normalized by the largest such distance
/// on the map.
#[derive(Clone, Debug)]
pub struct GoalDistance {
    goal: Cell,
    metric: ApproxMetric,
    d_max: f64,
    table: Vec<Option<usize>>,
}

impl GoalDistance {
    pub fn new(map: &GridMap, goal: Cell, metric: ApproxMetric) -> Self {
        let (rows, cols) = (map.rows() as f64, map.cols() as f64);
        let mut table = Vec::new();
        let d_max = match metric {
            ApproxMetric::Manhattan => map.max_manhattan() as f64,
            ApproxMetric::Euclidean => ((rows - 1.0).powi(2) + (cols - 1.0).powi(2)).sqrt(),
            ApproxMetric::Geodesic => {
                table = map.distances_from(goal, &BTreeSet::new());
                table.iter().flatten().copied().max().unwrap_or(0) as f64
            }
        };
        Self {
            goal,
            metric,
            d_max: d_max.max(1.0),
            table,
        }
    }

    /// 1 at the goal, 0 at the largest distance; cells cut off from the goal get 0.
    pub fn closeness(&self, map: &GridMap, c: Cell) -> f64 {
        let d = match self.metric {
            ApproxMetric::Manhattan => manhattan(c, self.goal) as f64,
            ApproxMetric::Euclidean => euclidean(c, self.goal),
            ApproxMetric::Geodesic => match self.table.get(map.index(c)).copied().flatten() {
                Some(d) => d as f64,
                None => return 0.0,
            },
        };
        (1.0 - d / self.d_max).max(0.0)
    }

    /// Closeness times openness (one minus the obstacle potential).
    pub fn reward(&self, map: &GridMap, c: Cell, radius: usize) -> f64 {
        if !map.is_free(c) {
            return 0.0;
        }
        self.closeness(map, c) * (1.0 - map.obstacle_potential(c, radius))
    }
}
