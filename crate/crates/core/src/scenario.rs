//! Sectioned scenario files.
//!
//! ```text
//! # comment
//! [map]
//! connectivity = four
//! .....
//! ..#..
//! [robots]
//! 0 0 4 4        # start_i start_j goal_i goal_j [release]
//! 7: 4 0 0 4 2   # optional explicit id
//! [weights]
//! k_coll = 6
//! [window]
//! window_len = 6
//! [solver]
//! backend = annealer
//! seed = 1
//! [bench]
//! name = ring
//! repeats = 20
//! ```
//!
//! Every section but `[map]` and `[robots]` is optional; missing keys keep their defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{Cell, Connectivity, GridError, GridMap};
use crate::multi::RobotSpec;
use crate::penalty::{ApproxMetric, GoalSchedule, NormScale, PenaltyWeights};
use crate::solver::{Backend, SolverConfig};
use crate::window::WindowConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: content outside any section")]
    NoSection { line: usize },
    #[error("line {line}, column {col}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        col: usize,
        section: String,
        key: String,
    },
    #[error("line {line}, column {col}: invalid value `{value}` for `{key}`: {msg}")]
    BadValue {
        line: usize,
        col: usize,
        key: String,
        value: String,
        msg: String,
    },
    #[error("line {line}: expected `key = value`")]
    NotKeyValue { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: duplicate section [{name}]")]
    DuplicateSection { line: usize, name: String },
    #[error(transparent)]
    Map(#[from] GridError),
    #[error("missing [map] section or empty map")]
    MissingMap,
    #[error("no robots defined")]
    NoRobots,
    #[error("line {line}, column {col}: {msg}")]
    BadRobot {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("line {line}: robot {id} {which} {cell} is outside the map")]
    RobotOutOfGrid {
        line: usize,
        id: usize,
        which: &'static str,
        cell: Cell,
    },
    #[error("line {line}: robot {id} {which} {cell} is on an obstacle")]
    RobotOnObstacle {
        line: usize,
        id: usize,
        which: &'static str,
        cell: Cell,
    },
    #[error("line {line}: duplicate robot id {id}")]
    DuplicateRobotId { line: usize, id: usize },
    #[error("line {line}: robot {id} shares goal {cell} with robot {other}")]
    DuplicateGoal {
        line: usize,
        id: usize,
        other: usize,
        cell: Cell,
    },
    #[error("line {line}: robot {id} starts on {cell} together with robot {other}")]
    DuplicateStart {
        line: usize,
        id: usize,
        other: usize,
        cell: Cell,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub map: GridMap,
    pub robots: Vec<RobotSpec>,
    pub weights: PenaltyWeights,
    pub window: WindowConfig,
    pub solver: SolverConfig,
    pub repeats: usize,
}

impl ScenarioSpec {
    pub fn new(map: GridMap, robots: Vec<RobotSpec>) -> Self {
        Self {
            name: String::new(),
            map,
            robots,
            weights: PenaltyWeights::default(),
            window: WindowConfig::default(),
            solver: SolverConfig::default(),
            repeats: 20,
        }
    }
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
    /// 1-based column of the value.
    col: usize,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        // `#` is also the obstacle glyph; only a `#` after whitespace starts a comment, or
        // one at column 1 followed by a space.
        Some(_) => {
            let bytes = line.as_bytes();
            for (k, &b) in bytes.iter().enumerate() {
                if b == b'#'
                    && ((k > 0 && bytes[k - 1].is_ascii_whitespace())
                        || (k == 0 && bytes.get(1).is_none_or(|c| c.is_ascii_whitespace())))
                {
                    return &line[..k];
                }
            }
            line
        }
        None => line,
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let mut sections: BTreeMap<&str, Vec<(usize, &str)>> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = strip_comment(raw).trim_end();
        let trimmed = body.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !["map", "robots", "weights", "window", "solver", "bench"].contains(&name) {
                return Err(ScenarioError::UnknownSection {
                    line,
                    name: name.to_string(),
                });
            }
            if sections.contains_key(name) {
                return Err(ScenarioError::DuplicateSection {
                    line,
                    name: name.to_string(),
                });
            }
            sections.insert(name, Vec::new());
            current = Some(name);
            continue;
        }
        let Some(sec) = current else {
            return Err(ScenarioError::NoSection { line });
        };
        sections.get_mut(sec).unwrap().push((line, body));
    }

    let mut connectivity = Connectivity::Four;
    let mut rows = Vec::new();
    for &(line, body) in sections.get("map").map(Vec::as_slice).unwrap_or(&[]) {
        if body.contains('=') {
            let e = key_value(line, body)?;
            match e.key {
                "connectivity" => connectivity = parse_value(&e)?,
                _ => return Err(unknown(&e, "map")),
            }
        } else {
            rows.push((line, body.trim()));
        }
    }
    if rows.is_empty() {
        return Err(ScenarioError::MissingMap);
    }
    let map = GridMap::from_rows(&rows, connectivity)?;

    let robot_lines = sections.get("robots").map(Vec::as_slice).unwrap_or(&[]);
    let robots = parse_robots(&map, robot_lines)?;

    let mut spec = ScenarioSpec::new(map, robots);
    for e in entries(&sections, "weights")? {
        apply_weight(&mut spec.weights, &e)?;
    }
    for e in entries(&sections, "window")? {
        let w = &mut spec.window;
        match e.key {
            "window_len" => w.window_len = parse_value(&e)?,
            "max_windows" => w.max_windows = parse_value(&e)?,
            "max_retries" => w.max_retries = parse_value(&e)?,
            "aggressiveness" => w.aggressiveness = parse_value(&e)?,
            "allow_wait" => w.allow_wait = parse_value(&e)?,
            "escalate" => w.escalate = parse_value(&e)?,
            "candidates" => w.candidates = parse_value(&e)?,
            _ => return Err(unknown(&e, "window")),
        }
    }
    for e in entries(&sections, "solver")? {
        let s = &mut spec.solver;
        match e.key {
            "backend" => s.backend = parse_value(&e)?,
            "reads" => s.num_reads = parse_value(&e)?,
            "sweeps" => s.sweeps = parse_value(&e)?,
            "beta_min" => s.beta_range.0 = parse_value(&e)?,
            "beta_max" => s.beta_range.1 = parse_value(&e)?,
            "seed" => s.seed = parse_value(&e)?,
            _ => return Err(unknown(&e, "solver")),
        }
    }
    for e in entries(&sections, "bench")? {
        match e.key {
            "name" => spec.name = e.value.to_string(),
            "repeats" => spec.repeats = parse_value(&e)?,
            _ => return Err(unknown(&e, "bench")),
        }
    }
    spec.weights
        .validate()
        .map_err(|e| ScenarioError::Config(e.to_string()))?;
    spec.window
        .validate()
        .map_err(|e| ScenarioError::Config(e.to_string()))?;
    spec.solver
        .validate()
        .map_err(|e| ScenarioError::Config(e.to_string()))?;
    if spec.repeats == 0 {
        return Err(ScenarioError::Config("repeats must be at least 1".into()));
    }
    Ok(spec)
}

fn unknown(e: &Entry<'_>, section: &str) -> ScenarioError {
    ScenarioError::UnknownKey {
        line: e.line,
        col: 1,
        section: section.to_string(),
        key: e.key.to_string(),
    }
}

fn key_value(line: usize, body: &str) -> Result<Entry<'_>, ScenarioError> {
    let Some(eq) = body.find('=') else {
        return Err(ScenarioError::NotKeyValue { line });
    };
    let key = body[..eq].trim();
    let rest = &body[eq + 1..];
    let value = rest.trim();
    if key.is_empty() || value.is_empty() {
        return Err(ScenarioError::NotKeyValue { line });
    }
    let lead = rest.len() - rest.trim_start().len();
    Ok(Entry {
        line,
        key,
        value,
        col: body[..eq + 1].chars().count() + lead + 1,
    })
}

fn entries<'a>(
    sections: &BTreeMap<&str, Vec<(usize, &'a str)>>,
    name: &str,
) -> Result<Vec<Entry<'a>>, ScenarioError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &(line, body) in sections.get(name).map(Vec::as_slice).unwrap_or(&[]) {
        let e = key_value(line, body)?;
        if !seen.insert(e.key) {
            return Err(ScenarioError::DuplicateKey {
                line,
                key: e.key.to_string(),
            });
        }
        out.push(e);
    }
    Ok(out)
}

fn parse_value<T: FromStr>(e: &Entry<'_>) -> Result<T, ScenarioError>
where
    T::Err: std::fmt::Display,
{
    e.value
        .parse()
        .map_err(|err: T::Err| ScenarioError::BadValue {
            line: e.line,
            col: e.col,
            key: e.key.to_string(),
            value: e.value.to_string(),
            msg: err.to_string(),
        })
}

impl FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "four" | "4" => Ok(Connectivity::Four),
            "eight" | "8" => Ok(Connectivity::Eight),
            _ => Err("expected `four` or `eight`".into()),
        }
    }
}

impl FromStr for GoalSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "late" => Ok(GoalSchedule::Late),
            "constant" => Ok(GoalSchedule::Constant),
            "early" => Ok(GoalSchedule::Early),
            _ => Err("expected `late`, `constant` or `early`".into()),
        }
    }
}

impl FromStr for ApproxMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manhattan" => Ok(ApproxMetric::Manhattan),
            "euclidean" => Ok(ApproxMetric::Euclidean),
            "geodesic" => Ok(ApproxMetric::Geodesic),
            _ => Err("expected `manhattan`, `euclidean` or `geodesic`".into()),
        }
    }
}

fn apply_weight(w: &mut PenaltyWeights, e: &Entry<'_>) -> Result<(), ScenarioError> {
    match e.key {
        "k_hot" => w.k_hot = parse_value(e)?,
        "k_adj" => w.k_adj = parse_value(e)?,
        "k_start" => w.k_start = parse_value(e)?,
        "k_goal" => w.k_goal = parse_value(e)?,
        "k_lock" => w.k_lock = parse_value(e)?,
        "k_bt" => w.k_bt = parse_value(e)?,
        "k_tel" => w.k_tel = parse_value(e)?,
        "k_approx" => w.k_approx = parse_value(e)?,
        "k_coll" => w.k_coll = parse_value(e)?,
        "k_obs" => w.k_obs = Some(parse_value(e)?),
        "goal_ramp_max" => w.goal_ramp_max = parse_value(e)?,
        "visited_soft" => w.visited_soft = parse_value(e)?,
        "potential_radius" => w.potential_radius = parse_value(e)?,
        "goal_schedule" => w.goal_schedule = parse_value(e)?,
        "approx_metric" => w.approx_metric = parse_value(e)?,
        "norm_scale" => {
            w.norm_scale = if e.value == "auto" {
                NormScale::Auto
            } else {
                NormScale::Fixed(parse_value(e)?)
            }
        }
        _ => return Err(unknown(e, "weights")),
    }
    Ok(())
}

fn parse_robots(map: &GridMap, lines: &[(usize, &str)]) -> Result<Vec<RobotSpec>, ScenarioError> {
    let mut robots = Vec::new();
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut goals: BTreeMap<Cell, usize> = BTreeMap::new();
    let mut starts: BTreeMap<(usize, Cell), usize> = BTreeMap::new();
    for (k, &(line, body)) in lines.iter().enumerate() {
        let (id, rest, rest_col) = match body.find(':') {
            Some(colon) => {
                let id_text = body[..colon].trim();
                let id = id_text
                    .parse::<usize>()
                    .map_err(|_| ScenarioError::BadRobot {
                        line,
                        col: body.len() - body.trim_start().len() + 1,
                        msg: format!("robot id `{id_text}` is not a non-negative integer"),
                    })?;
                (id, &body[colon + 1..], colon + 2)
            }
            None => (k, body, 1),
        };
        let mut fields = Vec::new();
        let mut offset = 0;
        for tok in rest.split_whitespace() {
            let at = rest[offset..].find(tok).unwrap() + offset;
            offset = at + tok.len();
            let col = rest_col + rest[..at].chars().count();
            let v = tok.parse::<usize>().map_err(|_| ScenarioError::BadRobot {
                line,
                col,
                msg: format!("`{tok}` is not a non-negative integer"),
            })?;
            fields.push(v);
        }
        if fields.len() != 4 && fields.len() != 5 {
            return Err(ScenarioError::BadRobot {
                line,
                col: rest_col,
                msg: format!(
                    "expected `start_i start_j goal_i goal_j [release]`, found {} fields",
                    fields.len()
                ),
            });
        }
        let r = RobotSpec {
            id,
            start: Cell::new(fields[0], fields[1]),
            goal: Cell::new(fields[2], fields[3]),
            release: fields.get(4).copied().unwrap_or(0),
        };
        for (which, cell) in [("start", r.start), ("goal", r.goal)] {
            if !map.contains(cell) {
                return Err(ScenarioError::RobotOutOfGrid {
                    line,
                    id,
                    which,
                    cell,
                });
            }
            if map.is_obstacle(cell) {
                return Err(ScenarioError::RobotOnObstacle {
                    line,
                    id,
                    which,
                    cell,
                });
            }
        }
        if ids.insert(id, line).is_some() {
            return Err(ScenarioError::DuplicateRobotId { line, id });
        }
        if let Some(other) = goals.insert(r.goal, id) {
            return Err(ScenarioError::DuplicateGoal {
                line,
                id,
                other,
                cell: r.goal,
            });
        }
        if let Some(other) = starts.insert((r.release, r.start), id) {
            return Err(ScenarioError::DuplicateStart {
                line,
                id,
                other,
                cell: r.start,
            });
        }
        robots.push(r);
    }
    if robots.is_empty() {
        return Err(ScenarioError::NoRobots);
    }
    Ok(robots)
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Exhaustive => "exhaustive",
        Backend::Annealer => "annealer",
    }
}

/// Writes every setting explicitly, so that parsing the output gives back `spec`.
pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let w = &spec.weights;
    let _ = writeln!(out, "[map]");
    if spec.map.connectivity() == Connectivity::Eight {
        let _ = writeln!(out, "connectivity = eight");
    }
    out.push_str(&spec.map.to_text());
    let _ = writeln!(out, "\n[robots]");
    for r in &spec.robots {
        let _ = writeln!(
            out,
            "{}: {} {} {} {} {}",
            r.id, r.start.i, r.start.j, r.goal.i, r.goal.j, r.release
        );
    }
    let _ = writeln!(out, "\n[weights]");
    for (k, v) in [
        ("k_hot", w.k_hot),
        ("k_adj", w.k_adj),
        ("k_start", w.k_start),
        ("k_goal", w.k_goal),
        ("k_lock", w.k_lock),
        ("k_bt", w.k_bt),
        ("k_tel", w.k_tel),
        ("k_approx", w.k_approx),
        ("k_coll", w.k_coll),
        ("goal_ramp_max", w.goal_ramp_max),
        ("visited_soft", w.visited_soft),
    ] {
        let _ = writeln!(out, "{k} = {v:?}");
    }
    if let Some(k) = w.k_obs {
        let _ = writeln!(out, "k_obs = {k:?}");
    }
    let _ = writeln!(out, "potential_radius = {}", w.potential_radius);
    let schedule = match w.goal_schedule {
        GoalSchedule::Late => "late",
        GoalSchedule::Constant => "constant",
        GoalSchedule::Early => "early",
    };
    let _ = writeln!(out, "goal_schedule = {schedule}");
    let metric = match w.approx_metric {
        ApproxMetric::Manhattan => "manhattan",
        ApproxMetric::Euclidean => "euclidean",
        ApproxMetric::Geodesic => "geodesic",
    };
    let _ = writeln!(out, "approx_metric = {metric}");
    match w.norm_scale {
        NormScale::Auto => {
            let _ = writeln!(out, "norm_scale = auto");
        }
        NormScale::Fixed(s) => {
            let _ = writeln!(out, "norm_scale = {s:?}");
        }
    }
    let win = &spec.window;
    let _ = writeln!(out, "\n[window]");
    let _ = writeln!(out, "window_len = {}", win.window_len);
    let _ = writeln!(out, "max_windows = {}", win.max_windows);
    let _ = writeln!(out, "max_retries = {}", win.max_retries);
    let _ = writeln!(out, "aggressiveness = {:?}", win.aggressiveness);
    let _ = writeln!(out, "allow_wait = {}", win.allow_wait);
    let _ = writeln!(out, "escalate = {}", win.escalate);
    let _ = writeln!(out, "candidates = {}", win.candidates);
    let s = &spec.solver;
    let _ = writeln!(out, "\n[solver]");
    let _ = writeln!(out, "backend = {}", backend_name(s.backend));
    let _ = writeln!(out, "reads = {}", s.num_reads);
    let _ = writeln!(out, "sweeps = {}", s.sweeps);
    let _ = writeln!(out, "beta_min = {:?}", s.beta_range.0);
    let _ = writeln!(out, "beta_max = {:?}", s.beta_range.1);
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "\n[bench]");
    if !spec.name.is_empty() {
        let _ = writeln!(out, "name = {}", spec.name);
    }
    let _ = writeln!(out, "repeats = {}", spec.repeats);
    out
}
