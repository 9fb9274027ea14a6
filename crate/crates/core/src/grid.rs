//! Grid maps, neighbor topology, distance heuristics and BFS reachability layers.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cell {0} lies outside the {1}x{2} grid")]
    OutOfGrid(Cell, usize, usize),
    #[error("cell {0} is an obstacle")]
    Obstacle(Cell),
    #[error("cell {0} is in the excluded set")]
    Excluded(Cell),
    #[error("grid must have at least one row and one column")]
    Empty,
    #[error("line {line}: inconsistent row length (expected {expected}, found {found})")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {col}: unexpected map character {ch:?}")]
    BadChar { line: usize, col: usize, ch: char },
}

/// A grid cell addressed by row `i` and column `j`.
///
/// Ordering is row-major, which matches the linear variable order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl From<(usize, usize)> for Cell {
    fn from((i, j): (usize, usize)) -> Self {
        Self { i, j }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// Rectangular occupancy map with a precomputed neighbor table.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    blocked: Vec<bool>,
    connectivity: Connectivity,
    // neighbor lists of free cells, sorted row-major; empty for obstacles
    adjacency: Vec<Vec<Cell>>,
}

impl GridMap {
    pub fn new(
        rows: usize,
        cols: usize,
        obstacles: impl IntoIterator<Item = Cell>,
        connectivity: Connectivity,
    ) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::Empty);
        }
        let mut blocked = vec![false; rows * cols];
        for c in obstacles {
            if c.i >= rows || c.j >= cols {
                return Err(GridError::OutOfGrid(c, rows, cols));
            }
            blocked[c.i * cols + c.j] = true;
        }
        let mut map = Self {
            rows,
            cols,
            blocked,
            connectivity,
            adjacency: Vec::new(),
        };
        map.rebuild_adjacency();
        Ok(map)
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, [], Connectivity::Four).expect("non-empty dimensions")
    }

    /// Parses the `.`/`#` text format, one line per row. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            rows.push((n + 1, line));
        }
        Self::from_rows(&rows, Connectivity::Four)
    }

    /// Builds a map from `(line number, row text)` pairs; line numbers are only used in errors.
    pub fn from_rows(
        rows: &[(usize, &str)],
        connectivity: Connectivity,
    ) -> Result<Self, GridError> {
        let Some(&(_, first)) = rows.first() else {
            return Err(GridError::Empty);
        };
        let width = first.chars().count();
        let mut obstacles = Vec::new();
        for (i, &(line, text)) in rows.iter().enumerate() {
            let found = text.chars().count();
            if found != width {
                return Err(GridError::RaggedRow {
                    line,
                    expected: width,
                    found,
                });
            }
            for (j, ch) in text.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => obstacles.push(Cell::new(i, j)),
                    _ => {
                        return Err(GridError::BadChar {
                            line,
                            col: j + 1,
                            ch,
                        })
                    }
                }
            }
        }
        Self::new(rows.len(), width, obstacles, connectivity)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(if self.blocked[i * self.cols + j] {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }

    fn rebuild_adjacency(&mut self) {
        let mut adjacency = vec![Vec::new(); self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = Cell::new(i, j);
                if self.is_obstacle(c) {
                    continue;
                }
                adjacency[self.index(c)] = self.compute_neighbors(c);
            }
        }
        self.adjacency = adjacency;
    }

    fn compute_neighbors(&self, c: Cell) -> Vec<Cell> {
        let offsets: &[(isize, isize)] = match self.connectivity {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        };
        let mut out: Vec<Cell> = offsets
            .iter()
            .filter_map(|&(di, dj)| {
                let i = c.i.checked_add_signed(di)?;
                let j = c.j.checked_add_signed(dj)?;
                let n = Cell::new(i, j);
                (self.contains(n) && !self.is_obstacle(n)).then_some(n)
            })
            .collect();
        out.sort();
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn with_connectivity(mut self, connectivity: Connectivity) -> Self {
        self.connectivity = connectivity;
        self.rebuild_adjacency();
        self
    }

    /// Row-major cell index, `i * cols + j`.
    pub fn index(&self, c: Cell) -> usize {
        c.i * self.cols + c.j
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.cols, index % self.cols)
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.i < self.rows && c.j < self.cols
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.blocked[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.contains(c) && !self.is_obstacle(c)
    }

    pub fn check_free(&self, c: Cell) -> Result<(), GridError> {
        if !self.contains(c) {
            Err(GridError::OutOfGrid(c, self.rows, self.cols))
        } else if self.is_obstacle(c) {
            Err(GridError::Obstacle(c))
        } else {
            Ok(())
        }
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows * self.cols)
            .filter(|&k| self.blocked[k])
            .map(|k| self.cell_at(k))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows * self.cols)
            .filter(|&k| !self.blocked[k])
            .map(|k| self.cell_at(k))
    }

    pub fn obstacle_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    /// Largest Manhattan distance between two cells of the grid.
    pub fn max_manhattan(&self) -> usize {
        self.rows + self.cols - 2
    }

    /// Returns a copy with `c` turned into an obstacle (or freed).
    pub fn with_cell(&self, c: Cell, obstacle: bool) -> Result<Self, GridError> {
        if !self.contains(c) {
            return Err(GridError::OutOfGrid(c, self.rows, self.cols));
        }
        let mut out = self.clone();
        let k = out.index(c);
        out.blocked[k] = obstacle;
        out.rebuild_adjacency();
        Ok(out)
    }

    /// Free neighbor cells of `c`, sorted row-major. With `allow_wait` the cell itself is included.
    pub fn neighbors(&self, c: Cell, allow_wait: bool) -> Result<Vec<Cell>, GridError> {
        self.check_free(c)?;
        let mut out = self.adjacency[self.index(c)].clone();
        if allow_wait {
            let pos = out.binary_search(&c).unwrap_err();
            out.insert(pos, c);
        }
        Ok(out)
    }

    /// Neighbor slice without the wait move. Empty for obstacles.
    pub fn adjacent(&self, c: Cell) -> &[Cell] {
        &self.adjacency[self.index(c)]
    }

    pub fn is_move(&self, from: Cell, to: Cell, allow_wait: bool) -> bool {
        if from == to {
            return allow_wait && self.is_free(from);
        }
        self.is_free(from) && self.adjacent(from).binary_search(&to).is_ok()
    }

    /// Unit-cost BFS distances from `source` avoiding obstacles and `excluded` cells.
    /// Indexed by [`GridMap::index`]; `None` marks unreachable cells.
    pub fn distances_from(&self, source: Cell, excluded: &BTreeSet<Cell>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.rows * self.cols];
        if !self.is_free(source) {
            return dist;
        }
        dist[self.index(source)] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)].expect("queued cells have a distance");
            for &n in self.adjacent(c) {
                let k = self.index(n);
                if dist[k].is_none() && !excluded.contains(&n) {
                    dist[k] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: Cell, b: Cell) -> Option<usize> {
        if !self.is_free(b) {
            return None;
        }
        self.distances_from(a, &BTreeSet::new())[self.index(b)]
    }

    /// Time-layered reachability from `start`.
    ///
    /// In [`LayerMode::Frontier`] each layer only holds cells first reached at that step and
    /// never cells of the excluded set; in [`LayerMode::Walk`] layer `t` holds every cell an
    /// obstacle-free walk of exactly `t` moves can end on. With `allow_wait` each layer also
    /// retains the previous one.
    pub fn bfs_layers(
        &self,
        start: Cell,
        horizon: usize,
        allow_wait: bool,
        mode: LayerMode<'_>,
    ) -> Result<ReachabilityTable, GridError> {
        self.check_free(start)?;
        let mut layers: Vec<Vec<Cell>> = Vec::with_capacity(horizon + 1);
        layers.push(vec![start]);
        match mode {
            LayerMode::Frontier(excluded) => {
                if excluded.contains(&start) {
                    return Err(GridError::Excluded(start));
                }
                let mut seen = vec![false; self.rows * self.cols];
                seen[self.index(start)] = true;
                for c in excluded {
                    if self.contains(*c) {
                        seen[self.index(*c)] = true;
                    }
                }
                for t in 1..=horizon {
                    let prev = &layers[t - 1];
                    let mut next = BTreeSet::new();
                    for &c in prev {
                        for &n in self.adjacent(c) {
                            let k = self.index(n);
                            if !seen[k] {
                                seen[k] = true;
                                next.insert(n);
                            }
                        }
                    }
                    if allow_wait {
                        next.extend(prev.iter().copied());
                    }
                    layers.push(next.into_iter().collect());
                }
            }
            LayerMode::Walk => {
                for t in 1..=horizon {
                    let prev = &layers[t - 1];
                    let mut next = BTreeSet::new();
                    for &c in prev {
                        next.extend(self.adjacent(c).iter().copied());
                    }
                    if allow_wait {
                        next.extend(prev.iter().copied());
                    }
                    layers.push(next.into_iter().collect());
                }
            }
        }
        Ok(ReachabilityTable { layers })
    }

    /// Fraction of cells within Chebyshev `radius` of `c` (excluding `c`) that are obstacles
    /// or outside the grid.
    pub fn obstacle_potential(&self, c: Cell, radius: usize) -> f64 {
        if radius == 0 {
            return 0.0;
        }
        let r = radius as isize;
        let mut blocked = 0usize;
        let mut total = 0usize;
        for di in -r..=r {
            for dj in -r..=r {
                if di == 0 && dj == 0 {
                    continue;
                }
                total += 1;
                let i = c.i as isize + di;
                let j = c.j as isize + dj;
                let outside = i < 0 || j < 0 || i >= self.rows as isize || j >= self.cols as isize;
                if outside || self.blocked[i as usize * self.cols + j as usize] {
                    blocked += 1;
                }
            }
        }
        blocked as f64 / total as f64
    }
}

/// How [`GridMap::bfs_layers`] treats cells that were already reached.
#[derive(Clone, Copy, Debug)]
pub enum LayerMode<'a> {
    /// Drop cells seen in earlier layers and every cell of the given set.
    Frontier(&'a BTreeSet<Cell>),
    /// Keep every cell reachable by a walk of exactly `t` moves.
    Walk,
}

/// Admissible cells per time step, `layers[0]` being the start cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachabilityTable {
    layers: Vec<Vec<Cell>>,
}

impl ReachabilityTable {
    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, t: usize) -> &[Cell] {
        self.layers.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn layers(&self) -> &[Vec<Cell>] {
        &self.layers
    }

    pub fn contains(&self, t: usize, c: Cell) -> bool {
        self.layers
            .get(t)
            .is_some_and(|layer| layer.binary_search(&c).is_ok())
    }

    pub fn into_layers(self) -> Vec<Vec<Cell>> {
        self.layers
    }
}

pub fn manhattan(a: Cell, b: Cell) -> usize {
    a.i.abs_diff(b.i) + a.j.abs_diff(b.j)
}

pub fn euclidean(a: Cell, b: Cell) -> f64 {
    let di = a.i.abs_diff(b.i) as f64;
    let dj = a.j.abs_diff(b.j) as f64;
    di.hypot(dj)
}
