//! Sparse upper-triangular QUBO models over linearly indexed path variables.
//!
//! A model stores `Q[a][b]` for `a <= b` only; diagonal entries are the linear terms
//! (`x*x == x` for binary `x`). The energy of an assignment is
//! `constant + sum_a Q[a][a] x_a + sum_{a<b} Q[a][b] x_a x_b`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Cell;

/// Linear index of a binary variable.
pub type VarIndex = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuboError {
    #[error("robot {robot} out of range (layout has {robots})")]
    RobotOutOfRange { robot: usize, robots: usize },
    #[error("time step {t} exceeds the layout horizon {horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },
    #[error("cell {0} outside the layout grid")]
    CellOutOfRange(Cell),
    #[error("variable {0} outside the layout")]
    IndexOutOfRange(VarIndex),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Maps `(robot, t, cell)` onto linear variable indices.
///
/// The index is `i*cols + j + rows*cols*t + robot*rows*cols*(horizon+1)`: variables are
/// grouped by time step and every robot owns one contiguous block covering steps
/// `0..=horizon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarLayout {
    pub rows: usize,
    pub cols: usize,
    pub horizon: usize,
    pub robots: usize,
}

impl VarLayout {
    pub fn new(rows: usize, cols: usize, horizon: usize, robots: usize) -> Self {
        Self {
            rows,
            cols,
            horizon,
            robots,
        }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn block_size(&self) -> usize {
        self.cells() * (self.horizon + 1)
    }

    pub fn num_vars(&self) -> usize {
        self.block_size() * self.robots
    }

    pub fn robot_offset(&self, robot: usize) -> VarIndex {
        robot * self.block_size()
    }

    pub fn index(&self, robot: usize, t: usize, c: Cell) -> Result<VarIndex, QuboError> {
        if robot >= self.robots {
            return Err(QuboError::RobotOutOfRange {
                robot,
                robots: self.robots,
            });
        }
        if t > self.horizon {
            return Err(QuboError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        if c.i >= self.rows || c.j >= self.cols {
            return Err(QuboError::CellOutOfRange(c));
        }
        Ok(self.index_unchecked(robot, t, c))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, robot: usize, t: usize, c: Cell) -> VarIndex {
        c.i * self.cols + c.j + self.cells() * t + robot * self.block_size()
    }

    /// Inverse of [`VarLayout::index`].
    pub fn locate(&self, n: VarIndex) -> Result<(usize, usize, Cell), QuboError> {
        if n >= self.num_vars() {
            return Err(QuboError::IndexOutOfRange(n));
        }
        let robot = n / self.block_size();
        let rest = n % self.block_size();
        let t = rest / self.cells();
        let k = rest % self.cells();
        Ok((robot, t, Cell::new(k / self.cols, k % self.cols)))
    }
}

/// Set of variables assigned 1; every other variable is 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    ones: BTreeSet<VarIndex>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ones(ones: impl IntoIterator<Item = VarIndex>) -> Self {
        Self {
            ones: ones.into_iter().collect(),
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self::from_ones(bits.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k))
    }

    pub fn set(&mut self, v: VarIndex, value: bool) {
        if value {
            self.ones.insert(v);
        } else {
            self.ones.remove(&v);
        }
    }

    pub fn get(&self, v: VarIndex) -> bool {
        self.ones.contains(&v)
    }

    pub fn ones(&self) -> impl Iterator<Item = VarIndex> + '_ {
        self.ones.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.ones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ones.is_empty()
    }

    pub fn to_bits(&self, num_vars: usize) -> Vec<bool> {
        let mut bits = vec![false; num_vars];
        for &v in &self.ones {
            if v < num_vars {
                bits[v] = true;
            }
        }
        bits
    }
}

/// Upper-triangular sparse coefficient map plus an additive constant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuboModel {
    num_vars: usize,
    constant: f64,
    coeffs: BTreeMap<(VarIndex, VarIndex), f64>,
}

impl QuboModel {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            ..Self::default()
        }
    }

    /// Builds a model from a dense (possibly non-symmetric) matrix, reading `x^T Q x`.
    pub fn from_dense(matrix: &[Vec<f64>]) -> Self {
        let mut model = Self::new(matrix.len());
        for (a, row) in matrix.iter().enumerate() {
            for (b, &w) in row.iter().enumerate() {
                model.accumulate(a, b, w);
            }
        }
        model
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn add_constant(&mut self, w: f64) {
        self.constant += w;
    }

    /// Adds `w` onto the `(min, max)` entry, dropping it if the sum is exactly zero.
    /// The variable count grows to cover both indices.
    pub fn accumulate(&mut self, a: VarIndex, b: VarIndex, w: f64) {
        let key = (a.min(b), a.max(b));
        self.num_vars = self.num_vars.max(key.1 + 1);
        if w == 0.0 {
            return;
        }
        let entry = self.coeffs.entry(key).or_insert(0.0);
        *entry += w;
        if *entry == 0.0 {
            self.coeffs.remove(&key);
        }
    }

    pub fn add_linear(&mut self, a: VarIndex, w: f64) {
        self.accumulate(a, a, w);
    }

    pub fn coefficient(&self, a: VarIndex, b: VarIndex) -> f64 {
        self.coeffs
            .get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Entries in ascending `(a, b)` order.
    pub fn iter(&self) -> impl Iterator<Item = (VarIndex, VarIndex, f64)> + '_ {
        self.coeffs.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn linear_terms(&self) -> impl Iterator<Item = (VarIndex, f64)> + '_ {
        self.iter()
            .filter(|(a, b, _)| a == b)
            .map(|(a, _, w)| (a, w))
    }

    pub fn quadratic_terms(&self) -> impl Iterator<Item = (VarIndex, VarIndex, f64)> + '_ {
        self.iter().filter(|(a, b, _)| a != b)
    }

    /// Variables that occur in at least one coefficient.
    pub fn support(&self) -> BTreeSet<VarIndex> {
        self.coeffs.keys().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn energy(&self, x: &Assignment) -> f64 {
        let mut e = self.constant;
        for (&(a, b), &w) in &self.coeffs {
            if x.get(a) && (a == b || x.get(b)) {
                e += w;
            }
        }
        e
    }

    /// Energy of a dense bit vector; indices beyond `x.len()` read as 0.
    pub fn energy_bits(&self, x: &[bool]) -> f64 {
        let bit = |v: usize| x.get(v).copied().unwrap_or(false);
        let mut e = self.constant;
        for (&(a, b), &w) in &self.coeffs {
            if bit(a) && (a == b || bit(b)) {
                e += w;
            }
        }
        e
    }

    /// Scales every coefficient (and the constant) by `scale / max|coefficient|`.
    ///
    /// Returns the scaled model and the factor applied. An all-zero model is returned
    /// unchanged with factor 1.
    pub fn normalize(&self, scale: f64) -> (QuboModel, f64) {
        assert!(scale > 0.0, "normalization scale must be positive");
        let max = self.max_abs_coefficient();
        if max == 0.0 {
            log::warn!("normalizing an all-zero QUBO; model left unchanged");
            return (self.clone(), 1.0);
        }
        let factor = scale / max;
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&k, &w)| {
                let scaled = if w.abs() == max {
                    scale.copysign(w)
                } else {
                    w * factor
                };
                (k, scaled)
            })
            .filter(|(_, w)| *w != 0.0)
            .collect();
        let model = QuboModel {
            num_vars: self.num_vars,
            constant: self.constant * factor,
            coeffs,
        };
        (model, factor)
    }

    /// Text triple format: a `num_vars constant` header, then one `a b w` line per entry.
    pub fn to_triples(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.num_vars, self.constant).unwrap();
        for (a, b, w) in self.iter() {
            writeln!(out, "{a} {b} {w}").unwrap();
        }
        out
    }

    pub fn from_triples(text: &str) -> Result<Self, QuboError> {
        let err = |line: usize, msg: &str| QuboError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (n, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let mut parts = header.split_whitespace();
        let num_vars = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| err(n, "bad variable count"))?;
        let constant = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| err(n, "bad constant"))?;
        let mut model = QuboModel::new(num_vars);
        model.constant = constant;
        for (n, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(n, "expected `a b w`"));
            }
            let a = fields[0].parse().map_err(|_| err(n, "bad index"))?;
            let b = fields[1].parse().map_err(|_| err(n, "bad index"))?;
            let w = fields[2].parse().map_err(|_| err(n, "bad weight"))?;
            model.accumulate(a, b, w);
        }
        Ok(model)
    }

    pub(crate) fn compact(&self) -> CompactQubo {
        let n = self.num_vars;
        let mut linear = vec![0.0; n];
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (a, b, w) in self.iter() {
            if a == b {
                linear[a] = w;
            } else {
                adjacency[a].push((b, w));
                adjacency[b].push((a, w));
            }
        }
        CompactQubo { linear, adjacency }
    }
}

/// Solver-side view: linear terms plus symmetric neighbor lists of the couplings.
#[derive(Clone, Debug)]
pub(crate) struct CompactQubo {
    pub linear: Vec<f64>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl CompactQubo {
    /// Coupling field `sum_j Q[i][j] x_j` for every `i`.
    pub fn fields(&self, x: &[bool]) -> Vec<f64> {
        self.adjacency
            .iter()
            .map(|row| row.iter().filter(|(j, _)| x[*j]).map(|(_, w)| w).sum())
            .collect()
    }

    /// Energy change of flipping bit `i` given its current coupling field.
    #[inline]
    pub fn flip_delta(&self, x: &[bool], field: &[f64], i: usize) -> f64 {
        let local = self.linear[i] + field[i];
        if x[i] {
            -local
        } else {
            local
        }
    }

    #[inline]
    pub fn apply_flip(&self, x: &mut [bool], field: &mut [f64], i: usize) {
        x[i] = !x[i];
        let sign = if x[i] { 1.0 } else { -1.0 };
        for &(j, w) in &self.adjacency[i] {
            field[j] += sign * w;
        }
    }
}

/// Groups the set bits of `x` by robot and time step.
///
/// `occupancy[robot][t]` is the set of cells the robot claims at step `t`; empty sets
/// signal a one-hot violation.
pub fn decode(x: &Assignment, layout: &VarLayout) -> Result<Vec<Vec<BTreeSet<Cell>>>, QuboError> {
    let mut out = vec![vec![BTreeSet::new(); layout.horizon + 1]; layout.robots];
    for v in x.ones() {
        let (robot, t, c) = layout.locate(v)?;
        out[robot][t].insert(c);
    }
    Ok(out)
}
