//! Benchmark harness: one classical baseline run against repeated seeded QUBO runs.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::classical::{prioritized_plan, total_moves};
use crate::multi::plan_multi;
use crate::scenario::ScenarioSpec;
use crate::window::{validate_plan, PlanStatus};

pub const SCHEMA_VERSION: u32 = 1;

/// Note printed with every report so path lengths are not misread as cell counts.
pub const LENGTH_CONVENTION: &str =
    "lengths are moves (cells - 1) summed over robots, waits included";

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalRun {
    pub total_moves: Option<usize>,
    pub per_robot: Vec<Option<usize>>,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuboRun {
    pub seed: u64,
    /// `None` when the planner rejected the input outright.
    pub status: Option<PlanStatus>,
    pub error: Option<String>,
    pub total_moves: Option<usize>,
    pub success: bool,
    pub original_vars: usize,
    pub reduced_vars: usize,
    pub reduction_pct: f64,
    pub solved_by_preprocess: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub robots: usize,
    pub classical: ClassicalRun,
    pub runs: Vec<QuboRun>,
}

/// Seed of the `k`-th repeat.
pub fn run_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add(k as u64)
}

/// Runs the classical baseline once and the QUBO pipeline `repeats` times with seeds
/// `seed, seed + 1, ...`. Failed runs are recorded, never fatal.
pub fn run_benchmark(spec: &ScenarioSpec, repeats: usize) -> BenchReport {
    let started = Instant::now();
    let paths = prioritized_plan(&spec.map, &spec.robots);
    let classical = ClassicalRun {
        total_moves: total_moves(&paths, &spec.robots),
        per_robot: paths
            .iter()
            .zip(&spec.robots)
            .map(|(p, r)| p.as_ref().ok().map(|p| p.end() - r.release))
            .collect(),
        elapsed: started.elapsed(),
    };
    let runs = (0..repeats)
        .into_par_iter()
        .map(|k| qubo_run(spec, run_seed(spec.solver.seed, k)))
        .collect();
    BenchReport {
        name: spec.name.clone(),
        rows: spec.map.rows(),
        cols: spec.map.cols(),
        robots: spec.robots.len(),
        classical,
        runs,
    }
}

fn qubo_run(spec: &ScenarioSpec, seed: u64) -> QuboRun {
    let started = Instant::now();
    let solver = spec.solver.with_seed(seed);
    match plan_multi(
        &spec.map,
        &spec.robots,
        &spec.weights,
        &spec.window,
        &solver,
    ) {
        Ok(plan) => QuboRun {
            seed,
            status: Some(plan.status()),
            error: None,
            total_moves: plan.total_moves(),
            success: plan.all_reached() && validate_plan(&spec.map, &plan).is_ok(),
            original_vars: plan.original_vars(),
            reduced_vars: plan.reduced_vars(),
            reduction_pct: plan.reduction_pct(),
            solved_by_preprocess: plan.solved_by_preprocess(),
            elapsed: started.elapsed(),
        },
        Err(e) => QuboRun {
            seed,
            status: None,
            error: Some(e.to_string()),
            total_moves: None,
            success: false,
            original_vars: 0,
            reduced_vars: 0,
            reduction_pct: 0.0,
            solved_by_preprocess: false,
            elapsed: started.elapsed(),
        },
    }
}

impl BenchReport {
    fn successful(&self) -> impl Iterator<Item = &QuboRun> {
        self.runs.iter().filter(|r| r.success)
    }

    pub fn success_rate(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.successful().count() as f64 / self.runs.len() as f64
    }

    fn lengths(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.successful().filter_map(|r| r.total_moves).collect();
        v.sort_unstable();
        v
    }

    pub fn best_moves(&self) -> Option<usize> {
        self.lengths().first().copied()
    }

    pub fn median_moves(&self) -> Option<f64> {
        let v = self.lengths();
        let n = v.len();
        match n {
            0 => None,
            _ if n % 2 == 1 => Some(v[n / 2] as f64),
            _ => Some((v[n / 2 - 1] + v[n / 2]) as f64 / 2.0),
        }
    }

    /// Best QUBO length over classical length; only when both sides succeeded.
    pub fn ratio(&self) -> Option<f64> {
        match (self.best_moves(), self.classical.total_moves) {
            (Some(q), Some(c)) if c > 0 => Some(q as f64 / c as f64),
            (Some(0), Some(0)) => Some(1.0),
            _ => None,
        }
    }

    /// Fraction of successful runs whose length equals the classical one.
    pub fn match_rate(&self) -> f64 {
        let Some(c) = self.classical.total_moves else {
            return 0.0;
        };
        if self.runs.is_empty() {
            return 0.0;
        }
        let hits = self
            .successful()
            .filter(|r| r.total_moves == Some(c))
            .count();
        hits as f64 / self.runs.len() as f64
    }

    /// Reduction of the first run that got past input validation.
    fn representative(&self) -> Option<&QuboRun> {
        self.runs.iter().find(|r| r.status.is_some())
    }

    pub fn min_reduction_pct(&self) -> Option<f64> {
        self.runs
            .iter()
            .filter(|r| r.status.is_some())
            .map(|r| r.reduction_pct)
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn to_json(&self, timings: bool) -> Value {
        let runs: Vec<Value> = self
            .runs
            .iter()
            .map(|r| {
                let mut v = serde_json::to_value(r).expect("run serializes");
                if timings {
                    v["elapsed_ms"] = json!(r.elapsed.as_secs_f64() * 1e3);
                }
                v
            })
            .collect();
        let mut classical = serde_json::to_value(&self.classical).expect("classical serializes");
        if timings {
            classical["elapsed_ms"] = json!(self.classical.elapsed.as_secs_f64() * 1e3);
        }
        let rep = self.representative();
        json!({
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "grid": [self.rows, self.cols],
            "robots": self.robots,
            "length_unit": LENGTH_CONVENTION,
            "classical": classical,
            "qubo": {
                "best_moves": self.best_moves(),
                "median_moves": self.median_moves(),
                "success_rate": self.success_rate(),
                "match_rate": self.match_rate(),
                "original_vars": rep.map(|r| r.original_vars),
                "reduced_vars": rep.map(|r| r.reduced_vars),
                "reduction_pct": rep.map(|r| r.reduction_pct),
                "min_reduction_pct": self.min_reduction_pct(),
                "runs": runs,
            },
            "ratio": self.ratio(),
        })
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Aligned text table, one row per report.
pub fn format_table(reports: &[BenchReport], timings: bool) -> String {
    let mut header = vec![
        "scenario",
        "robots",
        "classical",
        "qubo best",
        "qubo median",
        "ratio",
        "vars orig/red",
        "reduction %",
        "success",
    ];
    if timings {
        header.extend(["classical ms", "qubo ms (mean)"]);
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let rep = r.representative();
            let mut row = vec![
                r.name.clone(),
                r.robots.to_string(),
                opt(r.classical.total_moves),
                opt(r.best_moves()),
                opt(r.median_moves().map(|m| format!("{m:.1}"))),
                opt(r.ratio().map(|x| format!("{x:.3}"))),
                opt(rep.map(|q| format!("{}/{}", q.original_vars, q.reduced_vars))),
                opt(rep.map(|q| format!("{:.2}", q.reduction_pct))),
                format!("{}/{}", r.successful().count(), r.runs.len()),
            ];
            if timings {
                let mean = if r.runs.is_empty() {
                    0.0
                } else {
                    r.runs.iter().map(|q| q.elapsed.as_secs_f64()).sum::<f64>()
                        / r.runs.len() as f64
                };
                row.push(format!("{:.3}", r.classical.elapsed.as_secs_f64() * 1e3));
                row.push(format!("{:.3}", mean * 1e3));
            }
            row
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# {LENGTH_CONVENTION}");
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, &w))| {
                if k == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.clone(), &mut out);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(rule.iter().map(String::as_str).collect(), &mut out);
    for row in &rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}
