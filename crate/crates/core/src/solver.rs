//! QUBO sampling backends: exhaustive enumeration for small models and simulated annealing.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{Assignment, QuboModel};

pub const EXHAUSTIVE_MAX_VARS: usize = 24;
const MAX_TIES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("exhaustive backend supports at most {max} variables, model has {found}")]
    TooManyVariables { found: usize, max: usize },
    #[error("invalid solver config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exhaustive,
    #[default]
    Annealer,
}

impl std::str::FromStr for Backend {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(Backend::Exhaustive),
            "annealer" | "anneal" | "sa" => Ok(Backend::Annealer),
            other => Err(SolverError::Config(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: Backend,
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_range: (f64, f64),
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Annealer,
            num_reads: 100,
            sweeps: 1000,
            beta_range: (0.1, 10.0),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.num_reads == 0 {
            return Err(SolverError::Config("num_reads must be at least 1".into()));
        }
        if self.sweeps == 0 {
            return Err(SolverError::Config("sweeps must be at least 1".into()));
        }
        let (b0, b1) = self.beta_range;
        if !(b0 > 0.0 && b0 < b1 && b1.is_finite()) {
            return Err(SolverError::Config(format!(
                "beta_range must satisfy 0 < initial < final, got ({b0}, {b1})"
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
    pub occurrences: usize,
}

/// Distinct samples sorted by energy, ties broken by the assignment's set bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub num_vars: usize,
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn best(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn best_energy(&self) -> f64 {
        self.best().energy
    }

    pub fn total_occurrences(&self) -> usize {
        self.samples.iter().map(|s| s.occurrences).sum()
    }

    /// `(energy, occurrences)` pairs with samples of equal energy merged.
    pub fn energy_histogram(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for s in &self.samples {
            match out.last_mut() {
                Some((e, n)) if *e == s.energy => *n += s.occurrences,
                _ => out.push((s.energy, s.occurrences)),
            }
        }
        out
    }

    fn from_counts(model: &QuboModel, counts: BTreeMap<Vec<bool>, usize>) -> Self {
        let mut samples: Vec<Sample> = counts
            .into_iter()
            .map(|(bits, occurrences)| {
                let assignment = Assignment::from_bits(&bits);
                Sample {
                    energy: model.energy(&assignment),
                    assignment,
                    occurrences,
                }
            })
            .collect();
        samples.sort_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then_with(|| a.assignment.cmp(&b.assignment))
        });
        SampleSet {
            num_vars: model.num_vars(),
            samples,
        }
    }

    fn constant_only(model: &QuboModel, occurrences: usize) -> Self {
        SampleSet {
            num_vars: 0,
            samples: vec![Sample {
                assignment: Assignment::new(),
                energy: model.constant(),
                occurrences,
            }],
        }
    }
}

/// A QUBO sampling backend.
pub trait Sampler {
    fn sample(&self, model: &QuboModel) -> Result<SampleSet, SolverError>;
}

impl Sampler for SolverConfig {
    fn sample(&self, model: &QuboModel) -> Result<SampleSet, SolverError> {
        self.validate()?;
        match self.backend {
            Backend::Exhaustive => solve_exhaustive(model),
            Backend::Annealer => Ok(solve_annealing(model, self)),
        }
    }
}

/// Every minimum-energy assignment, by Gray-code enumeration of all `2^n` states.
pub fn solve_exhaustive(model: &QuboModel) -> Result<SampleSet, SolverError> {
    let n = model.num_vars();
    if n > EXHAUSTIVE_MAX_VARS {
        return Err(SolverError::TooManyVariables {
            found: n,
            max: EXHAUSTIVE_MAX_VARS,
        });
    }
    if n == 0 {
        return Ok(SampleSet::constant_only(model, 1));
    }
    let q = model.compact();
    let tol = 1e-9 * (1.0 + model.max_abs_coefficient() * n as f64);
    let mut x = vec![false; n];
    let mut field = vec![0.0; n];
    let mut energy = model.constant();
    let mut best = energy;
    let mut ties: Vec<Vec<bool>> = vec![x.clone()];
    for k in 1u64..(1u64 << n) {
        let i = k.trailing_zeros() as usize;
        energy += q.flip_delta(&x, &field, i);
        q.apply_flip(&mut x, &mut field, i);
        if energy < best - tol {
            best = energy;
            ties.clear();
            ties.push(x.clone());
        } else if energy <= best + tol && ties.len() < MAX_TIES {
            ties.push(x.clone());
        }
    }
    // Re-evaluate exactly and keep only the true minima among the candidates.
    let exact: Vec<(f64, Vec<bool>)> = ties
        .into_iter()
        .map(|bits| (model.energy_bits(&bits), bits))
        .collect();
    let min = exact.iter().map(|(e, _)| *e).fold(f64::INFINITY, f64::min);
    let counts = exact
        .into_iter()
        .filter(|(e, _)| *e <= min + 1e-9)
        .map(|(_, bits)| (bits, 1))
        .collect();
    Ok(SampleSet::from_counts(model, counts))
}

/// Metropolis rule: downhill and flat moves always, uphill with probability `exp(-beta*dE)`.
#[inline]
pub fn metropolis_accept(delta: f64, beta: f64, uniform: f64) -> bool {
    delta <= 0.0 || uniform < (-beta * delta).exp()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for read `read` of a run seeded with `seed`; also used for window retry seeds.
pub fn sub_seed(seed: u64, read: u64) -> u64 {
    splitmix64(seed ^ splitmix64(read.wrapping_add(1)))
}

/// Single-bit-flip simulated annealing with a geometric inverse-temperature schedule.
///
/// Reads run in parallel; each has its own generator seeded from `(seed, read)`, so the
/// result does not depend on the thread count.
pub fn solve_annealing(model: &QuboModel, cfg: &SolverConfig) -> SampleSet {
    let n = model.num_vars();
    let reads = cfg.num_reads.max(1);
    if n == 0 {
        return SampleSet::constant_only(model, reads);
    }
    let q = model.compact();
    let betas = beta_schedule(cfg.beta_range, cfg.sweeps.max(1));
    let finals: Vec<Vec<bool>> = (0..reads as u64)
        .into_par_iter()
        .map(|read| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, read));
            let mut x: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
            let mut field = q.fields(&x);
            for &beta in &betas {
                for i in 0..n {
                    let delta = q.flip_delta(&x, &field, i);
                    if metropolis_accept(delta, beta, rng.gen::<f64>()) {
                        q.apply_flip(&mut x, &mut field, i);
                    }
                }
            }
            x
        })
        .collect();
    let mut counts: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for x in finals {
        *counts.entry(x).or_default() += 1;
    }
    SampleSet::from_counts(model, counts)
}

fn beta_schedule((b0, b1): (f64, f64), sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![b1];
    }
    let ratio = (b1 / b0).powf(1.0 / (sweeps - 1) as f64);
    (0..sweeps).map(|k| b0 * ratio.powi(k as i32)).collect()
}
