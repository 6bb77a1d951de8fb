//! Multi-seed runs over a grid of configurations.

use rayon::prelude::*;

use super::{run, SimConfig, SimResult};
use crate::error::{Error, Result};

/// Mean of per-seed DFR values with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DfrStats {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: usize,
}

impl DfrStats {
    pub fn overlaps(&self, other: &DfrStats) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

pub fn summarize(values: &[f64]) -> DfrStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let half = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    DfrStats {
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        runs: n,
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub dfr: Vec<f64>,
    pub stats: DfrStats,
    /// Per-seed results, in seed order.
    pub results: Vec<SimResult>,
}

/// Runs every `(config, seed)` pair, in parallel, and returns one row per
/// config in grid order. The config's own `seed` field is overridden.
pub fn sweep(grid: &[SimConfig], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one config and one seed"));
    }
    for cfg in grid {
        cfg.validate()?;
    }
    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|g| seeds.iter().map(move |&s| (g, s)))
        .collect();
    let results: Vec<SimResult> = jobs
        .par_iter()
        .map(|&(g, seed)| {
            let mut cfg = grid[g].clone();
            cfg.seed = seed;
            cfg.trace_output = None;
            run(&cfg)
        })
        .collect::<Result<_>>()?;
    let mut results = results.into_iter();
    Ok(grid
        .iter()
        .map(|cfg| {
            let results: Vec<SimResult> = results.by_ref().take(seeds.len()).collect();
            let dfr: Vec<f64> = results.iter().map(|r| r.dfr).collect();
            SweepRow {
                config: cfg.clone(),
                seeds: seeds.to_vec(),
                stats: summarize(&dfr),
                dfr,
                results,
            }
        })
        .collect())
}
