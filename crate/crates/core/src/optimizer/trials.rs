use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{optimize, OptConfig, OptRun};
use crate::error::{Error, Result};

/// Bins of the `F_verified` histogram over `[0, 1]`.
pub const HISTOGRAM_BINS: usize = 100;

/// Seed of trial `index`: SplitMix64 applied to
/// `master + (index + 1)·0x9E3779B97F4A7C15`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    /// Successful runs, in trial order.
    pub runs: Vec<OptRun>,
    pub failures: Vec<TrialFailure>,
    pub mean_f: f64,
    pub median_f: f64,
    pub best_f: f64,
    pub mean_true_calls: f64,
    /// Counts of `F_verified` in `HISTOGRAM_BINS` equal bins over `[0, 1]`.
    pub histogram: Vec<usize>,
}

impl TrialStats {
    fn from_runs(runs: Vec<OptRun>, failures: Vec<TrialFailure>) -> Self {
        let n = runs.len() as f64;
        let mut f: Vec<f64> = runs.iter().map(|r| r.f_verified).collect();
        f.sort_by(f64::total_cmp);
        let median_f = if f.len() % 2 == 1 {
            f[f.len() / 2]
        } else {
            0.5 * (f[f.len() / 2 - 1] + f[f.len() / 2])
        };
        let mut histogram = vec![0; HISTOGRAM_BINS];
        for v in &f {
            histogram[((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        }
        Self {
            mean_f: f.iter().sum::<f64>() / n,
            median_f,
            best_f: *f.last().expect("at least one run"),
            mean_true_calls: runs.iter().map(|r| r.true_calls as f64).sum::<f64>() / n,
            histogram,
            runs,
            failures,
        }
    }

    /// Runs with `F_verified ≥ threshold`.
    pub fn count_at_least(&self, threshold: f64) -> usize {
        self.runs.iter().filter(|r| r.f_verified >= threshold).count()
    }
}

/// Runs `n_trials` independent optimisations with seeds from
/// [`trial_seed`]. `threads = None` uses the global pool. Failed trials are
/// recorded; the call fails only when every trial does.
pub fn run_trials(config: &OptConfig, n_trials: usize, threads: Option<usize>) -> Result<TrialStats> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    config.validate()?;
    let one = |i: usize| {
        let seed = trial_seed(config.seed, i);
        let cfg = OptConfig { seed, ..config.clone() };
        optimize(&cfg).map_err(|e| TrialFailure {
            trial: i,
            seed,
            error: e.to_string(),
        })
    };
    let results: Vec<_> = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| (0..n_trials).into_par_iter().map(one).collect()),
        None => (0..n_trials).into_par_iter().map(one).collect(),
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(f) => failures.push(f),
        }
    }
    if runs.is_empty() {
        return Err(Error::AllTrialsFailed(n_trials));
    }
    Ok(TrialStats::from_runs(runs, failures))
}
