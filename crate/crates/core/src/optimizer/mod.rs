//! Hybrid surrogate-assisted pulse optimisation and its baselines.

mod pipeline;
mod simplex;
mod trials;

pub use pipeline::{
    accepts, baseline_optimize, bpm_optimize, build_valid_surrogate, optimize, Method, OptConfig, OptRun,
    SearchOptions, SurrogateBuild, P_FIT_THRESHOLD,
};
pub use simplex::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use trials::{run_trials, trial_seed, TrialFailure, TrialStats};
