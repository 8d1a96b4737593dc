//! Constant-mean Kriging estimator of the single-point fidelity `f(δ, κ)`.
//!
//! Coordinates are rescaled to the unit square before distances are taken,
//! so the correlation parameters are dimensionless and comparable across
//! the two axes.

mod design;
mod kernel;
mod kriging;

pub use design::{jittered_grid, Jitter, Region};
pub use kernel::{correlation, CorrelationParams};
pub use kriging::{
    ols_slope, surrogate_objective, FitOptions, GridBasis, KrigingModel, ModelRecord, NUGGET, SEPARATION_FLOOR,
};
