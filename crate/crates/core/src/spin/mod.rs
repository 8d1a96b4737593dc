//! Driven two-level spin in the rotating frame with detuning `δ` and
//! amplitude drift `κ`.

mod field;
mod grid;
mod propagate;
mod unitary;

pub use field::{Basis, BasisKind, ControlField, DENSE_GRID_POINTS};
pub use grid::{
    ensemble_objective, fidelity_map, fwhm_to_sigma, gaussian_weight, EnsembleValue, FidelityKind, NoiseGrid,
    PointFidelity,
};
pub(crate) use grid::{exact_sqrt, weighted_sum};
pub use propagate::{
    check_target, gate_fidelity, gate_fidelity_of, propagate, state_fidelity, Integrator, SampledDrive, DEFAULT_STEPS,
};
pub(crate) use unitary::su2_step;
pub use unitary::Unitary2;
