//! XY-8 dynamical-decoupling AC magnetometry on an ensemble with static
//! and Ornstein–Uhlenbeck detuning noise.

mod noise;
mod ramsey;
mod sequence;
mod signal;

pub use noise::{ou_step, NoiseSettings};
pub use ramsey::{estimate_t2, simulate_ramsey, RamseyOptions, RamseyTrace, T2Estimate, TracePoint, T2_BLOCK};
pub use sequence::{build_xy8, Axis, PulseKind, PulseSequence, XY8_ORDER};
pub use signal::{ideal_phase, AcSignal};
