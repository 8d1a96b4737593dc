use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::ControlField;
use crate::units::{mhz_to_rad_per_s, ns_to_s, rad_per_ns_to_rad_per_s};

/// Rotation axes of one XY-8 period.
pub const XY8_ORDER: [Axis; 8] = [Axis::X, Axis::Y, Axis::X, Axis::Y, Axis::Y, Axis::X, Axis::Y, Axis::X];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// What sits in each pulse slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseKind {
    /// Constant drive with Rabi frequency `rabi` (rad/s) for the pulse length.
    RectPi { rabi: f64 },
    /// Shaped X pulse; the Y pulse uses the quadratures rotated by 90°,
    /// `(Ωx, Ωy) → (−Ωy, Ωx)`.
    ShapedPm { field: ControlField },
    /// Perfect π rotations of zero duration at the pulse centres.
    Instantaneous,
}

impl PulseKind {
    pub fn label(&self) -> &'static str {
        match self {
            PulseKind::RectPi { .. } => "rectangular",
            PulseKind::ShapedPm { .. } => "pm",
            PulseKind::Instantaneous => "ideal",
        }
    }

    /// The optimised PM π pulse of the sensing example: `N_D = 2`,
    /// `T = 100 ns`.
    pub fn paper_pm() -> Self {
        let r = rad_per_ns_to_rad_per_s;
        let field = ControlField::pm(
            vec![r(0.0583), r(0.0046)],
            vec![r(0.0844), r(0.1493)],
            vec![r(0.0307), r(0.0413)],
            ns_to_s(100.0),
            mhz_to_rad_per_s(10.0),
        )
        .expect("valid constants");
        PulseKind::ShapedPm { field }
    }
}

/// Repeated XY-8 blocks with pulses centred on the zero crossings of
/// `cos(ω_s t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub kind: PulseKind,
    /// `T_pulse`, s.
    pub pulse_length: f64,
    /// `τ_pulse`, s.
    pub spacing: f64,
    pub periods: usize,
}

/// Builds the schedule. For shaped pulses the field duration must equal
/// `pulse_length`.
pub fn build_xy8(kind: PulseKind, pulse_length: f64, spacing: f64, periods: usize) -> Result<PulseSequence> {
    if !(pulse_length > 0.0 && pulse_length.is_finite() && spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pulse length {pulse_length} and spacing {spacing} must be positive"
        )));
    }
    match &kind {
        PulseKind::ShapedPm { field } => {
            field.validate()?;
            if (field.duration - pulse_length).abs() > 1e-12 * pulse_length {
                return Err(Error::InvalidArgument(format!(
                    "shaped field lasts {} s but the pulse slot is {pulse_length} s",
                    field.duration
                )));
            }
        }
        PulseKind::RectPi { rabi } if !(rabi.is_finite() && *rabi > 0.0) => {
            return Err(Error::InvalidArgument(format!(
                "Rabi frequency {rabi} must be positive"
            )));
        }
        _ => {}
    }
    Ok(PulseSequence {
        kind,
        pulse_length,
        spacing,
        periods,
    })
}

impl PulseSequence {
    /// Rectangular π pulses at `Ω_max = 2π × 10 MHz`: 50 ns long, 350 ns apart.
    pub fn paper_rectangular(periods: usize) -> Self {
        let rabi = mhz_to_rad_per_s(10.0);
        build_xy8(PulseKind::RectPi { rabi }, ns_to_s(50.0), ns_to_s(350.0), periods).expect("valid constants")
    }

    /// Optimised PM π pulses: 100 ns long, 300 ns apart.
    pub fn paper_pm(periods: usize) -> Self {
        build_xy8(PulseKind::paper_pm(), ns_to_s(100.0), ns_to_s(300.0), periods).expect("valid constants")
    }

    /// `T_pulse + τ_pulse`, the spacing between pulse centres.
    pub fn slot(&self) -> f64 {
        self.pulse_length + self.spacing
    }

    /// `ω_s = π / (T_pulse + τ_pulse)`.
    pub fn signal_frequency(&self) -> f64 {
        PI / self.slot()
    }

    /// `8 (T_pulse + τ_pulse)`.
    pub fn period(&self) -> f64 {
        8.0 * self.slot()
    }

    pub fn len(&self) -> usize {
        8 * self.periods
    }

    pub fn is_empty(&self) -> bool {
        self.periods == 0
    }

    /// `(centre, axis)` of every pulse in time order.
    pub fn pulses(&self) -> impl Iterator<Item = (f64, Axis)> + '_ {
        (0..self.len()).map(|i| ((i as f64 + 0.5) * self.slot(), XY8_ORDER[i % 8]))
    }

    /// Quadratures `(Ωx, Ωy)` at time `t` from the start of a pulse about `axis`.
    pub fn quadratures(&self, axis: Axis, t: f64) -> (f64, f64) {
        let (x, y) = match &self.kind {
            PulseKind::RectPi { rabi } => (0.5 * rabi, 0.0),
            PulseKind::ShapedPm { field } => field.quadratures(t),
            PulseKind::Instantaneous => (0.0, 0.0),
        };
        match axis {
            Axis::X => (x, y),
            Axis::Y => (-y, x),
        }
    }
}
