use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::units::mhz_to_rad_per_s;

/// `g_ac cos(ω_s t) σ_z`, zero phase at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcSignal {
    /// `g_ac`, rad/s.
    pub amplitude: f64,
    /// `ω_s`, rad/s.
    pub frequency: f64,
}

impl AcSignal {
    /// Amplitude `2π × 0.1 MHz` at the given frequency.
    pub fn with_frequency(frequency: f64) -> Self {
        Self {
            amplitude: mhz_to_rad_per_s(0.1),
            frequency,
        }
    }

    /// `∫ g cos(ω t′) dt′` over `[t0, t1]`.
    #[inline]
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * ((self.frequency * t1).sin() - (self.frequency * t0).sin()) / self.frequency
    }
}

/// `χ(t) = ∫₀ᵗ g |cos(ω t′)| dt′`. Each completed half period contributes
/// `2g/ω`; the remainder is integrated in closed form.
pub fn ideal_phase(g_ac: f64, omega: f64, t: f64) -> f64 {
    let half = PI / omega;
    // |cos| restarts at the zero crossings ω t = π/2 + kπ
    let shifted = t + 0.5 * half;
    let k = (shifted / half).floor();
    let r = shifted - k * half;
    // from −π/2 to ωr − π/2 within one lobe: 1 − cos(ω r)
    let lobe = |r: f64| (1.0 - (omega * r).cos()) / omega;
    // the first lobe starts at t = −half/2
    g_ac * (k * 2.0 / omega + lobe(r) - lobe(0.5 * half))
}
