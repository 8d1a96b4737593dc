use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::fwhm_to_sigma;
use crate::units::{khz_to_rad_per_s, mhz_to_rad_per_s, us_to_s};

/// One exact Ornstein–Uhlenbeck update over `dt`:
/// `x′ = x e^{−dt/τ} + sqrt((cτ/2)(1 − e^{−2dt/τ})) n`.
pub fn ou_step<R: Rng + ?Sized>(x: f64, dt: f64, tau: f64, c: f64, rng: &mut R) -> f64 {
    let decay = (-dt / tau).exp();
    let n: f64 = StandardNormal.sample(rng);
    x * decay + (0.5 * c * tau * (1.0 - decay * decay)).sqrt() * n
}

/// Static and dynamic detuning noise for the sensing protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    /// FWHM of the static Gaussian detuning, rad/s.
    pub static_fwhm: f64,
    pub static_mean: f64,
    /// OU correlation time `τ`, s.
    pub ou_tau: f64,
    /// OU diffusion constant `c`, (rad/s)²/s.
    pub ou_c: f64,
    /// Amplitude drift applied to every pulse.
    pub kappa: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        let tau = us_to_s(20.0);
        Self {
            static_fwhm: mhz_to_rad_per_s(26.5),
            static_mean: 0.0,
            ou_tau: tau,
            ou_c: Self::diffusion_for_std(khz_to_rad_per_s(50.0), tau),
            kappa: 1.0,
            realizations: 100,
            seed: 0,
        }
    }
}

impl NoiseSettings {
    /// No static spread and no dynamic noise.
    pub fn noiseless() -> Self {
        Self {
            static_fwhm: 0.0,
            ou_c: 0.0,
            realizations: 1,
            ..Self::default()
        }
    }

    /// `c` giving a stationary standard deviation `std`: `c = 2 std² / τ`.
    pub fn diffusion_for_std(std: f64, tau: f64) -> f64 {
        2.0 * std * std / tau
    }

    /// `sqrt(cτ/2)`.
    pub fn stationary_std(&self) -> f64 {
        (0.5 * self.ou_c * self.ou_tau).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ou_tau > 0.0 && self.ou_tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("OU τ {} must be positive", self.ou_tau)));
        }
        if !(self.ou_c >= 0.0 && self.ou_c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "OU c {} must be nonnegative",
                self.ou_c
            )));
        }
        if !(self.static_fwhm >= 0.0 && self.static_fwhm.is_finite() && self.static_mean.is_finite()) {
            return Err(Error::InvalidArgument("static detuning distribution is invalid".into()));
        }
        if !self.kappa.is_finite() {
            return Err(Error::InvalidArgument("κ must be finite".into()));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidArgument("at least one realization is required".into()));
        }
        Ok(())
    }

    /// Static detuning of one realization.
    pub fn draw_static<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.static_fwhm == 0.0 {
            return self.static_mean;
        }
        Normal::new(self.static_mean, fwhm_to_sigma(self.static_fwhm))
            .expect("validated width")
            .sample(rng)
    }

    /// Initial OU value, drawn from the stationary distribution.
    pub fn draw_dynamic<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        self.stationary_std() * n
    }
}
