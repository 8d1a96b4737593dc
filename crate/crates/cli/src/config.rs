//! Run configuration. Every physical quantity carries its unit in the key
//! name; frequencies written `_mhz` / `_khz` are ordinary frequencies and
//! are multiplied by 2π on conversion.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bpm_core::magnetometry::{build_xy8, AcSignal, NoiseSettings, PulseKind, PulseSequence, RamseyOptions};
use bpm_core::optimizer::{Method, OptConfig, OptRun, SearchOptions};
use bpm_core::spin::{ControlField, FidelityKind, NoiseGrid};
use bpm_core::surrogate::{FitOptions, Jitter};
use bpm_core::units::{khz_to_rad_per_s, mhz_to_rad_per_s, ns_to_s, rad_per_ns_to_rad_per_s, us_to_s};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub pulse: PulseConfig,
    pub noise_grid: GridConfig,
    pub optimizer: OptimizerConfig,
    pub surrogate_demo: DemoConfig,
    pub magnetometry: MagnetometryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            pulse: PulseConfig::default(),
            noise_grid: GridConfig::default(),
            optimizer: OptimizerConfig::default(),
            surrogate_demo: DemoConfig::default(),
            magnetometry: MagnetometryConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub duration_ns: f64,
    pub omega_max_mhz: f64,
    pub n_steps: usize,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            duration_ns: 100.0,
            omega_max_mhz: 10.0,
            n_steps: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub delta_min_mhz: f64,
    pub delta_max_mhz: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub m: usize,
    pub n: usize,
    pub delta_fwhm_mhz: f64,
    pub delta_mean_mhz: f64,
    pub kappa_fwhm: f64,
    pub kappa_mean: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            delta_min_mhz: -10.0,
            delta_max_mhz: 10.0,
            kappa_min: 0.5,
            kappa_max: 1.5,
            m: 50,
            n: 50,
            delta_fwhm_mhz: 26.5,
            delta_mean_mhz: 0.0,
            kappa_fwhm: 0.5,
            kappa_mean: 1.0,
        }
    }
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<NoiseGrid> {
        let grid = NoiseGrid {
            delta_range: [
                mhz_to_rad_per_s(self.delta_min_mhz),
                mhz_to_rad_per_s(self.delta_max_mhz),
            ],
            kappa_range: [self.kappa_min, self.kappa_max],
            m: self.m,
            n: self.n,
            fwhm_delta: mhz_to_rad_per_s(self.delta_fwhm_mhz),
            fwhm_kappa: self.kappa_fwhm,
            delta_mean: mhz_to_rad_per_s(self.delta_mean_mhz),
            kappa_mean: self.kappa_mean,
        };
        grid.validate().context("noise_grid")?;
        Ok(grid)
    }
}

/// A control field in the units of the published parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Pm {
        a_rad_per_ns: Vec<f64>,
        b_rad_per_ns: Vec<f64>,
        nu_rad_per_ns: Vec<f64>,
    },
    Sfb {
        a_rad_per_ns: Vec<f64>,
        omega_rad_per_ns: Vec<f64>,
        phase_rad: Vec<f64>,
        axis_rad: Vec<f64>,
    },
}

impl FieldSpec {
    pub fn to_field(&self, duration: f64, amp_limit: f64) -> Result<ControlField> {
        let r = |v: &[f64]| v.iter().map(|x| rad_per_ns_to_rad_per_s(*x)).collect::<Vec<_>>();
        Ok(match self {
            FieldSpec::Pm {
                a_rad_per_ns,
                b_rad_per_ns,
                nu_rad_per_ns,
            } => ControlField::pm(r(a_rad_per_ns), r(b_rad_per_ns), r(nu_rad_per_ns), duration, amp_limit)?,
            FieldSpec::Sfb {
                a_rad_per_ns,
                omega_rad_per_ns,
                phase_rad,
                axis_rad,
            } => ControlField::sfb(
                r(a_rad_per_ns),
                r(omega_rad_per_ns),
                phase_rad.clone(),
                axis_rad.clone(),
                duration,
                amp_limit,
            )?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    pub n_d: usize,
    pub samples: usize,
    pub search_grid: [usize; 2],
    pub max_model_attempts: usize,
    pub f_tol: f64,
    pub iterations_per_dim: usize,
    pub initial_step_fraction: f64,
    pub trials: usize,
    /// `(method, N_D)` pairs run by `compare`.
    pub compare: Vec<(Method, usize)>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let search = SearchOptions::default();
        Self {
            method: Method::BPm,
            n_d: 1,
            samples: 9,
            search_grid: [4, 4],
            max_model_attempts: 10,
            f_tol: search.f_tol,
            iterations_per_dim: search.iterations_per_dim,
            initial_step_fraction: search.initial_step_fraction,
            trials: 20,
            compare: vec![(Method::BPm, 1), (Method::Pm, 1), (Method::BSfb, 2), (Method::Sfb, 2)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub field: FieldSpec,
    pub sample_counts: Vec<usize>,
    /// Square lattice sizes `M×N` for the cost and deviation tables.
    pub lattice_sizes: Vec<usize>,
    /// Random fields averaged per table row.
    pub fields: usize,
    /// Surrogate sample count used by the tables.
    pub table_samples: usize,
    /// Replace the fidelity by this constant and use unjittered samples.
    pub synthetic_constant: Option<f64>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            field: FieldSpec::Pm {
                a_rad_per_ns: vec![0.0332],
                b_rad_per_ns: vec![0.0104],
                nu_rad_per_ns: vec![0.0378],
            },
            sample_counts: vec![9, 16],
            lattice_sizes: vec![4, 9, 16, 25, 36, 49, 64, 81, 100, 225, 400, 900, 1600, 2500],
            fields: 100,
            table_samples: 16,
            synthetic_constant: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlotConfig {
    pub pulse_ns: f64,
    pub spacing_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagnetometryConfig {
    pub realizations: usize,
    pub t_max_us: f64,
    pub g_ac_mhz: f64,
    pub noise_enabled: bool,
    pub static_fwhm_mhz: f64,
    pub ou_tau_us: f64,
    pub ou_std_khz: f64,
    pub kappa: f64,
    pub pulse_steps: usize,
    pub free_step_ns: f64,
    pub rectangular: SlotConfig,
    pub shaped: SlotConfig,
    pub shaped_field: FieldSpec,
    /// Optional `run.json` from `optimize`; its field replaces `shaped_field`.
    pub shaped_field_path: Option<PathBuf>,
    /// Also run a reference trace with instantaneous pulses on the
    /// rectangular slot timing.
    pub ideal_reference: bool,
}

impl Default for SlotConfig {
    fn default() -> Self {
        Self {
            pulse_ns: 50.0,
            spacing_ns: 350.0,
        }
    }
}

impl Default for MagnetometryConfig {
    fn default() -> Self {
        Self {
            realizations: 100,
            t_max_us: 400.0,
            g_ac_mhz: 0.1,
            noise_enabled: true,
            static_fwhm_mhz: 26.5,
            ou_tau_us: 20.0,
            ou_std_khz: 50.0,
            kappa: 1.0,
            pulse_steps: 100,
            free_step_ns: 10.0,
            rectangular: SlotConfig::default(),
            shaped: SlotConfig {
                pulse_ns: 100.0,
                spacing_ns: 300.0,
            },
            shaped_field: FieldSpec::Pm {
                a_rad_per_ns: vec![0.0583, 0.0046],
                b_rad_per_ns: vec![0.0844, 0.1493],
                nu_rad_per_ns: vec![0.0307, 0.0413],
            },
            shaped_field_path: None,
            ideal_reference: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.check()?;
        Ok(config)
    }

    /// Conversions that can fail, run once up front so that a bad config
    /// is reported as a usage error.
    pub fn check(&self) -> Result<()> {
        self.opt_config()?.validate()?;
        self.demo_field()?;
        let m = &self.magnetometry;
        if m.shaped_field_path.is_none() {
            self.rectangular_sequence()?;
            self.shaped_sequence()?;
        }
        self.noise_settings()?.validate()?;
        if !(m.t_max_us > 0.0 && m.g_ac_mhz >= 0.0 && m.free_step_ns > 0.0 && m.pulse_steps > 0) {
            bail!("magnetometry: t_max_us, free_step_ns and pulse_steps must be positive and g_ac_mhz nonnegative");
        }
        if self
            .surrogate_demo
            .lattice_sizes
            .iter()
            .any(|s| bpm_core::spin::NoiseGrid::default().square(*s).is_err())
        {
            bail!("surrogate_demo.lattice_sizes must be perfect squares");
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        ns_to_s(self.pulse.duration_ns)
    }

    pub fn amp_limit(&self) -> f64 {
        mhz_to_rad_per_s(self.pulse.omega_max_mhz)
    }

    pub fn opt_config(&self) -> Result<OptConfig> {
        let o = &self.optimizer;
        Ok(OptConfig {
            method: o.method,
            n_sets: o.n_d,
            samples: o.samples,
            search_grid: o.search_grid,
            grid: self.noise_grid.to_grid()?,
            duration: self.duration(),
            amp_limit: self.amp_limit(),
            n_steps: self.pulse.n_steps,
            integrator: Default::default(),
            fidelity: FidelityKind::State,
            search: SearchOptions {
                f_tol: o.f_tol,
                iterations_per_dim: o.iterations_per_dim,
                initial_step_fraction: o.initial_step_fraction,
            },
            fit: FitOptions::default(),
            jitter: Jitter::Uniform,
            max_model_attempts: o.max_model_attempts,
            seed: self.seed,
        })
    }

    pub fn demo_field(&self) -> Result<ControlField> {
        self.surrogate_demo.field.to_field(self.duration(), self.amp_limit())
    }

    pub fn noise_settings(&self) -> Result<NoiseSettings> {
        let m = &self.magnetometry;
        let tau = us_to_s(m.ou_tau_us);
        let (fwhm, c) = if m.noise_enabled {
            (
                mhz_to_rad_per_s(m.static_fwhm_mhz),
                NoiseSettings::diffusion_for_std(khz_to_rad_per_s(m.ou_std_khz), tau),
            )
        } else {
            (0.0, 0.0)
        };
        Ok(NoiseSettings {
            static_fwhm: fwhm,
            static_mean: 0.0,
            ou_tau: tau,
            ou_c: c,
            kappa: m.kappa,
            realizations: m.realizations,
            seed: self.seed,
        })
    }

    pub fn rectangular_sequence(&self) -> Result<PulseSequence> {
        let s = &self.magnetometry.rectangular;
        Ok(build_xy8(
            PulseKind::RectPi { rabi: self.amp_limit() },
            ns_to_s(s.pulse_ns),
            ns_to_s(s.spacing_ns),
            1,
        )?)
    }

    pub fn shaped_sequence(&self) -> Result<PulseSequence> {
        let m = &self.magnetometry;
        let field = match &m.shaped_field_path {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let run: OptRun = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                run.field
            }
            None => m.shaped_field.to_field(ns_to_s(m.shaped.pulse_ns), self.amp_limit())?,
        };
        Ok(build_xy8(
            PulseKind::ShapedPm { field },
            ns_to_s(m.shaped.pulse_ns),
            ns_to_s(m.shaped.spacing_ns),
            1,
        )?)
    }

    pub fn ideal_sequence(&self) -> Result<PulseSequence> {
        let s = &self.magnetometry.rectangular;
        Ok(build_xy8(
            PulseKind::Instantaneous,
            ns_to_s(s.pulse_ns),
            ns_to_s(s.spacing_ns),
            1,
        )?)
    }

    pub fn signal(&self, seq: &PulseSequence) -> AcSignal {
        AcSignal {
            amplitude: mhz_to_rad_per_s(self.magnetometry.g_ac_mhz),
            frequency: seq.signal_frequency(),
        }
    }

    pub fn ramsey_options(&self) -> RamseyOptions {
        let m = &self.magnetometry;
        RamseyOptions {
            t_max: Some(us_to_s(m.t_max_us)),
            pulse_steps: m.pulse_steps,
            free_step: ns_to_s(m.free_step_ns),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn shipped_defaults_match_code() {
        let text = include_str!("../../../configs/paper_defaults.json");
        let parsed: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(parsed, RunConfig::default());
    }

    #[test]
    fn conversion_vector() {
        let c = RunConfig::default();
        let o = c.opt_config().unwrap();
        assert!((o.duration - 1e-7).abs() < 1e-22);
        assert!((o.amp_limit - 2.0 * PI * 1e7).abs() < 1e-6);
        assert!((o.grid.delta_range[1] - 2.0 * PI * 1e7).abs() < 1e-6);
        assert!((o.grid.fwhm_delta - 2.0 * PI * 26.5e6).abs() < 1e-6);
        let n = c.noise_settings().unwrap();
        assert!((n.ou_tau - 2e-5).abs() < 1e-20);
        assert!((n.stationary_std() - 2.0 * PI * 5e4).abs() < 1e-6);
        let seq = c.shaped_sequence().unwrap();
        assert!((seq.pulse_length - 1e-7).abs() < 1e-22);
        assert!((seq.signal_frequency() - 2.5 * PI * 1e6).abs() < 1e-6);
        match &seq.kind {
            PulseKind::ShapedPm { field } => {
                assert!((field.params()[0] - 0.0583e9).abs() < 1e-3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"pulse": {"duration_us": 1}}"#).is_err());
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 5}"#).unwrap();
        assert_eq!(partial.seed, 5);
        assert_eq!(partial.pulse, PulseConfig::default());
    }
}
