use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::ControlField;
use super::propagate::{check_target, gate_fidelity_of, Integrator, SampledDrive};
use super::unitary::Unitary2;
use crate::error::{Error, Result};
use crate::units::mhz_to_rad_per_s;

/// Gaussian density at `x` with the given full width at half maximum.
pub fn gaussian_weight(x: f64, mean: f64, fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::InvalidArgument(format!("fwhm must be positive, got {fwhm}")));
    }
    let sigma = fwhm_to_sigma(fwhm);
    let z = (x - mean) / sigma;
    Ok((-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma))
}

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt())
}

/// Uniform `(δ, κ)` evaluation lattice with Gaussian weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    /// `[δ_min, δ_max]` in rad/s.
    pub delta_range: [f64; 2],
    pub kappa_range: [f64; 2],
    /// Number of `δ` values.
    pub m: usize,
    /// Number of `κ` values.
    pub n: usize,
    pub fwhm_delta: f64,
    pub fwhm_kappa: f64,
    #[serde(default)]
    pub delta_mean: f64,
    #[serde(default = "one")]
    pub kappa_mean: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for NoiseGrid {
    /// `δ ∈ 2π×[−10, 10]` MHz, `κ ∈ [0.5, 1.5]`, 50×50 points,
    /// FWHM 2π×26.5 MHz and 0.5.
    fn default() -> Self {
        Self {
            delta_range: [mhz_to_rad_per_s(-10.0), mhz_to_rad_per_s(10.0)],
            kappa_range: [0.5, 1.5],
            m: 50,
            n: 50,
            fwhm_delta: mhz_to_rad_per_s(26.5),
            fwhm_kappa: 0.5,
            delta_mean: 0.0,
            kappa_mean: 1.0,
        }
    }
}

impl NoiseGrid {
    /// Same region and distributions, different resolution.
    pub fn with_size(&self, m: usize, n: usize) -> Self {
        Self { m, n, ..self.clone() }
    }

    /// Square lattice with `total` points; `total` must be a perfect square.
    pub fn square(&self, total: usize) -> Result<Self> {
        let side = exact_sqrt(total).ok_or_else(|| Error::InvalidGrid(format!("{total} is not a perfect square")))?;
        Ok(self.with_size(side, side))
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidGrid("grid needs at least one point per axis".into()));
        }
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ordered(self.delta_range) || !ordered(self.kappa_range) {
            return Err(Error::InvalidGrid("ranges must be finite and ordered".into()));
        }
        if !(self.fwhm_delta > 0.0 && self.fwhm_kappa > 0.0) {
            return Err(Error::InvalidGrid("FWHM values must be positive".into()));
        }
        Ok(())
    }

    pub fn deltas(&self) -> Vec<f64> {
        linspace(self.delta_range, self.m)
    }

    pub fn kappas(&self) -> Vec<f64> {
        linspace(self.kappa_range, self.n)
    }

    /// Lattice points in `δ`-major order.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let kappas = self.kappas();
        self.deltas()
            .into_iter()
            .flat_map(|d| kappas.iter().map(move |&k| [d, k]))
            .collect()
    }

    /// `𝒩 p(δ_k) p(κ_j)` in the order of [`points`](Self::points); sums to 1.
    pub fn weights(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let pd = self
            .deltas()
            .iter()
            .map(|&d| gaussian_weight(d, self.delta_mean, self.fwhm_delta))
            .collect::<Result<Vec<_>>>()?;
        let pk = self
            .kappas()
            .iter()
            .map(|&k| gaussian_weight(k, self.kappa_mean, self.fwhm_kappa))
            .collect::<Result<Vec<_>>>()?;
        let raw: Vec<f64> = pd.iter().flat_map(|a| pk.iter().map(move |b| a * b)).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidGrid("weights underflow to zero".into()));
        }
        let norm = 1.0 / total;
        Ok(raw.into_iter().map(|w| w * norm).collect())
    }

    /// `𝒩 Σ p(δ_k) p(κ_j) f(δ_k, κ_j)` with the terms reduced in lattice
    /// order. `f` is evaluated in parallel.
    pub fn weighted_average(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<f64> {
        let weights = self.weights()?;
        let values = self.map(f);
        Ok(weighted_sum(&weights, &values))
    }

    /// `f` at every lattice point, in lattice order.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        self.points().par_iter().map(|&[d, k]| f(d, k)).collect()
    }
}

pub(crate) fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

fn linspace(range: [f64; 2], count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (range[0] + range[1])];
    }
    let step = (range[1] - range[0]) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                range[1]
            } else {
                range[0] + step * i as f64
            }
        })
        .collect()
}

pub(crate) fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// What the single-point fidelity measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FidelityKind {
    /// `|⟨1|U|0⟩|²`.
    State,
    /// Average gate fidelity against a target unitary.
    Gate { target: Unitary2 },
}

impl FidelityKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            FidelityKind::State => Ok(()),
            FidelityKind::Gate { target } => check_target(target),
        }
    }
}

/// The single-point true fidelity `f(δ, κ)` of one field.
#[derive(Clone, Debug)]
pub struct PointFidelity {
    drive: SampledDrive,
    kind: FidelityKind,
}

impl PointFidelity {
    pub fn new(field: &ControlField, kind: &FidelityKind, n_steps: usize) -> Result<Self> {
        Self::with_integrator(field, kind, n_steps, Integrator::default())
    }

    pub fn with_integrator(
        field: &ControlField,
        kind: &FidelityKind,
        n_steps: usize,
        integrator: Integrator,
    ) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            drive: SampledDrive::new(field, n_steps, integrator)?,
            kind: kind.clone(),
        })
    }

    pub fn eval(&self, detuning: f64, drift: f64) -> f64 {
        match &self.kind {
            FidelityKind::State => self.drive.state_fidelity(detuning, drift),
            FidelityKind::Gate { target } => gate_fidelity_of(&self.drive.propagate(detuning, drift), target),
        }
    }
}

/// Ensemble-averaged fidelity and the number of single-point evaluations it
/// cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleValue {
    pub value: f64,
    pub evaluations: usize,
}

/// `F_obj` of `field` on `grid`.
pub fn ensemble_objective(
    field: &ControlField,
    grid: &NoiseGrid,
    kind: &FidelityKind,
    n_steps: usize,
) -> Result<EnsembleValue> {
    let point = PointFidelity::new(field, kind, n_steps)?;
    let value = grid.weighted_average(|d, k| point.eval(d, k))?;
    Ok(EnsembleValue {
        value,
        evaluations: grid.len(),
    })
}

/// Single-point fidelities over the whole lattice, in lattice order.
pub fn fidelity_map(field: &ControlField, grid: &NoiseGrid, kind: &FidelityKind, n_steps: usize) -> Result<Vec<f64>> {
    grid.validate()?;
    let point = PointFidelity::new(field, kind, n_steps)?;
    Ok(grid.map(|d, k| point.eval(d, k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_peak_and_half_width() {
        let fwhm = mhz_to_rad_per_s(26.5);
        let sigma = fwhm_to_sigma(fwhm);
        let peak = gaussian_weight(3.0, 3.0, fwhm).unwrap();
        assert!((peak - 1.0 / ((2.0 * PI).sqrt() * sigma)).abs() / peak < 1e-14);
        for x in [3.0 - fwhm / 2.0, 3.0 + fwhm / 2.0] {
            let half = gaussian_weight(x, 3.0, fwhm).unwrap();
            assert!((half / peak - 0.5).abs() < 1e-12);
        }
        assert!(gaussian_weight(0.0, 0.0, 0.0).is_err());
        assert!(gaussian_weight(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn default_grid_is_uniform_and_inclusive() {
        let g = NoiseGrid::default();
        let d = g.deltas();
        assert_eq!(d.len(), 50);
        assert_eq!(d[0], mhz_to_rad_per_s(-10.0));
        assert_eq!(d[49], mhz_to_rad_per_s(10.0));
        let k = g.kappas();
        assert_eq!((k[0], k[49]), (0.5, 1.5));
        let step = k[1] - k[0];
        assert!(k.windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-12));
    }

    #[test]
    fn weights_normalised_and_positive() {
        for (m, n) in [(50, 50), (4, 4), (10, 10), (1, 1), (3, 7)] {
            let w = NoiseGrid::default().with_size(m, n).weights().unwrap();
            assert!(w.iter().all(|&x| x > 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_requires_perfect_square() {
        assert_eq!(NoiseGrid::default().square(16).unwrap().m, 4);
        assert!(NoiseGrid::default().square(15).is_err());
    }

    #[test]
    fn constant_fidelity_averages_to_constant() {
        let g = NoiseGrid::default().with_size(7, 9);
        let v = g.weighted_average(|_, _| 0.37).unwrap();
        assert!((v - 0.37).abs() < 1e-14);
    }

    #[test]
    fn evaluation_count_is_grid_size() {
        let f = ControlField::zero(100e-9, mhz_to_rad_per_s(10.0));
        let g = NoiseGrid::default().with_size(3, 5);
        let v = ensemble_objective(&f, &g, &FidelityKind::State, 50).unwrap();
        assert_eq!(v.evaluations, 15);
        assert_eq!(v.value, 0.0);
    }
}
