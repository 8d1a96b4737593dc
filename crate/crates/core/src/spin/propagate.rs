use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::ControlField;
use super::unitary::{su2_compose, su2_step, Unitary2};
use crate::error::{Error, Result};

/// Default number of integrator steps over the pulse.
pub const DEFAULT_STEPS: usize = 1000;

/// Piecewise-constant integration scheme for `H = (δ/2)σz + κ(Ωx σx + Ωy σy)`.
///
/// Every step is one or two closed-form SU(2) exponentials, so the product
/// is unitary to rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Quadratures sampled at step midpoints, one exponential per step.
    Midpoint,
    /// Fourth-order commutator-free Magnus scheme: quadratures sampled at the
    /// two Gauss–Legendre nodes, two exponentials per step.
    #[default]
    Magnus4,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const GL_C1: f64 = 0.5 - SQRT3 / 6.0;
const GL_C2: f64 = 0.5 + SQRT3 / 6.0;
const CF_A1: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const CF_A2: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

/// A control field sampled once on an integrator's nodes so it can be
/// propagated cheaply at many `(δ, κ)` points.
#[derive(Clone, Debug)]
pub struct SampledDrive {
    /// Per step: drive vectors `[x, y]` of each exponential, in application
    /// order.
    stages: Vec<[f64; 2]>,
    stages_per_step: usize,
    dt: f64,
    /// Weight of the `σz` term in each stage relative to `δ/2`.
    z_weight: f64,
}

impl SampledDrive {
    pub fn new(field: &ControlField, n_steps: usize, integrator: Integrator) -> Result<Self> {
        field.validate()?;
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        Ok(Self::from_fn(
            |t| field.quadratures(t),
            field.duration,
            n_steps,
            integrator,
        ))
    }

    /// Samples an arbitrary quadrature function over `[0, duration]`.
    pub fn from_fn(quad: impl Fn(f64) -> (f64, f64), duration: f64, n_steps: usize, integrator: Integrator) -> Self {
        let dt = duration / n_steps as f64;
        match integrator {
            Integrator::Midpoint => {
                let stages = (0..n_steps)
                    .map(|i| {
                        let (x, y) = quad((i as f64 + 0.5) * dt);
                        [x, y]
                    })
                    .collect();
                Self {
                    stages,
                    stages_per_step: 1,
                    dt,
                    z_weight: 1.0,
                }
            }
            Integrator::Magnus4 => {
                let mut stages = Vec::with_capacity(2 * n_steps);
                for i in 0..n_steps {
                    let t = i as f64 * dt;
                    let (x1, y1) = quad(t + GL_C1 * dt);
                    let (x2, y2) = quad(t + GL_C2 * dt);
                    // exp(h(α2A1 + α1A2)) acts first
                    stages.push([CF_A2 * x1 + CF_A1 * x2, CF_A2 * y1 + CF_A1 * y2]);
                    stages.push([CF_A1 * x1 + CF_A2 * x2, CF_A1 * y1 + CF_A2 * y2]);
                }
                // α1 + α2 = 1/2, so each stage carries half the static term
                Self {
                    stages,
                    stages_per_step: 2,
                    dt,
                    z_weight: 0.5,
                }
            }
        }
    }

    pub fn n_steps(&self) -> usize {
        self.stages.len() / self.stages_per_step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Cayley–Klein pair `(a, b)` of the propagator; `U = [[a, -b*], [b, a*]]`.
    #[inline]
    pub fn propagate_ck(&self, detuning: f64, drift: f64) -> (Complex64, Complex64) {
        let hz = 0.5 * detuning * self.z_weight;
        let mut a = Complex64::new(1.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for &[x, y] in &self.stages {
            let (sa, sb) = su2_step(drift * x, drift * y, hz, self.dt);
            (a, b) = su2_compose(sa, sb, a, b);
        }
        (a, b)
    }

    pub fn propagate(&self, detuning: f64, drift: f64) -> Unitary2 {
        let (a, b) = self.propagate_ck(detuning, drift);
        Unitary2::from_cayley_klein(a, b)
    }

    /// `|⟨1|U|0⟩|²`.
    pub fn state_fidelity(&self, detuning: f64, drift: f64) -> f64 {
        let (_, b) = self.propagate_ck(detuning, drift);
        b.norm_sqr().min(1.0)
    }
}

/// Propagator of the driven spin at detuning `δ` (rad/s) and drift `κ`.
pub fn propagate(field: &ControlField, detuning: f64, drift: f64, n_steps: usize) -> Result<Unitary2> {
    Ok(SampledDrive::new(field, n_steps, Integrator::default())?.propagate(detuning, drift))
}

/// `|⟨ψ1| U_{δ,κ} |ψ0⟩|²`.
pub fn state_fidelity(field: &ControlField, detuning: f64, drift: f64, n_steps: usize) -> Result<f64> {
    Ok(SampledDrive::new(field, n_steps, Integrator::default())?.state_fidelity(detuning, drift))
}

/// `1/2 + (1/3) Σ_ε Tr(U_t (σε/2) U_t† U (σε/2) U†)`.
pub fn gate_fidelity_of(actual: &Unitary2, target: &Unitary2) -> f64 {
    let half = Complex64::new(0.5, 0.0);
    let paulis = [Unitary2::pauli_x(), Unitary2::pauli_y(), Unitary2::pauli_z()];
    let t_adj = target.adjoint();
    let u_adj = actual.adjoint();
    let sum: f64 = paulis
        .iter()
        .map(|p| {
            let s = p.scale(half);
            (*target * s * t_adj * *actual * s * u_adj).trace().re
        })
        .sum();
    (0.5 + sum / 3.0).clamp(0.0, 1.0)
}

pub fn check_target(target: &Unitary2) -> Result<()> {
    let dev = target.unitarity_deviation().max((target.det().norm() - 1.0).abs());
    if dev > 1e-9 || !dev.is_finite() {
        return Err(Error::NonUnitaryTarget(dev));
    }
    Ok(())
}

/// Gate fidelity of the pulse against `target` at one `(δ, κ)` point.
pub fn gate_fidelity(
    field: &ControlField,
    target: &Unitary2,
    detuning: f64,
    drift: f64,
    n_steps: usize,
) -> Result<f64> {
    check_target(target)?;
    let u = propagate(field, detuning, drift, n_steps)?;
    Ok(gate_fidelity_of(&u, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz_to_rad_per_s;
    use std::f64::consts::PI;

    /// Closed-form transition probability for a constant `Ωx`.
    fn rabi_oracle(omega_x: f64, detuning: f64, drift: f64, t: f64) -> f64 {
        let drive = 2.0 * drift * omega_x;
        let gen = (drive * drive + detuning * detuning).sqrt();
        if gen == 0.0 {
            return 0.0;
        }
        drive * drive / (gen * gen) * (gen * t / 2.0).sin().powi(2)
    }

    #[test]
    fn zero_field_is_identity() {
        let f = ControlField::zero(100e-9, 1e8);
        let u = propagate(&f, 0.0, 1.0, 100).unwrap();
        assert!(u.max_abs_diff(&Unitary2::identity()) < 1e-14);
        assert_eq!(state_fidelity(&f, 0.0, 1.0, 100).unwrap(), 0.0);
    }

    #[test]
    fn resonant_pi_pulse() {
        let om = mhz_to_rad_per_s(5.0);
        let t = PI / (2.0 * om);
        let f = ControlField::rectangular(2.0 * om, t, 1e9);
        let u = propagate(&f, 0.0, 1.0, 100).unwrap();
        let expect = Unitary2::exp_step(1.0, 0.0, 0.0, PI / 2.0);
        assert!(u.max_abs_diff(&expect) < 1e-12);
        assert!((state_fidelity(&f, 0.0, 1.0, 100).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn detuned_rectangular_matches_rabi_formula() {
        // g = π/T = 2π×10 MHz with T = 50 ns, i.e. Ωx = g/2
        let t = 50e-9;
        let g = PI / t;
        let f = ControlField::rectangular(g, t, 1e9);
        let det = mhz_to_rad_per_s(10.0);
        let fid = state_fidelity(&f, det, 1.0, 1000).unwrap();
        assert!((fid - rabi_oracle(g / 2.0, det, 1.0, t)).abs() < 1e-10);
        for integrator in [Integrator::Midpoint, Integrator::Magnus4] {
            let d = SampledDrive::new(&f, 7, integrator).unwrap();
            assert!((d.state_fidelity(det, 0.8) - rabi_oracle(g / 2.0, det, 0.8, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_fidelity_identities() {
        let x = Unitary2::pauli_x();
        assert!((gate_fidelity_of(&x, &x) - 1.0).abs() < 1e-12);
        assert!((gate_fidelity_of(&Unitary2::identity(), &x) - 1.0 / 3.0).abs() < 1e-12);
        // global phase is irrelevant
        let phased = x.scale(Complex64::new(0.0, -1.0));
        assert!((gate_fidelity_of(&phased, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_target_rejected() {
        let bad = Unitary2::identity().scale(Complex64::new(2.0, 0.0));
        let f = ControlField::zero(1e-7, 1e8);
        assert!(matches!(
            gate_fidelity(&f, &bad, 0.0, 1.0, 10),
            Err(Error::NonUnitaryTarget(_))
        ));
    }

    #[test]
    fn zero_steps_rejected() {
        let f = ControlField::zero(1e-7, 1e8);
        assert!(propagate(&f, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn magnus_converges_faster_than_midpoint() {
        let f = ControlField::pm(vec![6e7], vec![3e8], vec![3e8], 100e-9, 1e9).unwrap();
        let reference = SampledDrive::new(&f, 16_000, Integrator::Magnus4)
            .unwrap()
            .propagate(4e7, 1.2);
        let err = |integrator| {
            SampledDrive::new(&f, 1000, integrator)
                .unwrap()
                .propagate(4e7, 1.2)
                .max_abs_diff(&reference)
        };
        let mid = err(Integrator::Midpoint);
        let m4 = err(Integrator::Magnus4);
        assert!(m4 < 1e-9, "magnus error {m4}");
        assert!(mid > 100.0 * m4);
    }
}
