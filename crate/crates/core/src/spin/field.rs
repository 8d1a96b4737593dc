use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points used to bound the drive envelope over `[0, T]`.
pub const DENSE_GRID_POINTS: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Phase-modulated Fourier basis.
    Pm,
    /// Standard Fourier basis.
    Sfb,
}

impl BasisKind {
    pub fn params_per_set(self) -> usize {
        match self {
            BasisKind::Pm => 3,
            BasisKind::Sfb => 4,
        }
    }
}

/// Per-set pulse parameters. Amplitudes and frequencies are in rad/s,
/// phases in rad.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "lowercase")]
pub enum Basis {
    /// `Ωx + iΩy = Σ (a_j/2) exp(i (b_j/ν_j) sin(ν_j t))`
    Pm {
        amplitudes: Vec<f64>,
        depths: Vec<f64>,
        rates: Vec<f64>,
    },
    /// `Ωx + iΩy = Σ (a_j/2) cos(ω_j t + φ_j) exp(i ϕ_j)`
    Sfb {
        amplitudes: Vec<f64>,
        freqs: Vec<f64>,
        phases: Vec<f64>,
        axes: Vec<f64>,
    },
}

impl Basis {
    pub fn kind(&self) -> BasisKind {
        match self {
            Basis::Pm { .. } => BasisKind::Pm,
            Basis::Sfb { .. } => BasisKind::Sfb,
        }
    }

    pub fn n_sets(&self) -> usize {
        match self {
            Basis::Pm { amplitudes, .. } | Basis::Sfb { amplitudes, .. } => amplitudes.len(),
        }
    }

    fn vectors(&self) -> Vec<&Vec<f64>> {
        match self {
            Basis::Pm {
                amplitudes,
                depths,
                rates,
            } => vec![amplitudes, depths, rates],
            Basis::Sfb {
                amplitudes,
                freqs,
                phases,
                axes,
            } => vec![amplitudes, freqs, phases, axes],
        }
    }

    fn vectors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Basis::Pm {
                amplitudes,
                depths,
                rates,
            } => vec![amplitudes, depths, rates],
            Basis::Sfb {
                amplitudes,
                freqs,
                phases,
                axes,
            } => vec![amplitudes, freqs, phases, axes],
        }
    }
}

/// A parameterised control pulse in the interaction picture.
///
/// `amp_limit` bounds the drive envelope `|g(t)| = 2·sqrt(Ωx² + Ωy²)`, i.e.
/// the Rabi frequency of the resonant spin. With `Ωx = a/2` for a single
/// constant set this is the familiar `a ≤ Ω_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    #[serde(flatten)]
    pub basis: Basis,
    /// Pulse duration `T` in seconds.
    pub duration: f64,
    /// Peak drive (Rabi) frequency `Ω_max` in rad/s.
    pub amp_limit: f64,
}

impl ControlField {
    pub fn pm(amplitudes: Vec<f64>, depths: Vec<f64>, rates: Vec<f64>, duration: f64, amp_limit: f64) -> Result<Self> {
        let field = Self {
            basis: Basis::Pm {
                amplitudes,
                depths,
                rates,
            },
            duration,
            amp_limit,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn sfb(
        amplitudes: Vec<f64>,
        freqs: Vec<f64>,
        phases: Vec<f64>,
        axes: Vec<f64>,
        duration: f64,
        amp_limit: f64,
    ) -> Result<Self> {
        let field = Self {
            basis: Basis::Sfb {
                amplitudes,
                freqs,
                phases,
                axes,
            },
            duration,
            amp_limit,
        };
        field.validate()?;
        Ok(field)
    }

    /// Zero drive of the given duration.
    pub fn zero(duration: f64, amp_limit: f64) -> Self {
        Self {
            basis: Basis::Pm {
                amplitudes: vec![0.0],
                depths: vec![0.0],
                rates: vec![0.0],
            },
            duration,
            amp_limit,
        }
    }

    /// Constant drive `Ωx = rabi/2`: a single PM set with zero modulation.
    pub fn rectangular(rabi: f64, duration: f64, amp_limit: f64) -> Self {
        Self {
            basis: Basis::Pm {
                amplitudes: vec![rabi],
                depths: vec![0.0],
                rates: vec![0.0],
            },
            duration,
            amp_limit,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.basis.kind()
    }

    pub fn n_sets(&self) -> usize {
        self.basis.n_sets()
    }

    /// Upper end of the admissible frequency range, `5·2π/T`.
    pub fn max_frequency(&self) -> f64 {
        5.0 * 2.0 * PI / self.duration
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidField(format!(
                "duration {} must be positive",
                self.duration
            )));
        }
        if !(self.amp_limit.is_finite() && self.amp_limit > 0.0) {
            return Err(Error::InvalidField(format!(
                "amplitude limit {} must be positive",
                self.amp_limit
            )));
        }
        let vectors = self.basis.vectors();
        let n = vectors[0].len();
        if n == 0 {
            return Err(Error::InvalidField("at least one parameter set is required".into()));
        }
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidField("parameter vectors differ in length".into()));
        }
        if vectors.iter().flat_map(|v| v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidField("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Interaction-picture quadratures `(Ωx, Ωy)` at time `t`, in rad/s.
    #[inline]
    pub fn quadratures(&self, t: f64) -> (f64, f64) {
        match &self.basis {
            Basis::Pm {
                amplitudes,
                depths,
                rates,
            } => {
                let mut x = 0.0;
                let mut y = 0.0;
                for ((a, b), nu) in amplitudes.iter().zip(depths).zip(rates) {
                    let (s, c) = pm_phase(*b, *nu, t).sin_cos();
                    x += 0.5 * a * c;
                    y += 0.5 * a * s;
                }
                (x, y)
            }
            Basis::Sfb {
                amplitudes,
                freqs,
                phases,
                axes,
            } => {
                let mut x = 0.0;
                let mut y = 0.0;
                for (((a, w), phi), axis) in amplitudes.iter().zip(freqs).zip(phases).zip(axes) {
                    let env = 0.5 * a * (w * t + phi).cos();
                    let (s, c) = axis.sin_cos();
                    x += env * c;
                    y += env * s;
                }
                (x, y)
            }
        }
    }

    /// Checked variant of [`quadratures`](Self::quadratures).
    pub fn quadratures_at(&self, t: f64) -> Result<(f64, f64)> {
        self.validate()?;
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside [0, {}]",
                self.duration
            )));
        }
        Ok(self.quadratures(t))
    }

    /// Peak of `2·sqrt(Ωx² + Ωy²)` on a dense uniform grid over `[0, T]`.
    pub fn peak_drive(&self) -> f64 {
        let n = DENSE_GRID_POINTS;
        (0..n)
            .map(|i| {
                let t = self.duration * i as f64 / (n - 1) as f64;
                let (x, y) = self.quadratures(t);
                2.0 * x.hypot(y)
            })
            .fold(0.0, f64::max)
    }

    /// Maps the parameters to a canonical feasible representative, then
    /// rescales every amplitude by `Ω_max / peak` when the dense-grid peak
    /// drive exceeds `Ω_max`.
    ///
    /// Negative values are folded rather than clamped. For PM, `ν → −ν`
    /// leaves the field unchanged, and `b → −b` or `a → −a` conjugates or
    /// negates it, which leaves the state-transfer fidelity unchanged. For
    /// SFB, `a → −a` is absorbed into `ϕ + π` and `ω → −ω` into `φ → −φ`.
    /// Phases wrap modulo `2π`, and frequencies are then clamped to
    /// `[0, 5·2π/T]`.
    pub fn enforce_amplitude_constraint(&self) -> ControlField {
        let mut out = self.clone();
        let f_max = self.max_frequency();
        match &mut out.basis {
            Basis::Pm {
                amplitudes,
                depths,
                rates,
            } => {
                fold_all(amplitudes, f64::INFINITY);
                fold_all(depths, f_max);
                fold_all(rates, f_max);
            }
            Basis::Sfb {
                amplitudes,
                freqs,
                phases,
                axes,
            } => {
                for j in 0..amplitudes.len() {
                    if amplitudes[j] < 0.0 {
                        amplitudes[j] = -amplitudes[j];
                        axes[j] += PI;
                    }
                    if freqs[j] < 0.0 {
                        freqs[j] = -freqs[j];
                        phases[j] = -phases[j];
                    }
                    freqs[j] = freqs[j].min(f_max);
                    phases[j] = phases[j].rem_euclid(2.0 * PI);
                    axes[j] = axes[j].rem_euclid(2.0 * PI);
                }
            }
        }
        let peak = out.peak_drive();
        // the relative slack keeps a rescaled field from being rescaled again
        if peak > out.amp_limit * (1.0 + 1e-12) {
            let scale = out.amp_limit / peak;
            let (Basis::Pm { amplitudes, .. } | Basis::Sfb { amplitudes, .. }) = &mut out.basis;
            amplitudes.iter_mut().for_each(|a| *a *= scale);
        }
        out
    }

    /// Flat parameter vector, grouped by kind: PM `[a.., b.., ν..]`,
    /// SFB `[a.., ω.., φ.., ϕ..]`.
    pub fn params(&self) -> Vec<f64> {
        self.basis.vectors().into_iter().flatten().copied().collect()
    }

    /// Inverse of [`params`](Self::params).
    pub fn from_params(kind: BasisKind, params: &[f64], duration: f64, amp_limit: f64) -> Result<Self> {
        let per = kind.params_per_set();
        if params.is_empty() || !params.len().is_multiple_of(per) {
            return Err(Error::InvalidField(format!(
                "{} parameters do not split into sets of {per}",
                params.len()
            )));
        }
        let n = params.len() / per;
        let chunk = |i: usize| params[i * n..(i + 1) * n].to_vec();
        let basis = match kind {
            BasisKind::Pm => Basis::Pm {
                amplitudes: chunk(0),
                depths: chunk(1),
                rates: chunk(2),
            },
            BasisKind::Sfb => Basis::Sfb {
                amplitudes: chunk(0),
                freqs: chunk(1),
                phases: chunk(2),
                axes: chunk(3),
            },
        };
        let field = Self {
            basis,
            duration,
            amp_limit,
        };
        field.validate()?;
        Ok(field)
    }

    /// Per-parameter `(lo, hi)` search box matching [`params`](Self::params).
    /// Amplitudes are bounded by `Ω_max`; each further group by its
    /// admissible range.
    pub fn param_bounds(kind: BasisKind, n_sets: usize, duration: f64, amp_limit: f64) -> Vec<(f64, f64)> {
        let f_max = 5.0 * 2.0 * PI / duration;
        let groups: Vec<(f64, f64)> = match kind {
            BasisKind::Pm => vec![(0.0, amp_limit), (0.0, f_max), (0.0, f_max)],
            BasisKind::Sfb => vec![(0.0, amp_limit), (0.0, f_max), (0.0, 2.0 * PI), (0.0, 2.0 * PI)],
        };
        groups
            .into_iter()
            .flat_map(|g| std::iter::repeat_n(g, n_sets))
            .collect()
    }

    /// Mutable access to every parameter vector, for in-place edits.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for v in self.basis.vectors_mut() {
            v.iter_mut().for_each(&mut f);
        }
    }
}

/// `(b/ν)·sin(ν t)`, continuous through `ν = 0` where it becomes `b·t`.
#[inline]
fn pm_phase(depth: f64, rate: f64, t: f64) -> f64 {
    let x = rate * t;
    let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    depth * t * sinc
}

fn fold_all(v: &mut [f64], hi: f64) {
    v.iter_mut().for_each(|x| *x = x.abs().min(hi));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mhz_to_rad_per_s, ns_to_s, rad_per_ns_to_rad_per_s};

    const T: f64 = 100e-9;

    fn omega_max() -> f64 {
        mhz_to_rad_per_s(10.0)
    }

    #[test]
    fn zero_modulation_gives_constant_drive() {
        let om = 3.0e7;
        let f = ControlField::pm(vec![2.0 * om], vec![0.0], vec![1.7e7], T, omega_max()).unwrap();
        for t in [0.0, 13e-9, 50e-9, T] {
            let (x, y) = f.quadratures(t);
            assert!((x - om).abs() < 1e-6);
            assert!(y.abs() < 1e-9);
        }
    }

    #[test]
    fn sfb_pure_quadrature() {
        let om = 2.0e7;
        let f = ControlField::sfb(vec![2.0 * om], vec![0.0], vec![0.0], vec![PI / 2.0], T, omega_max()).unwrap();
        for t in [0.0, 37e-9, T] {
            let (x, y) = f.quadratures(t);
            assert!(x.abs() < 1e-8);
            assert!((y - om).abs() < 1e-8);
        }
    }

    #[test]
    fn published_random_field_matches_hand_evaluation() {
        // a = 0.0332, b = 0.0104, ν = 0.0378 rad/ns at t = 50 ns:
        // phase = (0.0104/0.0378)·sin(1.89) = 0.261234...,
        // Ωx = 0.0166·cos(phase), Ωy = 0.0166·sin(phase) rad/ns.
        let a = rad_per_ns_to_rad_per_s(0.0332);
        let b = rad_per_ns_to_rad_per_s(0.0104);
        let nu = rad_per_ns_to_rad_per_s(0.0378);
        let f = ControlField::pm(vec![a], vec![b], vec![nu], T, omega_max()).unwrap();
        let (x, y) = f.quadratures_at(ns_to_s(50.0)).unwrap();
        let phase: f64 = (0.0104 / 0.0378) * (0.0378f64 * 50.0).sin();
        assert!((phase - 0.261_234_137).abs() < 1e-8);
        assert!((x - 0.0166e9 * phase.cos()).abs() < 1e-3);
        assert!((y - 0.0166e9 * phase.sin()).abs() < 1e-3);
    }

    #[test]
    fn zero_rate_uses_linear_phase_limit() {
        let b = 2.0e7;
        let at_zero = ControlField::pm(vec![1e7], vec![b], vec![0.0], T, omega_max()).unwrap();
        let tiny = ControlField::pm(vec![1e7], vec![b], vec![1e-3], T, omega_max()).unwrap();
        for t in [0.0, 20e-9, 80e-9] {
            let (x0, y0) = at_zero.quadratures(t);
            let (x1, y1) = tiny.quadratures(t);
            assert!((x0 - x1).abs() < 1e-6 && (y0 - y1).abs() < 1e-6);
            let expect = 0.5e7 * (b * t).cos();
            assert!((x0 - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_parameter_is_rejected() {
        let err = ControlField::pm(vec![f64::NAN], vec![0.0], vec![0.0], T, omega_max());
        assert!(matches!(err, Err(Error::InvalidField(_))));
        let err = ControlField::pm(vec![1.0, 2.0], vec![0.0], vec![0.0], T, omega_max());
        assert!(matches!(err, Err(Error::InvalidField(_))));
    }

    #[test]
    fn out_of_range_time_rejected() {
        let f = ControlField::zero(T, omega_max());
        assert!(f.quadratures_at(-1e-9).is_err());
        assert!(f.quadratures_at(2.0 * T).is_err());
    }

    #[test]
    fn constraint_leaves_feasible_field_unchanged() {
        let f = ControlField::pm(vec![0.5 * omega_max()], vec![1e7], vec![2e7], T, omega_max()).unwrap();
        assert_eq!(f.enforce_amplitude_constraint(), f);
    }

    #[test]
    fn constraint_rescales_constant_drive() {
        let f = ControlField::pm(vec![4.0 * omega_max()], vec![0.0], vec![0.0], T, omega_max()).unwrap();
        let g = f.enforce_amplitude_constraint();
        let Basis::Pm { amplitudes, .. } = &g.basis else {
            unreachable!()
        };
        assert!((amplitudes[0] - omega_max()).abs() < 1e-6);
        let (x, _) = g.quadratures(0.0);
        assert!((x - omega_max() / 2.0).abs() < 1e-6);
    }

    #[test]
    fn constraint_with_interfering_sets() {
        let om = omega_max();
        let f = ControlField::pm(vec![1.3 * om, 0.9 * om], vec![4e7, 2.2e8], vec![6e7, 1.1e8], T, om).unwrap();
        let g = f.enforce_amplitude_constraint();
        // independent dense-grid oracle on a finer grid than the enforcement grid
        let n = 20_001;
        let peak = (0..n)
            .map(|i| {
                let (x, y) = g.quadratures(T * i as f64 / (n - 1) as f64);
                2.0 * (x * x + y * y).sqrt()
            })
            .fold(0.0, f64::max);
        assert!(peak <= om * (1.0 + 1e-6), "peak {peak} > {om}");
        let on_grid = g.peak_drive();
        assert!(on_grid <= om * (1.0 + 1e-9));
        // the quadrature bound sqrt(Ωx²+Ωy²) ≤ Ω_max follows
        assert!(peak / 2.0 <= om);
    }

    #[test]
    fn canonical_ranges() {
        let f_max = 5.0 * 2.0 * PI / T;
        let f = ControlField::sfb(vec![-1.0], vec![2.0 * f_max], vec![-0.5], vec![9.0], T, omega_max()).unwrap();
        let g = f.enforce_amplitude_constraint().params();
        let expect = [1.0, f_max, 2.0 * PI - 0.5, (9.0 + PI).rem_euclid(2.0 * PI)];
        for (a, b) in g.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{g:?}");
        }
        let p = ControlField::pm(vec![-1.0], vec![-2.0], vec![-3.0 * f_max], T, omega_max()).unwrap();
        assert_eq!(p.enforce_amplitude_constraint().params(), vec![1.0, 2.0, f_max]);
    }

    #[test]
    fn sfb_folding_preserves_quadratures() {
        let f = ControlField::sfb(
            vec![-1e7, 2e7],
            vec![-3e7, 1e7],
            vec![0.4, -7.0],
            vec![1.0, 8.0],
            T,
            1e9,
        )
        .unwrap();
        let g = f.enforce_amplitude_constraint();
        for i in 0..=20 {
            let t = T * i as f64 / 20.0;
            let (a, b) = (f.quadratures(t), g.quadratures(t));
            assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
        }
    }

    #[test]
    fn params_round_trip() {
        let f = ControlField::sfb(vec![1.0, 2.0], vec![3.0, 4.0], vec![0.1, 0.2], vec![0.3, 0.4], T, 5.0).unwrap();
        let p = f.params();
        assert_eq!(p, vec![1.0, 2.0, 3.0, 4.0, 0.1, 0.2, 0.3, 0.4]);
        assert_eq!(ControlField::from_params(BasisKind::Sfb, &p, T, 5.0).unwrap(), f);
        assert!(ControlField::from_params(BasisKind::Pm, &p, T, 5.0).is_err());
        assert_eq!(ControlField::param_bounds(BasisKind::Pm, 2, T, 5.0).len(), 6);
    }
}
