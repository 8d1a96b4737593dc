use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::{ou_step, NoiseSettings};
use super::sequence::{Axis, PulseKind, PulseSequence, XY8_ORDER};
use super::signal::AcSignal;
use crate::error::{Error, Result};
use crate::optimizer::trial_seed;
use crate::spin::su2_step;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamseyOptions {
    /// Last readout time, s; `None` runs `seq.periods` periods.
    pub t_max: Option<f64>,
    /// Piecewise-constant steps per shaped or rectangular pulse.
    pub pulse_steps: usize,
    /// Free-evolution step, s. The OU noise is held constant within a step.
    pub free_step: f64,
}

impl Default for RamseyOptions {
    fn default() -> Self {
        Self {
            t_max: None,
            pulse_steps: 100,
            free_step: 10e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Readout time, s.
    pub time: f64,
    pub p0_mean: f64,
    pub p0_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamseyTrace {
    pub pulse_kind: String,
    pub points: Vec<TracePoint>,
}

impl RamseyTrace {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.time).collect()
    }

    pub fn p0(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p0_mean).collect()
    }
}

type State = (Complex64, Complex64);

struct Run<'a> {
    seq: &'a PulseSequence,
    signal: &'a AcSignal,
    noise: &'a NoiseSettings,
    options: &'a RamseyOptions,
    /// Pulse quadratures at step midpoints, X then Y.
    table: [Vec<(f64, f64)>; 2],
    readouts: usize,
}

impl Run<'_> {
    fn realization(&self, seed: u64) -> Vec<f64> {
        let noise = self.noise;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let delta = noise.draw_static(&mut rng);
        let mut dd = if noise.ou_c > 0.0 {
            noise.draw_dynamic(&mut rng)
        } else {
            0.0
        };
        let mut step_noise = |dd: &mut f64, dt: f64| {
            if noise.ou_c > 0.0 {
                *dd = ou_step(*dd, dt, noise.ou_tau, noise.ou_c, &mut rng);
            }
        };

        // ideal π/2 about x from |0⟩
        let mut psi: State = (Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, -FRAC_1_SQRT_2));
        let instantaneous = matches!(self.seq.kind, PulseKind::Instantaneous);
        let width = if instantaneous { 0.0 } else { self.seq.pulse_length };
        let slot = self.seq.slot();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.readouts);

        for i in 0..8 * self.readouts {
            let start = (i as f64 + 0.5) * slot - 0.5 * width;
            self.free(&mut psi, t, start, delta, &mut dd, &mut step_noise);
            let axis = XY8_ORDER[i % 8];
            if instantaneous {
                psi = ideal_pi(psi, axis);
            } else {
                let dt = width / self.options.pulse_steps as f64;
                let quads = &self.table[axis as usize];
                for (s, (qx, qy)) in quads.iter().enumerate() {
                    let tm = start + (s as f64 + 0.5) * dt;
                    let hz = 0.5 * (delta + dd) + self.signal.amplitude * (self.signal.frequency * tm).cos();
                    let (a, b) = su2_step(noise.kappa * qx, noise.kappa * qy, hz, dt);
                    psi = (a * psi.0 - b.conj() * psi.1, b * psi.0 + a.conj() * psi.1);
                    step_noise(&mut dd, dt);
                }
            }
            t = start + width;
            if i % 8 == 7 {
                let end = (i as f64 + 1.0) * slot;
                self.free(&mut psi, t, end, delta, &mut dd, &mut step_noise);
                t = end;
                out.push(readout(psi));
            }
        }
        out
    }

    /// Diagonal evolution from `t0` to `t1`; the signal phase is integrated
    /// exactly.
    fn free(
        &self,
        psi: &mut State,
        t0: f64,
        t1: f64,
        delta: f64,
        dd: &mut f64,
        step_noise: &mut impl FnMut(&mut f64, f64),
    ) {
        let span = t1 - t0;
        if span <= 0.0 {
            return;
        }
        let n = (span / self.options.free_step).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for k in 0..n {
            let a = t0 + k as f64 * h;
            let phase = 0.5 * (delta + *dd) * h + self.signal.integral(a, a + h);
            let rot = Complex64::from_polar(1.0, -phase);
            psi.0 *= rot;
            psi.1 *= rot.conj();
            step_noise(dd, h);
        }
    }
}

/// `exp(−i π/2 σ_axis)`.
fn ideal_pi(psi: State, axis: Axis) -> State {
    let mi = Complex64::new(0.0, -1.0);
    match axis {
        Axis::X => (mi * psi.1, mi * psi.0),
        Axis::Y => (-psi.1, psi.0),
    }
}

/// `P₀` after an ideal `3π/2` rotation about x.
fn readout(psi: State) -> f64 {
    let (s, c) = (0.75 * PI).sin_cos();
    (c * psi.0 - Complex64::new(0.0, s) * psi.1).norm_sqr()
}

/// Realization-averaged `P₀` at the end of every XY-8 period.
///
/// Each realization draws its static detuning and OU start from its own
/// seed, `trial_seed(noise.seed, r)`, so the averaged trace does not depend
/// on the thread count.
pub fn simulate_ramsey(
    seq: &PulseSequence,
    signal: &AcSignal,
    noise: &NoiseSettings,
    options: &RamseyOptions,
) -> Result<RamseyTrace> {
    noise.validate()?;
    if options.pulse_steps == 0 || !(options.free_step > 0.0) {
        return Err(Error::InvalidArgument("step settings must be positive".into()));
    }
    if !(signal.amplitude >= 0.0 && signal.frequency > 0.0) {
        return Err(Error::InvalidArgument("signal needs g_ac ≥ 0 and ω_s > 0".into()));
    }
    let readouts = match options.t_max {
        Some(t) => (t / seq.period() + 1e-9).floor() as usize,
        None => seq.periods,
    };
    if readouts < 2 {
        return Err(Error::InvalidArgument(
            "the trace must span at least two XY-8 periods".into(),
        ));
    }
    let dt = seq.pulse_length / options.pulse_steps as f64;
    let table = [Axis::X, Axis::Y].map(|axis| {
        (0..options.pulse_steps)
            .map(|s| seq.quadratures(axis, (s as f64 + 0.5) * dt))
            .collect()
    });
    let run = Run {
        seq,
        signal,
        noise,
        options,
        table,
        readouts,
    };
    let traces: Vec<Vec<f64>> = (0..noise.realizations)
        .into_par_iter()
        .map(|r| run.realization(trial_seed(noise.seed, r)))
        .collect();

    let n = traces.len() as f64;
    let points = (0..readouts)
        .map(|k| {
            let mean = traces.iter().map(|tr| tr[k]).sum::<f64>() / n;
            let var = if traces.len() > 1 {
                traces.iter().map(|tr| (tr[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            TracePoint {
                time: (k + 1) as f64 * seq.period(),
                p0_mean: mean,
                p0_stderr: (var / n).sqrt(),
            }
        })
        .collect();
    Ok(RamseyTrace {
        pulse_kind: seq.kind.label().to_string(),
        points,
    })
}

/// Readouts per envelope block in [`estimate_t2`].
pub const T2_BLOCK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Estimate {
    /// Fitted `1/e` time, s; equal to the window when no decay is seen.
    pub t2: f64,
    /// The decay is not resolved: the true `T₂` is at least the window
    /// length, and a fitted value beyond the window is an extrapolation.
    pub lower_bound: bool,
    /// `(t, |2P₀ − 1|)` block maxima used in the fit.
    pub envelope: Vec<(f64, f64)>,
}

/// Fits `exp(−t/T₂)` to the envelope of `|2P₀ − 1|`.
///
/// The envelope is the maximum of each block of [`T2_BLOCK`] readouts, which
/// strips the signal fringes. The fit is least squares on `ln v = −t/T₂`
/// through the origin, so `T₂ = −Σt² / Σ t ln v`.
pub fn estimate_t2(times: &[f64], p0: &[f64]) -> Result<T2Estimate> {
    if times.len() != p0.len() {
        return Err(Error::InvalidArgument("times and populations differ in length".into()));
    }
    if times.len() < 10 {
        return Err(Error::InvalidArgument("at least 10 readouts are required".into()));
    }
    let window = times.iter().copied().fold(0.0, f64::max);
    let envelope: Vec<(f64, f64)> = times
        .chunks(T2_BLOCK)
        .zip(p0.chunks(T2_BLOCK))
        .filter_map(|(t, p)| {
            t.iter()
                .zip(p)
                .map(|(t, p)| (*t, (2.0 * p - 1.0).abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
        })
        .filter(|(_, v)| *v > 0.0)
        .collect();
    if envelope.len() < 2 {
        return Err(Error::FitFailed("fewer than two positive envelope points".into()));
    }
    let stt: f64 = envelope.iter().map(|(t, _)| t * t).sum();
    let stv: f64 = envelope.iter().map(|(t, v)| t * v.min(1.0).ln()).sum();
    if stv >= 0.0 {
        return Ok(T2Estimate {
            t2: window,
            lower_bound: true,
            envelope,
        });
    }
    let t2 = -stt / stv;
    Ok(T2Estimate {
        t2,
        lower_bound: t2 > window,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetometry::{build_xy8, ideal_phase};

    fn noiseless_signal(seq: &PulseSequence, g: f64) -> AcSignal {
        AcSignal {
            amplitude: g,
            frequency: seq.signal_frequency(),
        }
    }

    #[test]
    fn perfect_pulses_without_signal_keep_p0_at_one() {
        let seq = PulseSequence::paper_rectangular(6);
        let trace = simulate_ramsey(
            &seq,
            &noiseless_signal(&seq, 0.0),
            &NoiseSettings::noiseless(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(trace.points.len(), 6);
        for p in &trace.points {
            assert!((p.p0_mean - 1.0).abs() < 1e-8, "{p:?}");
        }
    }

    #[test]
    fn instantaneous_pulses_follow_ideal_phase() {
        let seq = build_xy8(PulseKind::Instantaneous, 50e-9, 350e-9, 40).unwrap();
        let signal = noiseless_signal(&seq, crate::units::mhz_to_rad_per_s(0.1));
        let trace = simulate_ramsey(&seq, &signal, &NoiseSettings::noiseless(), &Default::default()).unwrap();
        for p in &trace.points {
            let chi = ideal_phase(signal.amplitude, signal.frequency, p.time);
            assert!((p.p0_mean - 0.5 * (1.0 + (2.0 * chi).cos())).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let seq = PulseSequence::paper_rectangular(3);
        let signal = noiseless_signal(&seq, 1e5);
        let noise = NoiseSettings {
            realizations: 6,
            seed: 9,
            ..Default::default()
        };
        let a = simulate_ramsey(&seq, &signal, &noise, &Default::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_ramsey(&seq, &signal, &noise, &Default::default()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn t2_recovers_synthetic_decay() {
        let t2 = 100e-6;
        let times: Vec<f64> = (1..=125).map(|k| k as f64 * 3.2e-6).collect();
        let p0: Vec<f64> = times.iter().map(|t| 0.5 * (1.0 + (-t / t2).exp())).collect();
        let est = estimate_t2(&times, &p0).unwrap();
        assert!((est.t2 - t2).abs() < 0.02 * t2);
        assert!(!est.lower_bound);
    }

    #[test]
    fn t2_flags_missing_decay() {
        let times: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let est = estimate_t2(&times, &[1.0; 20]).unwrap();
        assert!(est.lower_bound);
        assert_eq!(est.t2, 20.0);
        assert!(estimate_t2(&times[..5], &[1.0; 5]).is_err());
    }

    #[test]
    fn rejects_short_windows() {
        let seq = PulseSequence::paper_rectangular(1);
        let opts = RamseyOptions {
            t_max: Some(4e-6),
            ..Default::default()
        };
        assert!(simulate_ramsey(&seq, &noiseless_signal(&seq, 0.0), &NoiseSettings::noiseless(), &opts).is_err());
    }
}
