use std::f64::consts::PI;

use bpm_core::spin::{
    ensemble_objective, propagate, state_fidelity, BasisKind, ControlField, FidelityKind, NoiseGrid, DEFAULT_STEPS,
};
use bpm_core::units::mhz_to_rad_per_s;
use proptest::prelude::*;

const T: f64 = 100e-9;

fn omega_max() -> f64 {
    mhz_to_rad_per_s(10.0)
}

fn f0() -> f64 {
    2.0 * PI / T
}

prop_compose! {
    fn pm_field()(sets in 1usize..=3)(
        a in prop::collection::vec(0.0..1.0f64, sets),
        b in prop::collection::vec(0.0..1.0f64, sets),
        v in prop::collection::vec(0.0..1.0f64, sets),
    ) -> ControlField {
        let scale = |x: Vec<f64>, s: f64| x.into_iter().map(|x| x * s).collect();
        ControlField::pm(scale(a, omega_max()), scale(b, f0()), scale(v, f0()), T, omega_max())
            .unwrap()
            .enforce_amplitude_constraint()
    }
}

prop_compose! {
    fn sfb_field(axis_free: bool)(sets in 1usize..=2)(
        a in prop::collection::vec(0.0..1.0f64, sets),
        w in prop::collection::vec(0.0..1.0f64, sets),
        p in prop::collection::vec(0.0..1.0f64, sets),
        x in prop::collection::vec(0.0..1.0f64, sets),
    ) -> ControlField {
        let scale = |x: Vec<f64>, s: f64| x.into_iter().map(|x| x * s).collect();
        let axes = if axis_free { scale(x, 2.0 * PI) } else { vec![0.0; a.len()] };
        ControlField::sfb(scale(a, omega_max()), scale(w, f0()), scale(p, 2.0 * PI), axes, T, omega_max())
            .unwrap()
            .enforce_amplitude_constraint()
    }
}

fn any_field() -> impl Strategy<Value = ControlField> {
    prop_oneof![pm_field(), sfb_field(true)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagator_is_unitary(field in any_field(), d in -1.0..1.0f64, k in 0.5..1.5f64) {
        let u = propagate(&field, d * mhz_to_rad_per_s(10.0), k, DEFAULT_STEPS).unwrap();
        prop_assert!(u.unitarity_deviation() < 1e-12);
        prop_assert!((u.det().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn real_drive_is_symmetric_in_detuning(field in sfb_field(false), d in 0.0..1.0f64, k in 0.5..1.5f64) {
        let delta = d * mhz_to_rad_per_s(10.0);
        let plus = state_fidelity(&field, delta, k, DEFAULT_STEPS).unwrap();
        let minus = state_fidelity(&field, -delta, k, DEFAULT_STEPS).unwrap();
        prop_assert!((plus - minus).abs() < 1e-12);
    }

    #[test]
    fn step_halving_changes_fidelity_below_1e_8(field in any_field(), d in -1.0..1.0f64, k in 0.5..1.5f64) {
        let delta = d * mhz_to_rad_per_s(10.0);
        let coarse = state_fidelity(&field, delta, k, DEFAULT_STEPS).unwrap();
        let fine = state_fidelity(&field, delta, k, 2 * DEFAULT_STEPS).unwrap();
        prop_assert!((coarse - fine).abs() < 1e-8, "{coarse} vs {fine}");
    }

    #[test]
    fn ensemble_objective_is_a_probability(field in any_field()) {
        let grid = NoiseGrid::default().with_size(7, 5);
        let v = ensemble_objective(&field, &grid, &FidelityKind::State, 200).unwrap();
        prop_assert!((0.0..=1.0).contains(&v.value));
        prop_assert_eq!(v.evaluations, 35);
    }

    #[test]
    fn enforcement_gives_feasible_fields(
        kind in prop_oneof![Just(BasisKind::Pm), Just(BasisKind::Sfb)],
        raw in prop::collection::vec(-3.0..3.0f64, 8),
    ) {
        let per = kind.params_per_set();
        let sets = raw.len() / per;
        let bounds = ControlField::param_bounds(kind, sets, T, omega_max());
        let params: Vec<f64> = raw[..sets * per].iter().zip(&bounds).map(|(x, (_, hi))| x * hi).collect();
        let field = ControlField::from_params(kind, &params, T, omega_max()).unwrap().enforce_amplitude_constraint();
        prop_assert!(field.peak_drive() <= omega_max() * (1.0 + 1e-12));
        for ((lo, hi), x) in ControlField::param_bounds(kind, sets, T, f64::INFINITY).iter().zip(field.params()) {
            prop_assert!(x >= *lo && x <= *hi, "{x} outside [{lo}, {hi}]");
        }
        // enforcement is idempotent
        prop_assert_eq!(field.enforce_amplitude_constraint(), field);
    }
}
