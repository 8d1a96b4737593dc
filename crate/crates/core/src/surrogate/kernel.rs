use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power-exponential correlation `exp(−Σ_h α_h |Δ_h|^{p_h})` over the two
/// (unit-scaled) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParams {
    pub alpha: [f64; 2],
    pub power: [f64; 2],
}

impl CorrelationParams {
    pub fn new(alpha: [f64; 2], power: [f64; 2]) -> Result<Self> {
        let p = Self { alpha, power };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "alpha {:?} must be finite and >= 0",
                self.alpha
            )));
        }
        if self.power.iter().any(|p| !(1.0..=2.0).contains(p)) {
            return Err(Error::InvalidArgument(format!(
                "power {:?} must lie in [1, 2]",
                self.power
            )));
        }
        Ok(())
    }

    /// Maps the unconstrained search vector `(ln α1, ln α2, p1, p2)` into
    /// the admissible box.
    pub(crate) fn from_search(x: &[f64], log_alpha_bounds: (f64, f64)) -> Self {
        let (lo, hi) = log_alpha_bounds;
        Self {
            alpha: [x[0].clamp(lo, hi).exp(), x[1].clamp(lo, hi).exp()],
            power: [x[2].clamp(1.0, 2.0), x[3].clamp(1.0, 2.0)],
        }
    }

    #[inline]
    pub(crate) fn eval(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let mut d = 0.0;
        for h in 0..2 {
            let delta = (a[h] - b[h]).abs();
            if delta > 0.0 {
                d += self.alpha[h] * pow_abs(delta, self.power[h]);
            }
        }
        (-d).exp()
    }

    /// One factor of the separable kernel, `exp(−α_h |a − b|^{p_h})`.
    #[inline]
    pub(crate) fn axis(&self, h: usize, a: f64, b: f64) -> f64 {
        let delta = (a - b).abs();
        if delta > 0.0 {
            (-self.alpha[h] * pow_abs(delta, self.power[h])).exp()
        } else {
            1.0
        }
    }
}

#[inline]
fn pow_abs(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x
    } else {
        x.powf(p)
    }
}

/// Correlation between two points given in the same coordinates as the
/// parameters.
pub fn correlation(xi: [f64; 2], xj: [f64; 2], params: &CorrelationParams) -> Result<f64> {
    params.validate()?;
    Ok(params.eval(xi, xj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        let p = CorrelationParams::new([1.0, 1.0], [2.0, 2.0]).unwrap();
        assert_eq!(correlation([0.3, 0.7], [0.3, 0.7], &p).unwrap(), 1.0);
        let c = correlation([0.0, 0.0], [1.0, 0.0], &p).unwrap();
        assert!((c - (-1f64).exp()).abs() < 1e-15);
        assert!((c - 0.367_879).abs() < 1e-6);
    }

    #[test]
    fn unit_power_is_product_of_exponentials() {
        let p = CorrelationParams::new([2.5, 0.7], [1.0, 1.0]).unwrap();
        let (a, b) = ([0.1, 0.9], [0.65, 0.2]);
        let product = (-2.5f64 * 0.55).exp() * (-0.7f64 * 0.7).exp();
        assert!((correlation(a, b, &p).unwrap() - product).abs() < 1e-15);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CorrelationParams::new([-1.0, 1.0], [1.0, 1.0]).is_err());
        assert!(CorrelationParams::new([1.0, 1.0], [0.5, 1.0]).is_err());
        assert!(CorrelationParams::new([1.0, 1.0], [1.0, 2.5]).is_err());
        let bad = CorrelationParams {
            alpha: [1.0, f64::NAN],
            power: [1.0, 1.0],
        };
        assert!(correlation([0.0, 0.0], [1.0, 1.0], &bad).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric_bounded_monotone(
            a0 in 0.0..1.0f64, a1 in 0.0..1.0f64, b0 in 0.0..1.0f64, b1 in 0.0..1.0f64,
            al0 in 0.0..50.0f64, al1 in 0.0..50.0f64, p0 in 1.0..=2.0f64, p1 in 1.0..=2.0f64,
            grow in 0.0..0.5f64,
        ) {
            let p = CorrelationParams::new([al0, al1], [p0, p1]).unwrap();
            let c = p.eval([a0, a1], [b0, b1]);
            prop_assert!(c > 0.0 || al0 + al1 > 0.0);
            prop_assert!(c <= 1.0);
            prop_assert_eq!(c, p.eval([b0, b1], [a0, a1]));
            prop_assert_eq!(p.eval([a0, a1], [a0, a1]), 1.0);
            // push b further from a along the first axis
            let dir = if b0 >= a0 { 1.0 } else { -1.0 };
            let far = p.eval([a0, a1], [b0 + dir * grow, b1]);
            prop_assert!(far <= c + 1e-15);
        }
    }
}
