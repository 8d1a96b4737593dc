use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A 2×2 complex matrix, row-major. Used for single-spin propagators and
/// target gates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unitary2(pub [[Complex64; 2]; 2]);

impl Unitary2 {
    pub const fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn pauli_x() -> Self {
        Self([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn pauli_y() -> Self {
        Self([[ZERO, -I], [I, ZERO]])
    }

    pub const fn pauli_z() -> Self {
        Self([[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]])
    }

    /// Builds the SU(2) element `[[a, -b*], [b, a*]]`.
    pub fn from_cayley_klein(a: Complex64, b: Complex64) -> Self {
        Self([[a, -b.conj()], [b, a.conj()]])
    }

    /// `exp(-i dt (hx σx + hy σy + hz σz))` in closed form.
    pub fn exp_step(hx: f64, hy: f64, hz: f64, dt: f64) -> Self {
        let (a, b) = su2_step(hx, hy, hz, dt);
        Self::from_cayley_klein(a, b)
    }

    /// Rotation by `angle` about the unit Bloch axis `(nx, ny, nz)`.
    pub fn rotation(nx: f64, ny: f64, nz: f64, angle: f64) -> Self {
        Self::exp_step(nx, ny, nz, angle / 2.0)
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Self([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    /// Largest entry magnitude of `U†U − I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.adjoint() * *self;
        let id = Self::identity();
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((p.0[r][c] - id.0[r][c]).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() < tol && (self.det().norm() - 1.0).abs() < tol
    }

    /// `U |v⟩`.
    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Unitary2(out)
    }
}

/// Cayley–Klein pair `(a, b)` of `exp(-i dt h·σ)`.
#[inline]
pub(crate) fn su2_step(hx: f64, hy: f64, hz: f64, dt: f64) -> (Complex64, Complex64) {
    let norm = (hx * hx + hy * hy + hz * hz).sqrt();
    let theta = norm * dt;
    let (sin, cos) = theta.sin_cos();
    // sin(|h| dt) / |h|, with the dt limit at zero field
    let s = if norm > 0.0 { sin / norm } else { dt };
    (Complex64::new(cos, -s * hz), Complex64::new(s * hy, -s * hx))
}

/// Left-multiplies the SU(2) element `(a, b)` by `(sa, sb)`.
#[inline]
pub(crate) fn su2_compose(sa: Complex64, sb: Complex64, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    (sa * a - sb.conj() * b, sb * a + sa.conj() * b)
}
