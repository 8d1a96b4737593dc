use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{exact_sqrt, NoiseGrid};

/// Axis-aligned `(δ, κ)` rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Region {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        let r = Self { lo, hi };
        r.validate()?;
        Ok(r)
    }

    pub fn of_grid(grid: &NoiseGrid) -> Self {
        Self {
            lo: [grid.delta_range[0], grid.kappa_range[0]],
            hi: [grid.delta_range[1], grid.kappa_range[1]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for h in 0..2 {
            if !(self.lo[h].is_finite() && self.hi[h].is_finite() && self.hi[h] > self.lo[h]) {
                return Err(Error::InvalidArgument(format!(
                    "empty region {:?}..{:?}",
                    self.lo, self.hi
                )));
            }
        }
        Ok(())
    }

    /// Maps a physical point to the unit square.
    #[inline]
    pub fn to_unit(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.lo[0]) / (self.hi[0] - self.lo[0]),
            (x[1] - self.lo[1]) / (self.hi[1] - self.lo[1]),
        ]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0..2).all(|h| x[h] >= self.lo[h] && x[h] <= self.hi[h])
    }
}

/// How sample points are placed inside their cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Jitter {
    /// Independent uniform offset inside each cell.
    #[default]
    Uniform,
    /// Exact cell centres.
    None,
}

/// `n` points on a `√n × √n` cell grid over `region`, one per cell, in
/// `δ`-major order.
pub fn jittered_grid<R: Rng + ?Sized>(region: &Region, n: usize, jitter: Jitter, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    region.validate()?;
    let side = exact_sqrt(n)
        .filter(|&s| s > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("sample count {n} is not a positive perfect square")))?;
    let width = [
        (region.hi[0] - region.lo[0]) / side as f64,
        (region.hi[1] - region.lo[1]) / side as f64,
    ];
    let mut points = Vec::with_capacity(n);
    for i in 0..side {
        for j in 0..side {
            let (u, v) = match jitter {
                Jitter::Uniform => (rng.random::<f64>(), rng.random::<f64>()),
                Jitter::None => (0.5, 0.5),
            };
            points.push([
                region.lo[0] + (i as f64 + u) * width[0],
                region.lo[1] + (j as f64 + v) * width[1],
            ]);
        }
    }
    Ok(points)
}
