use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::Region;
use super::kernel::CorrelationParams;
use crate::error::{Error, Result};
use crate::optimizer::{nelder_mead, NelderMeadOptions};
use crate::spin::{weighted_sum, NoiseGrid};

/// Added to the diagonal of `R`, and to the correlation of a point with
/// itself at prediction time.
pub const NUGGET: f64 = 1e-10;

/// Minimum separation between samples, as a fraction of the unit-square
/// diagonal.
pub const SEPARATION_FLOOR: f64 = 1e-6;

/// Hyperparameter search policy for [`KrigingModel::fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Independent Nelder–Mead starts; the best likelihood wins.
    pub restarts: usize,
    /// Box for `ln α_h`.
    pub log_alpha_bounds: (f64, f64),
    pub f_tol: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            log_alpha_bounds: (-6.0, 6.0),
            f_tol: 1e-8,
            max_iterations: 400,
        }
    }
}

/// Cholesky factor of `R + νI` and the products that depend only on the
/// sample positions.
#[derive(Clone, Debug)]
struct Factor {
    chol: Cholesky<f64, Dyn>,
    r_inv_one: DVector<f64>,
    one_r_inv_one: f64,
    log_det: f64,
}

impl Factor {
    fn new(unit: &[[f64; 2]], params: &CorrelationParams) -> Option<Self> {
        let n = unit.len();
        let r = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + NUGGET
            } else {
                params.eval(unit[i], unit[j])
            }
        });
        let chol = r.cholesky()?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let r_inv_one = chol.solve(&DVector::from_element(n, 1.0));
        let one_r_inv_one = r_inv_one.sum();
        (one_r_inv_one > 0.0 && log_det.is_finite()).then_some(Self {
            chol,
            r_inv_one,
            one_r_inv_one,
            log_det,
        })
    }

    /// `(μ̂, R⁻¹(y − 1μ̂), σ̂²)`.
    fn solve(&self, y: &DVector<f64>) -> (f64, DVector<f64>, f64) {
        let mu = self.r_inv_one.dot(y) / self.one_r_inv_one;
        let centred = y.add_scalar(-mu);
        let weights = self.chol.solve(&centred);
        let sigma2 = (centred.dot(&weights) / y.len() as f64).max(0.0);
        (mu, weights, sigma2)
    }
}

/// Concentrated log-likelihood `−(n/2) ln σ̂² − (1/2) ln|R|`.
fn concentrated(n: usize, sigma2: f64, log_det: f64) -> f64 {
    -0.5 * n as f64 * sigma2.max(f64::MIN_POSITIVE).ln() - 0.5 * log_det
}

/// Constant-mean Kriging predictor of a scalar function on a 2-D region.
#[derive(Clone, Debug)]
pub struct KrigingModel {
    region: Region,
    samples: Vec<[f64; 2]>,
    unit: Vec<[f64; 2]>,
    values: Vec<f64>,
    params: CorrelationParams,
    mu: f64,
    sigma2: f64,
    factor: Factor,
    weights: DVector<f64>,
}

impl KrigingModel {
    /// Fits `(α, p)` by maximum likelihood and builds the predictor.
    pub fn fit<R: Rng + ?Sized>(
        samples: &[[f64; 2]],
        values: &[f64],
        region: &Region,
        options: &FitOptions,
        rng: &mut R,
    ) -> Result<Self> {
        let unit = check_design(samples, values, region)?;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 1e-14 * lo.abs().max(1.0) {
            let params = CorrelationParams {
                alpha: [1.0, 1.0],
                power: [2.0, 2.0],
            };
            return Self::constant(samples.to_vec(), unit, values.to_vec(), *region, params);
        }

        let y = DVector::from_column_slice(values);
        let n = values.len();
        let bounds = options.log_alpha_bounds;
        let neg_likelihood = |x: &[f64]| -> f64 {
            let params = CorrelationParams::from_search(x, bounds);
            match Factor::new(&unit, &params) {
                Some(f) => {
                    let (_, _, sigma2) = f.solve(&y);
                    let l = concentrated(n, sigma2, f.log_det);
                    if l.is_finite() {
                        -l
                    } else {
                        1e300
                    }
                }
                None => 1e300,
            }
        };
        let nm = NelderMeadOptions {
            f_tol: options.f_tol,
            max_iterations: Some(options.max_iterations),
            initial_steps: Some(vec![0.1 * (bounds.1 - bounds.0), 0.1 * (bounds.1 - bounds.0), 0.1, 0.1]),
            ..Default::default()
        };
        let mut best: Option<(f64, CorrelationParams)> = None;
        for _ in 0..options.restarts.max(1) {
            let x0 = [
                rng.random_range(bounds.0..=bounds.1),
                rng.random_range(bounds.0..=bounds.1),
                rng.random_range(1.0..=2.0),
                rng.random_range(1.0..=2.0),
            ];
            let Ok(run) = nelder_mead(neg_likelihood, &x0, &nm) else {
                continue;
            };
            if run.f < 1e299 && best.as_ref().is_none_or(|(f, _)| run.f < *f) {
                best = Some((run.f, CorrelationParams::from_search(&run.x, bounds)));
            }
        }
        let (_, params) = best.ok_or_else(|| Error::FitFailed("no restart produced a finite likelihood".into()))?;
        Self::build(samples.to_vec(), unit, values.to_vec(), *region, params)
    }

    /// Builds the predictor for fixed correlation parameters.
    pub fn with_params(
        samples: &[[f64; 2]],
        values: &[f64],
        region: &Region,
        params: CorrelationParams,
    ) -> Result<Self> {
        params.validate()?;
        let unit = check_design(samples, values, region)?;
        Self::build(samples.to_vec(), unit, values.to_vec(), *region, params)
    }

    fn build(
        samples: Vec<[f64; 2]>,
        unit: Vec<[f64; 2]>,
        values: Vec<f64>,
        region: Region,
        params: CorrelationParams,
    ) -> Result<Self> {
        let factor = Factor::new(&unit, &params)
            .ok_or_else(|| Error::FitFailed("correlation matrix is not positive definite".into()))?;
        let (mu, weights, sigma2) = factor.solve(&DVector::from_column_slice(&values));
        Ok(Self {
            region,
            samples,
            unit,
            values,
            params,
            mu,
            sigma2,
            factor,
            weights,
        })
    }

    fn constant(
        samples: Vec<[f64; 2]>,
        unit: Vec<[f64; 2]>,
        values: Vec<f64>,
        region: Region,
        params: CorrelationParams,
    ) -> Result<Self> {
        let mut model = Self::build(samples, unit, values, region, params)?;
        model.mu = model.values[0];
        model.sigma2 = 0.0;
        model.weights.fill(0.0);
        Ok(model)
    }

    /// Same positions and `(α, p)`, new sample values. Reuses the factored
    /// correlation matrix.
    pub fn refresh_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} samples",
                values.len(),
                self.values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample value".into()));
        }
        let (mu, weights, sigma2) = self.factor.solve(&DVector::from_column_slice(values));
        Ok(Self {
            values: values.to_vec(),
            mu,
            sigma2,
            weights,
            ..self.clone()
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> &CorrelationParams {
        &self.params
    }

    /// `μ̂`.
    pub fn mean(&self) -> f64 {
        self.mu
    }

    /// `σ̂²`.
    pub fn variance(&self) -> f64 {
        self.sigma2
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Concentrated log-likelihood at the fitted `(α, p)`.
    pub fn log_likelihood(&self) -> f64 {
        concentrated(self.len(), self.sigma2, self.factor.log_det)
    }

    /// Log of the Gaussian-process likelihood at an arbitrary `(μ, σ²)`.
    pub fn log_likelihood_at(&self, mu: f64, sigma2: f64) -> f64 {
        let n = self.len() as f64;
        let centred = DVector::from_column_slice(&self.values).add_scalar(-mu);
        let quad = centred.dot(&self.factor.chol.solve(&centred));
        -0.5 * n * (2.0 * PI).ln() - 0.5 * n * sigma2.ln() - 0.5 * self.factor.log_det - quad / (2.0 * sigma2)
    }

    /// Generalised least-squares `μ̂` recomputed from scratch.
    pub fn gls_mean(&self) -> f64 {
        let n = self.len();
        let r = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + NUGGET
            } else {
                self.params.eval(self.unit[i], self.unit[j])
            }
        });
        let inv = r.try_inverse().expect("positive definite");
        let one = DVector::from_element(n, 1.0);
        let y = DVector::from_column_slice(&self.values);
        (one.transpose() * &inv * y)[0] / (one.transpose() * &inv * &one)[0]
    }

    #[inline]
    fn correlation_row(&self, u: [f64; 2], out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.unit) {
            *o = if *s == u { 1.0 + NUGGET } else { self.params.eval(u, *s) };
        }
    }

    /// `ŷ(x) = μ̂ + r′(x) R⁻¹ (y − 1μ̂)` at a physical point.
    pub fn predict(&self, x: [f64; 2]) -> f64 {
        let u = self.region.to_unit(x);
        let mut row = vec![0.0; self.len()];
        self.correlation_row(u, &mut row);
        self.mu + row.iter().zip(self.weights.iter()).map(|(r, w)| r * w).sum::<f64>()
    }

    /// Leave-one-out slope `p_fit`: each sample is predicted from the other
    /// `n − 1` with the same `(α, p)`, and the ordinary least-squares slope of
    /// predicted against true values is returned.
    pub fn loo_validate(&self) -> Result<f64> {
        let n = self.len();
        if n < 3 {
            return Err(Error::InvalidArgument("leave-one-out needs at least 3 samples".into()));
        }
        let mut predicted = Vec::with_capacity(n);
        for i in 0..n {
            let keep = |v: &[[f64; 2]]| -> Vec<[f64; 2]> {
                v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect()
            };
            let unit = keep(&self.unit);
            let y: Vec<f64> = self
                .values
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| *v)
                .collect();
            let factor = Factor::new(&unit, &self.params)
                .ok_or_else(|| Error::FitFailed("leave-one-out correlation matrix is singular".into()))?;
            let (mu, weights, _) = factor.solve(&DVector::from_column_slice(&y));
            let target = self.unit[i];
            let pred = mu
                + unit
                    .iter()
                    .zip(weights.iter())
                    .map(|(s, w)| self.params.eval(target, *s) * w)
                    .sum::<f64>();
            predicted.push(pred);
        }
        ols_slope(&self.values, &predicted)
    }

    /// Correlation rows of every lattice point, for repeated objective
    /// evaluations while positions and `(α, p)` stay fixed.
    pub fn grid_basis(&self, grid: &NoiseGrid) -> Result<GridBasis> {
        let weights = grid.weights()?;
        let n = self.len();
        let mut rows = vec![0.0; grid.len() * n];
        for (point, row) in grid.points().into_iter().zip(rows.chunks_mut(n)) {
            self.correlation_row(self.region.to_unit(point), row);
        }
        Ok(GridBasis {
            rows,
            weights,
            n_samples: n,
        })
    }

    /// `F̂_obj` through a precomputed basis. Predictions are clipped to `[0, 1]`.
    pub fn objective_with(&self, basis: &GridBasis) -> f64 {
        assert_eq!(basis.n_samples, self.len(), "basis built for another design");
        let w = self.weights.as_slice();
        basis
            .rows
            .chunks(basis.n_samples)
            .zip(&basis.weights)
            .map(|(row, g)| {
                let y = self.mu + row.iter().zip(w).map(|(r, w)| r * w).sum::<f64>();
                g * y.clamp(0.0, 1.0)
            })
            .sum()
    }

    pub fn to_record(&self) -> ModelRecord {
        ModelRecord {
            region: self.region,
            samples: self.samples.clone(),
            values: self.values.clone(),
            params: self.params,
            mu: self.mu,
            sigma2: self.sigma2,
            nugget: NUGGET,
        }
    }

    pub fn from_record(record: &ModelRecord) -> Result<Self> {
        let model = Self::with_params(&record.samples, &record.values, &record.region, record.params)?;
        let constant = record.sigma2 == 0.0 && model.values.iter().all(|v| *v == model.values[0]);
        let model = if constant {
            Self::constant(model.samples, model.unit, model.values, model.region, model.params)?
        } else {
            model
        };
        if (model.mu - record.mu).abs() > 1e-10 * record.mu.abs().max(1.0) {
            return Err(Error::FitFailed(format!(
                "stored mean {} disagrees with recomputed {}",
                record.mu, model.mu
            )));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(text)?)
    }
}

/// Serialisable snapshot of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub region: Region,
    pub samples: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub params: CorrelationParams,
    pub mu: f64,
    pub sigma2: f64,
    pub nugget: f64,
}

/// Lattice correlation rows and normalised weights for one design.
#[derive(Clone, Debug)]
pub struct GridBasis {
    rows: Vec<f64>,
    weights: Vec<f64>,
    n_samples: usize,
}

/// `𝒩 Σ p(δ_k) p(κ_j) ĵ(δ_k, κ_j)` with predictions clipped to `[0, 1]`.
/// Uses only the predictor: no true-function evaluations.
///
/// The kernel factorises over the two axes, so on a lattice the
/// correlations are products of `M·n` and `N·n` precomputed factors.
pub fn surrogate_objective(model: &KrigingModel, grid: &NoiseGrid) -> Result<f64> {
    let weights = grid.weights()?;
    let n = model.len();
    let region = &model.region;
    let axis_table = |h: usize, coords: Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        let unit: Vec<f64> = coords
            .iter()
            .map(|c| (c - region.lo[h]) / (region.hi[h] - region.lo[h]))
            .collect();
        let table = unit
            .iter()
            .flat_map(|u| model.unit.iter().map(move |s| (*u, s[h])))
            .map(|(u, s)| model.params.axis(h, u, s))
            .collect();
        (unit, table)
    };
    let (ud, fd) = axis_table(0, grid.deltas());
    let (uk, fk) = axis_table(1, grid.kappas());
    let w = model.weights.as_slice();
    let mut predictions = Vec::with_capacity(grid.len());
    for (i, d) in fd.chunks(n).enumerate() {
        for (j, k) in fk.chunks(n).enumerate() {
            let mut y = model.mu;
            for s in 0..n {
                let r = if model.unit[s] == [ud[i], uk[j]] {
                    1.0 + NUGGET
                } else {
                    d[s] * k[s]
                };
                y += r * w[s];
            }
            predictions.push(y.clamp(0.0, 1.0));
        }
    }
    Ok(weighted_sum(&weights, &predictions))
}

fn check_design(samples: &[[f64; 2]], values: &[f64], region: &Region) -> Result<Vec<[f64; 2]>> {
    region.validate()?;
    if samples.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} samples but {} values",
            samples.len(),
            values.len()
        )));
    }
    if samples.len() < 3 {
        return Err(Error::InvalidArgument("at least 3 samples are required".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample value".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample position".into()));
    }
    let unit: Vec<[f64; 2]> = samples.iter().map(|s| region.to_unit(*s)).collect();
    let floor = SEPARATION_FLOOR * 2f64.sqrt();
    for i in 0..unit.len() {
        for j in 0..i {
            let d = (unit[i][0] - unit[j][0]).hypot(unit[i][1] - unit[j][1]);
            if d < floor {
                return Err(Error::DegenerateDesign(format!("samples {j} and {i} are {d:e} apart")));
            }
        }
    }
    Ok(unit)
}

/// Slope of the least-squares line `predicted ≈ c + slope · truth`.
pub fn ols_slope(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    let n = truth.len() as f64;
    let mx = truth.iter().sum::<f64>() / n;
    let my = predicted.iter().sum::<f64>() / n;
    let sxx: f64 = truth.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = truth.iter().zip(predicted).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 1e-28 * mx.abs().max(1.0).powi(2)) {
        return Err(Error::DegenerateValidation("true values have zero variance".into()));
    }
    Ok(sxy / sxx)
}
