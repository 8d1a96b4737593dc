use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::simplex::{nelder_mead, NelderMeadOptions};
use crate::error::{Error, Result};
use crate::spin::{BasisKind, ControlField, FidelityKind, Integrator, NoiseGrid, PointFidelity, DEFAULT_STEPS};
use crate::surrogate::{jittered_grid, FitOptions, Jitter, KrigingModel, Region};

/// A surrogate is accepted only when its leave-one-out slope is strictly
/// above this value.
pub const P_FIT_THRESHOLD: f64 = 0.6;

/// `p_fit > 0.6`.
pub fn accepts(p_fit: f64) -> bool {
    p_fit > P_FIT_THRESHOLD
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "B-PM")]
    BPm,
    #[serde(rename = "PM")]
    Pm,
    #[serde(rename = "B-SFB")]
    BSfb,
    #[serde(rename = "SFB")]
    Sfb,
}

impl Method {
    pub fn basis(self) -> BasisKind {
        match self {
            Method::BPm | Method::Pm => BasisKind::Pm,
            Method::BSfb | Method::Sfb => BasisKind::Sfb,
        }
    }

    pub fn uses_surrogate(self) -> bool {
        matches!(self, Method::BPm | Method::BSfb)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::BPm => "B-PM",
            Method::Pm => "PM",
            Method::BSfb => "B-SFB",
            Method::Sfb => "SFB",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "B-PM" | "BPM" => Ok(Method::BPm),
            "PM" => Ok(Method::Pm),
            "B-SFB" | "BSFB" => Ok(Method::BSfb),
            "SFB" => Ok(Method::Sfb),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

/// Simplex policy for the pulse search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub f_tol: f64,
    pub iterations_per_dim: usize,
    /// Initial simplex offsets as a fraction of each parameter's range.
    pub initial_step_fraction: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-4,
            iterations_per_dim: 200,
            initial_step_fraction: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub method: Method,
    /// Parameter sets `N_D`.
    pub n_sets: usize,
    /// Surrogate sample count `n` (surrogate methods).
    pub samples: usize,
    /// `(M, N)` truth lattice used during search by the direct methods.
    pub search_grid: [usize; 2],
    /// Verification lattice; its ranges and widths also define the noise model.
    pub grid: NoiseGrid,
    /// Pulse length `T`, s.
    pub duration: f64,
    /// `Ω_max`, rad/s.
    pub amp_limit: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub integrator: Integrator,
    pub fidelity: FidelityKind,
    pub search: SearchOptions,
    pub fit: FitOptions,
    #[serde(default)]
    pub jitter: Jitter,
    pub max_model_attempts: usize,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            method: Method::BPm,
            n_sets: 1,
            samples: 9,
            search_grid: [4, 4],
            grid: NoiseGrid::default(),
            duration: 100e-9,
            amp_limit: 2.0 * PI * 10e6,
            n_steps: DEFAULT_STEPS,
            integrator: Integrator::default(),
            fidelity: FidelityKind::State,
            search: SearchOptions::default(),
            fit: FitOptions::default(),
            jitter: Jitter::default(),
            max_model_attempts: 10,
            seed: 0,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_sets == 0 {
            return bad("N_D must be at least 1".into());
        }
        if self.method.uses_surrogate() && crate::spin::exact_sqrt(self.samples).is_none_or(|s| s < 2) {
            return bad(format!("sample count {} must be a perfect square ≥ 4", self.samples));
        }
        if self.search_grid.contains(&0) {
            return bad("search grid must be non-empty".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} must be positive", self.duration));
        }
        if !(self.amp_limit > 0.0 && self.amp_limit.is_finite()) {
            return bad(format!("amplitude limit {} must be positive", self.amp_limit));
        }
        if self.n_steps == 0 {
            return bad("n_steps must be positive".into());
        }
        if self.max_model_attempts == 0 {
            return bad("max_model_attempts must be at least 1".into());
        }
        if !(self.search.f_tol > 0.0 && self.search.initial_step_fraction > 0.0 && self.search.iterations_per_dim > 0) {
            return bad("search options must be positive".into());
        }
        self.grid.validate()?;
        self.fidelity.validate()
    }

    /// Whether the sampling budget is one of the reference scenarios
    /// (`n ∈ {9, 16}` or a 16-point search lattice).
    pub fn is_paper_scenario(&self) -> bool {
        if self.method.uses_surrogate() {
            matches!(self.samples, 9 | 16)
        } else {
            self.search_grid[0] * self.search_grid[1] == 16
        }
    }

    fn point(&self, field: &ControlField) -> Result<PointFidelity> {
        PointFidelity::with_integrator(field, &self.fidelity, self.n_steps, self.integrator)
    }

    /// `F_obj` on an arbitrary lattice.
    pub fn true_objective(&self, field: &ControlField, grid: &NoiseGrid) -> Result<f64> {
        let point = self.point(field)?;
        grid.weighted_average(|d, k| point.eval(d, k))
    }

    /// Random starting field drawn from the initial ranges, then made feasible.
    pub fn initial_field<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ControlField> {
        let kind = self.method.basis();
        let nd = self.n_sets;
        let f0 = 2.0 * PI / self.duration;
        let ranges: Vec<f64> = match kind {
            BasisKind::Pm => vec![self.amp_limit, f0, f0],
            BasisKind::Sfb => vec![self.amp_limit, f0, 2.0 * PI, 2.0 * PI],
        };
        let params: Vec<f64> = ranges
            .iter()
            .flat_map(|hi| std::iter::repeat_n(*hi, nd))
            .map(|hi| rng.random_range(0.0..=hi))
            .collect();
        Ok(ControlField::from_params(kind, &params, self.duration, self.amp_limit)?.enforce_amplitude_constraint())
    }

    fn feasible(&self, x: &[f64]) -> Result<ControlField> {
        Ok(
            ControlField::from_params(self.method.basis(), x, self.duration, self.amp_limit)?
                .enforce_amplitude_constraint(),
        )
    }

    fn simplex_options(&self) -> NelderMeadOptions {
        let bounds = ControlField::param_bounds(self.method.basis(), self.n_sets, self.duration, self.amp_limit);
        NelderMeadOptions {
            f_tol: self.search.f_tol,
            max_iterations: Some(self.search.iterations_per_dim * bounds.len()),
            initial_steps: Some(
                bounds
                    .iter()
                    .map(|(lo, hi)| self.search.initial_step_fraction * (hi - lo))
                    .collect(),
            ),
            ..Default::default()
        }
    }
}

/// A validated surrogate and what it cost.
#[derive(Clone, Debug)]
pub struct SurrogateBuild {
    pub model: KrigingModel,
    pub true_calls: usize,
    pub attempts: usize,
    pub p_fit: f64,
}

/// Repeats sample → evaluate → fit → leave-one-out until `p_fit > 0.6`.
/// `sampler(attempt, positions)` returns the true fidelity at each sample
/// position (attempts count from 1); every returned value counts as one
/// true call.
pub fn build_valid_surrogate<R: Rng + ?Sized>(
    mut sampler: impl FnMut(usize, &[[f64; 2]]) -> Result<Vec<f64>>,
    region: &Region,
    n: usize,
    max_attempts: usize,
    jitter: Jitter,
    fit: &FitOptions,
    rng: &mut R,
) -> Result<SurrogateBuild> {
    if max_attempts == 0 {
        return Err(Error::InvalidArgument("max_attempts must be at least 1".into()));
    }
    let mut true_calls = 0;
    let mut last_p_fit = f64::NAN;
    for attempt in 1..=max_attempts {
        let samples = jittered_grid(region, n, jitter, rng)?;
        let values = sampler(attempt, &samples)?;
        true_calls += values.len();
        let model = match KrigingModel::fit(&samples, &values, region, fit, rng) {
            Ok(m) => m,
            Err(Error::FitFailed(_)) => continue,
            Err(e) => return Err(e),
        };
        match model.loo_validate() {
            Ok(p) if accepts(p) => {
                return Ok(SurrogateBuild {
                    model,
                    true_calls,
                    attempts: attempt,
                    p_fit: p,
                })
            }
            Ok(p) => last_p_fit = p,
            Err(Error::DegenerateValidation(_) | Error::FitFailed(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::ModelValidationFailed {
        attempts: max_attempts,
        last_p_fit,
    })
}

/// Outcome of one optimisation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptRun {
    pub method: Method,
    pub n_sets: usize,
    pub seed: u64,
    /// Feasible parameters after constraint enforcement.
    pub lambda_opt: Vec<f64>,
    pub field: ControlField,
    /// Objective value the search itself saw at `lambda_opt`.
    pub f_search: f64,
    /// `F_obj` on the verification lattice.
    pub f_verified: f64,
    /// Single-point true fidelity evaluations before verification.
    pub true_calls: usize,
    /// Verification cost, reported separately.
    pub verification_calls: usize,
    /// Surrogate build attempts (0 for the direct methods).
    pub model_attempts: usize,
    pub p_fit: Option<f64>,
    pub simplex_evaluations: usize,
    pub converged: bool,
    /// Wall time of the run. Not serialised, so that records of the same
    /// seed are byte-identical.
    #[serde(skip)]
    pub wall_ms: u64,
}

/// Memoises the objective per feasible field, so proposals that clamp to
/// the same field cost nothing extra.
struct Memo {
    seen: HashMap<Vec<u64>, f64>,
}

impl Memo {
    fn new() -> Self {
        Self { seen: HashMap::new() }
    }

    fn get_or(&mut self, field: &ControlField, f: impl FnOnce() -> Result<f64>) -> Result<f64> {
        let key: Vec<u64> = field.params().iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.seen.get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        self.seen.insert(key, v);
        Ok(v)
    }
}

/// Simplex search with a fallible objective; the first error aborts the
/// search and is returned.
fn search(
    config: &OptConfig,
    x0: &[f64],
    mut objective: impl FnMut(&ControlField) -> Result<f64>,
) -> Result<(ControlField, f64, usize, bool)> {
    let mut failure = None;
    let run = nelder_mead(
        |x| {
            if failure.is_some() {
                return f64::NAN;
            }
            match config.feasible(x).and_then(|f| objective(&f)) {
                Ok(v) => 1.0 - v,
                Err(e) => {
                    failure = Some(e);
                    f64::NAN
                }
            }
        },
        x0,
        &config.simplex_options(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let run = run?;
    Ok((config.feasible(&run.x)?, 1.0 - run.f, run.evaluations, run.converged))
}

/// Surrogate-assisted search (B-PM, or B-SFB with the SFB basis).
///
/// One surrogate is validated at a random initial field (redrawn whenever
/// a model is rejected) and its sample positions and `(α, p)` are frozen. Each new candidate re-evaluates the
/// true fidelity at those `n` positions (n true calls), refreshes the
/// predictor and scores it on the full lattice through the surrogate.
pub fn bpm_optimize(config: &OptConfig) -> Result<OptRun> {
    config.validate()?;
    if !config.method.uses_surrogate() {
        return Err(Error::InvalidArgument(format!(
            "{} does not use a surrogate",
            config.method
        )));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let region = Region::of_grid(&config.grid);

    // a rejected model restarts from a freshly drawn initial field
    let mut field_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut initial = config.initial_field(&mut field_rng)?;
    let build = build_valid_surrogate(
        |attempt, s| {
            if attempt > 1 {
                initial = config.initial_field(&mut field_rng)?;
            }
            let probe = config.point(&initial)?;
            Ok(s.iter().map(|p| probe.eval(p[0], p[1])).collect())
        },
        &region,
        config.samples,
        config.max_model_attempts,
        config.jitter,
        &config.fit,
        &mut rng,
    )?;
    let basis = build.model.grid_basis(&config.grid)?;
    let mut true_calls = build.true_calls;
    let mut memo = Memo::new();
    let model = &build.model;
    let positions = model.samples().to_vec();

    let (field, f_search, evaluations, converged) = search(config, &initial.params(), |field| {
        memo.get_or(field, || {
            let point = config.point(field)?;
            let values: Vec<f64> = positions.iter().map(|p| point.eval(p[0], p[1])).collect();
            true_calls += values.len();
            Ok(model.refresh_values(&values)?.objective_with(&basis))
        })
    })?;
    finish(
        config,
        field,
        f_search,
        true_calls,
        build.attempts,
        Some(build.p_fit),
        evaluations,
        converged,
        start,
    )
}

/// Direct search on the true objective over the small search lattice
/// (PM, SFB), or the surrogate search for B-SFB.
pub fn baseline_optimize(config: &OptConfig) -> Result<OptRun> {
    config.validate()?;
    match config.method {
        Method::BSfb => bpm_optimize(config),
        Method::BPm => Err(Error::InvalidArgument("B-PM is not a baseline".into())),
        Method::Pm | Method::Sfb => {
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let initial = config.initial_field(&mut rng)?;
            let lattice = config.grid.with_size(config.search_grid[0], config.search_grid[1]);
            let mut true_calls = 0;
            let mut memo = Memo::new();
            let (field, f_search, evaluations, converged) = search(config, &initial.params(), |field| {
                memo.get_or(field, || {
                    true_calls += lattice.len();
                    config.true_objective(field, &lattice)
                })
            })?;
            finish(
                config,
                field,
                f_search,
                true_calls,
                0,
                None,
                evaluations,
                converged,
                start,
            )
        }
    }
}

/// Dispatches on the configured method.
pub fn optimize(config: &OptConfig) -> Result<OptRun> {
    match config.method {
        Method::BPm => bpm_optimize(config),
        _ => baseline_optimize(config),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    config: &OptConfig,
    field: ControlField,
    f_search: f64,
    true_calls: usize,
    model_attempts: usize,
    p_fit: Option<f64>,
    simplex_evaluations: usize,
    converged: bool,
    start: Instant,
) -> Result<OptRun> {
    let f_verified = config.true_objective(&field, &config.grid)?;
    Ok(OptRun {
        method: config.method,
        n_sets: config.n_sets,
        seed: config.seed,
        lambda_opt: field.params(),
        field,
        f_search,
        f_verified,
        true_calls,
        verification_calls: config.grid.len(),
        model_attempts,
        p_fit,
        simplex_evaluations,
        converged,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}
