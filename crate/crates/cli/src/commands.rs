use std::f64::consts::PI;
use std::time::Instant;

use anyhow::{Context, Result};
use bpm_core::magnetometry::{estimate_t2, simulate_ramsey, PulseSequence};
use bpm_core::optimizer::{optimize, run_trials, Method, OptConfig, OptRun, TrialStats};
use bpm_core::spin::{fidelity_map, ControlField, FidelityKind, NoiseGrid, PointFidelity};
use bpm_core::surrogate::{jittered_grid, surrogate_objective, FitOptions, Jitter, KrigingModel, Region};
use bpm_core::units::{rad_per_s_to_mhz, s_to_us};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::OutDir;

/// One row of `trials.csv` / `compare_trials.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub n_d: usize,
    pub seed: u64,
    pub f_search: f64,
    pub f_verified: f64,
    pub true_calls: usize,
    pub verification_calls: usize,
    pub model_attempts: usize,
    pub p_fit: Option<f64>,
    pub simplex_evaluations: usize,
    pub converged: bool,
    /// Space-separated parameters in rad/s (and rad for phases).
    pub lambda_opt: String,
}

impl TrialRecord {
    fn new(trial: usize, run: &OptRun) -> Self {
        Self {
            trial,
            method: run.method,
            n_d: run.n_sets,
            seed: run.seed,
            f_search: run.f_search,
            f_verified: run.f_verified,
            true_calls: run.true_calls,
            verification_calls: run.verification_calls,
            model_attempts: run.model_attempts,
            p_fit: run.p_fit,
            simplex_evaluations: run.simplex_evaluations,
            converged: run.converged,
            lambda_opt: run
                .lambda_opt
                .iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub delta_mhz: f64,
    pub kappa: f64,
    pub fidelity: f64,
}

fn map_rows(grid: &NoiseGrid, values: &[f64]) -> Vec<MapRow> {
    grid.points()
        .iter()
        .zip(values)
        .map(|(p, f)| MapRow {
            delta_mhz: rad_per_s_to_mhz(p[0]),
            kappa: p[1],
            fidelity: *f,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub method: Method,
    pub n_d: usize,
    pub trials: usize,
    pub succeeded: usize,
    pub mean_f: f64,
    pub median_f: f64,
    pub best_f: f64,
    pub mean_true_calls: f64,
    pub count_ge_0_89: usize,
    pub count_ge_0_9: usize,
}

impl SummaryRecord {
    fn new(config: &OptConfig, trials: usize, stats: &TrialStats) -> Self {
        Self {
            method: config.method,
            n_d: config.n_sets,
            trials,
            succeeded: stats.runs.len(),
            mean_f: stats.mean_f,
            median_f: stats.median_f,
            best_f: stats.best_f,
            mean_true_calls: stats.mean_true_calls,
            count_ge_0_89: stats.count_at_least(0.89),
            count_ge_0_9: stats.count_at_least(0.9),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

fn warn_unusual_budget(config: &OptConfig) {
    if !config.is_paper_scenario() {
        eprintln!(
            "note: {} with this sampling budget is not one of the reference scenarios",
            config.method
        );
    }
}

pub fn optimize_cmd(config: &RunConfig, out: &OutDir) -> Result<()> {
    let start = Instant::now();
    let opt = config.opt_config()?;
    warn_unusual_budget(&opt);
    let run = optimize(&opt)?;
    let map = fidelity_map(&run.field, &opt.grid, &opt.fidelity, opt.n_steps)?;
    out.json("run.json", &run)?;
    out.csv("fidelity_map.csv", &map_rows(&opt.grid, &map))?;
    out.metadata(
        "optimize",
        start.elapsed().as_millis() as u64,
        serde_json::json!({ "run_wall_ms": run.wall_ms }),
    )?;
    println!(
        "{} N_D={} seed={}: F_verified={:.4} F_search={:.4} true_calls={}",
        run.method, run.n_sets, run.seed, run.f_verified, run.f_search, run.true_calls
    );
    Ok(())
}

fn trials_of(config: &OptConfig, n: usize) -> Result<(TrialStats, Vec<TrialRecord>)> {
    let stats = run_trials(config, n, None)?;
    let records = stats
        .runs
        .iter()
        .map(|r| {
            let trial = (0..n)
                .find(|i| bpm_core::optimizer::trial_seed(config.seed, *i) == r.seed)
                .expect("seed of a trial");
            TrialRecord::new(trial, r)
        })
        .collect();
    for f in &stats.failures {
        eprintln!("trial {} (seed {}) failed: {}", f.trial, f.seed, f.error);
    }
    Ok((stats, records))
}

pub fn trials_cmd(config: &RunConfig, out: &OutDir) -> Result<()> {
    let start = Instant::now();
    let opt = config.opt_config()?;
    warn_unusual_budget(&opt);
    let n = config.optimizer.trials;
    let (stats, records) = trials_of(&opt, n)?;
    let summary = SummaryRecord::new(&opt, n, &stats);
    let bins = stats.histogram.len();
    let histogram: Vec<HistogramRow> = stats
        .histogram
        .iter()
        .enumerate()
        .map(|(i, c)| HistogramRow {
            bin_lo: i as f64 / bins as f64,
            bin_hi: (i + 1) as f64 / bins as f64,
            count: *c,
        })
        .collect();
    out.csv("trials.csv", &records)?;
    out.csv("histogram.csv", &histogram)?;
    out.json(
        "summary.json",
        &serde_json::json!({ "summary": summary, "failures": stats.failures }),
    )?;
    let walls: Vec<u64> = stats.runs.iter().map(|r| r.wall_ms).collect();
    out.metadata(
        "trials",
        start.elapsed().as_millis() as u64,
        serde_json::json!({ "run_wall_ms": walls }),
    )?;
    print_summary(&summary);
    Ok(())
}

fn print_summary(s: &SummaryRecord) {
    println!(
        "{} N_D={}: {}/{} ok, mean F {:.4}, median {:.4}, best {:.4}, ≥0.9: {}, mean true calls {:.0}",
        s.method, s.n_d, s.succeeded, s.trials, s.mean_f, s.median_f, s.best_f, s.count_ge_0_9, s.mean_true_calls
    );
}

pub fn compare_cmd(config: &RunConfig, out: &OutDir) -> Result<()> {
    let start = Instant::now();
    let n = config.optimizer.trials;
    let mut summaries = Vec::new();
    let mut all = Vec::new();
    for (method, n_d) in &config.optimizer.compare {
        let opt = OptConfig {
            method: *method,
            n_sets: *n_d,
            ..config.opt_config()?
        };
        opt.validate()?;
        let (stats, records) = trials_of(&opt, n)?;
        let s = SummaryRecord::new(&opt, n, &stats);
        print_summary(&s);
        summaries.push(s);
        all.extend(records);
    }
    out.csv("compare.csv", &summaries)?;
    out.csv("compare_trials.csv", &all)?;
    out.metadata("compare", start.elapsed().as_millis() as u64, serde_json::Value::Null)?;
    Ok(())
}

/// The function being mapped: a field's true fidelity or a constant.
enum Truth {
    Field(Box<PointFidelity>),
    Constant(f64),
}

impl Truth {
    fn eval(&self, d: f64, k: f64) -> f64 {
        match self {
            Truth::Field(p) => p.eval(d, k),
            Truth::Constant(c) => *c,
        }
    }

    fn objective(&self, grid: &NoiseGrid) -> Result<f64> {
        Ok(grid.weighted_average(|d, k| self.eval(d, k))?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub delta_mhz: f64,
    pub kappa: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    /// `fixed`: one model's positions and `(α, p)` reused for every field;
    /// `refit`: a new design and fit per field.
    pub mode: String,
    pub mn: usize,
    pub true_ms: f64,
    pub true_deviation: f64,
    pub surrogate_ms: f64,
    pub surrogate_deviation: f64,
}

pub fn surrogate_demo_cmd(config: &RunConfig, out: &OutDir) -> Result<()> {
    let start = Instant::now();
    let demo = &config.surrogate_demo;
    let grid = config.noise_grid.to_grid()?;
    let region = Region::of_grid(&grid);
    let n_steps = config.pulse.n_steps;
    let jitter = if demo.synthetic_constant.is_some() {
        Jitter::None
    } else {
        Jitter::Uniform
    };
    let truth_for = |field: &ControlField| -> Result<Truth> {
        Ok(match demo.synthetic_constant {
            Some(c) => Truth::Constant(c),
            None => Truth::Field(Box::new(PointFidelity::new(field, &FidelityKind::State, n_steps)?)),
        })
    };
    let field = config.demo_field()?;
    let truth = truth_for(&field)?;
    let truth_map = grid.map(|d, k| truth.eval(d, k));
    out.csv("truth_map.csv", &map_rows(&grid, &truth_map))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut models = serde_json::Map::new();
    for &n in &demo.sample_counts {
        let coarse = grid.square(n)?;
        let coarse_map = coarse.map(|d, k| truth.eval(d, k));
        out.csv(&format!("subsample_n{n}.csv"), &map_rows(&coarse, &coarse_map))?;

        let samples = jittered_grid(&region, n, jitter, &mut rng)?;
        let values: Vec<f64> = samples.iter().map(|p| truth.eval(p[0], p[1])).collect();
        let model = KrigingModel::fit(&samples, &values, &region, &FitOptions::default(), &mut rng)?;
        let rows: Vec<SampleRow> = samples
            .iter()
            .zip(&values)
            .map(|(p, f)| SampleRow {
                delta_mhz: rad_per_s_to_mhz(p[0]),
                kappa: p[1],
                fidelity: *f,
            })
            .collect();
        out.csv(&format!("samples_n{n}.csv"), &rows)?;
        let predicted: Vec<f64> = grid.points().iter().map(|p| model.predict(*p)).collect();
        out.csv(&format!("prediction_n{n}.csv"), &map_rows(&grid, &predicted))?;
        let mae = predicted
            .iter()
            .zip(&truth_map)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / predicted.len() as f64;
        models.insert(
            format!("n{n}"),
            serde_json::json!({
                "model": model.to_record(),
                "p_fit": model.loo_validate().ok(),
                "prediction_mae": mae,
            }),
        );
    }
    out.json("demo_models.json", &models)?;

    let rows = scaling_table(config, &grid, &region, jitter, &truth_for, &mut rng)?;
    out.csv("objective_scaling.csv", &rows)?;
    out.metadata(
        "surrogate-demo",
        start.elapsed().as_millis() as u64,
        serde_json::Value::Null,
    )?;
    println!("surrogate demo written to {}", out.path().display());
    Ok(())
}

/// Cost and deviation of the true and surrogate objectives against lattice
/// size, averaged over random PM fields. Times include the surrogate's
/// true sample evaluations.
fn scaling_table(
    config: &RunConfig,
    grid: &NoiseGrid,
    region: &Region,
    jitter: Jitter,
    truth_for: &dyn Fn(&ControlField) -> Result<Truth>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ScalingRow>> {
    let demo = &config.surrogate_demo;
    let n = demo.table_samples;
    let (duration, amp) = (config.duration(), config.amp_limit());
    let f0 = 2.0 * PI / duration;
    let fields: Vec<ControlField> = (0..demo.fields)
        .map(|_| {
            ControlField::pm(
                vec![rng.random_range(0.0..=amp)],
                vec![rng.random_range(0.0..=f0)],
                vec![rng.random_range(0.0..=f0)],
                duration,
                amp,
            )
            .map(|f| f.enforce_amplitude_constraint())
        })
        .collect::<bpm_core::Result<_>>()?;
    let truths: Vec<Truth> = fields.iter().map(truth_for).collect::<Result<_>>()?;
    let reference: Vec<f64> = truths.iter().map(|t| t.objective(grid)).collect::<Result<_>>()?;

    let base_truth = truth_for(&config.demo_field()?)?;
    let positions = jittered_grid(region, n, jitter, rng)?;
    let base_values: Vec<f64> = positions.iter().map(|p| base_truth.eval(p[0], p[1])).collect();
    let frozen = KrigingModel::fit(&positions, &base_values, region, &FitOptions::default(), rng)?;

    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
    let mut rows = Vec::new();
    for mode in ["fixed", "refit"] {
        for &size in &demo.lattice_sizes {
            let lattice = grid.square(size)?;
            let (mut true_ms, mut true_dev, mut sur_ms, mut sur_dev) = (0.0, 0.0, 0.0, 0.0);
            for (truth, reference) in truths.iter().zip(&reference) {
                let t = Instant::now();
                let f = truth.objective(&lattice)?;
                true_ms += ms(t);
                true_dev += (f - reference).abs();

                let t = Instant::now();
                let model = if mode == "fixed" {
                    let v: Vec<f64> = positions.iter().map(|p| truth.eval(p[0], p[1])).collect();
                    frozen.refresh_values(&v)?
                } else {
                    let s = jittered_grid(region, n, jitter, rng)?;
                    let v: Vec<f64> = s.iter().map(|p| truth.eval(p[0], p[1])).collect();
                    KrigingModel::fit(&s, &v, region, &FitOptions::default(), rng)?
                };
                let f = surrogate_objective(&model, &lattice)?;
                sur_ms += ms(t);
                sur_dev += (f - reference).abs();
            }
            let k = truths.len().max(1) as f64;
            rows.push(ScalingRow {
                mode: mode.to_string(),
                mn: size,
                true_ms: true_ms / k,
                true_deviation: true_dev / k,
                surrogate_ms: sur_ms / k,
                surrogate_deviation: sur_dev / k,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_us: f64,
    pub p0_mean: f64,
    pub p0_stderr: f64,
    pub pulse_kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Row {
    pub pulse_kind: String,
    pub t2_us: f64,
    pub lower_bound: bool,
}

pub fn magnetometry_cmd(config: &RunConfig, out: &OutDir) -> Result<()> {
    let start = Instant::now();
    let noise = config.noise_settings()?;
    let options = config.ramsey_options();
    let mut sequences: Vec<PulseSequence> = vec![config.rectangular_sequence()?, config.shaped_sequence()?];
    if config.magnetometry.ideal_reference {
        sequences.push(config.ideal_sequence()?);
    }
    let mut traces = Vec::new();
    let mut t2 = Vec::new();
    for seq in &sequences {
        let trace = simulate_ramsey(seq, &config.signal(seq), &noise, &options)
            .with_context(|| format!("simulating {} pulses", seq.kind.label()))?;
        let est = estimate_t2(&trace.times(), &trace.p0())?;
        traces.extend(trace.points.iter().map(|p| TraceRow {
            time_us: s_to_us(p.time),
            p0_mean: p.p0_mean,
            p0_stderr: p.p0_stderr,
            pulse_kind: trace.pulse_kind.clone(),
        }));
        t2.push(T2Row {
            pulse_kind: trace.pulse_kind.clone(),
            t2_us: s_to_us(est.t2),
            lower_bound: est.lower_bound,
        });
    }
    out.csv("ramsey_traces.csv", &traces)?;
    out.csv("t2.csv", &t2)?;
    let ratio = t2[1].t2_us / t2[0].t2_us;
    out.json(
        "t2_summary.json",
        &serde_json::json!({ "t2": t2, "ratio_shaped_over_rectangular": ratio }),
    )?;
    out.metadata(
        "magnetometry",
        start.elapsed().as_millis() as u64,
        serde_json::Value::Null,
    )?;
    for r in &t2 {
        println!(
            "{}: T2 = {:.1} μs{}",
            r.pulse_kind,
            r.t2_us,
            if r.lower_bound {
                " (not resolved within t_max)"
            } else {
                ""
            }
        );
    }
    println!("ratio {ratio:.2}");
    Ok(())
}
