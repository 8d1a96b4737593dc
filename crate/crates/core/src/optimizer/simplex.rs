//! Derivative-free Nelder–Mead simplex minimisation.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once `f_worst − f_best` over the simplex falls to this value.
    pub f_tol: f64,
    /// When set, convergence additionally requires every vertex to lie
    /// within this (max-norm) distance of the best one.
    pub x_tol: Option<f64>,
    /// Iteration cap; `None` means `200 × dim`.
    pub max_iterations: Option<usize>,
    pub max_evaluations: Option<usize>,
    /// Per-coordinate offsets of the initial vertices from `x0`. `None`
    /// uses 5% of `|x0_i|`, or 2.5e-4 where `x0_i = 0`.
    pub initial_steps: Option<Vec<f64>>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            f_tol: 1e-4,
            x_tol: None,
            max_iterations: None,
            max_evaluations: None,
            initial_steps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    calls: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.calls += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective { evaluation: self.calls })
        }
    }
}

/// Minimises `objective` starting from `x0`.
pub fn nelder_mead<F>(objective: F, x0: &[f64], options: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "nelder_mead needs at least one coordinate".into(),
        ));
    }
    let steps = match &options.initial_steps {
        Some(s) if s.len() == dim => s.clone(),
        Some(s) => {
            return Err(Error::InvalidArgument(format!(
                "{} initial steps for {dim} coordinates",
                s.len()
            )));
        }
        None => x0.iter().map(|&v| if v != 0.0 { 0.05 * v } else { 2.5e-4 }).collect(),
    };
    let max_iterations = options.max_iterations.unwrap_or(200 * dim);
    let max_evaluations = options.max_evaluations.unwrap_or(usize::MAX);
    let mut f = Counted { f: objective, calls: 0 };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f.eval(x0)?));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = f.eval(&x)?;
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let within_x = options.x_tol.is_none_or(|tol| {
            simplex[1..]
                .iter()
                .all(|(x, _)| x.iter().zip(&simplex[0].0).all(|(a, b)| (a - b).abs() <= tol))
        });
        if worst - best <= options.f_tol && within_x {
            converged = true;
            break;
        }
        if iterations >= max_iterations || f.calls >= max_evaluations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let along =
            |t: f64, worst: &[f64]| -> Vec<f64> { centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect() };
        let x_worst = simplex[dim].0.clone();
        let second_worst = simplex[dim - 1].1;

        let xr = along(options.reflection, &x_worst);
        let fr = f.eval(&xr)?;
        if fr < best {
            let xe = along(options.reflection * options.expansion, &x_worst);
            let fe = f.eval(&xe)?;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < worst {
            let xc = along(options.reflection * options.contraction, &x_worst);
            let fc = f.eval(&xc)?;
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(-options.contraction, &x_worst);
            let fc = f.eval(&xc)?;
            let ok = fc < worst;
            (xc, fc, ok)
        };
        if accept {
            simplex[dim] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x_best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + options.shrink * (v - b))
                .collect();
            let v = f.eval(&x)?;
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        f: fx,
        evaluations: f.calls,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_bowl() {
        let opts = NelderMeadOptions {
            f_tol: 1e-12,
            initial_steps: Some(vec![1.0; 4]),
            ..Default::default()
        };
        let r = nelder_mead(|x| x.iter().map(|v| (v - 3.0).powi(2)).sum(), &[0.0; 4], &opts).unwrap();
        assert!(r.f < 1e-8, "f = {}", r.f);
        assert!(r.x.iter().all(|v| (v - 3.0).abs() < 1e-3));
        assert!(r.converged);
    }

    #[test]
    fn rosenbrock_within_budget() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            f_tol: 1e-10,
            x_tol: Some(1e-6),
            max_evaluations: Some(500),
            initial_steps: Some(vec![0.1, 0.1]),
            ..Default::default()
        };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &opts).unwrap();
        assert!(r.f < 1e-6, "f = {} after {} evals", r.f, r.evaluations);
        assert!(r.evaluations <= 500 + 3);
        assert!((r.x[0] - 1.0).abs() < 1e-2 && (r.x[1] - 1.0).abs() < 2e-2);
    }

    #[test]
    fn eval_count_matches_instrumented_calls() {
        let mut calls = 0usize;
        let r = nelder_mead(
            |x| {
                calls += 1;
                (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2) + x[2].abs()
            },
            &[0.5, 0.5, 0.5],
            &NelderMeadOptions::default(),
        )
        .unwrap();
        assert_eq!(r.evaluations, calls);
    }

    #[test]
    fn non_finite_aborts() {
        let r = nelder_mead(
            |x| if x[0] > 0.2 { f64::NAN } else { -x[0] },
            &[0.0],
            &NelderMeadOptions {
                initial_steps: Some(vec![0.1]),
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::NonFiniteObjective { .. })));
        let r = nelder_mead(|_| f64::INFINITY, &[0.0], &NelderMeadOptions::default());
        assert!(matches!(r, Err(Error::NonFiniteObjective { evaluation: 1 })));
    }

    #[test]
    fn iteration_cap_defaults_to_200_per_dim() {
        let r = nelder_mead(
            |x| x[0].sin() * 1e-3 + x[1],
            &[0.0, 0.0],
            &NelderMeadOptions {
                f_tol: 0.0,
                initial_steps: Some(vec![1.0, 1.0]),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.iterations, 400);
        assert!(!r.converged);
    }
}
