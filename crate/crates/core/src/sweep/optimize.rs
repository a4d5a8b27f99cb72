//! Nelder–Mead search over normalised pulse-length ratios.
//!
//! Ratios live on the simplex Σr = 1. The search runs in the first
//! N−2 coordinates; the last ratio is 1 − Σ(others). Points with any
//! ratio below `min_ratio`, and points whose propagation fails, score
//! yield −1.

use crate::dynamics::StepPolicy;
use crate::error::{Error, Result};
use crate::model::{LadderSystem, Shape};

use super::{canonical_ratios, evaluate_point};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

const WORST_YIELD: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    /// Extra starting ratio vectors; equal ratios are always tried.
    pub seeds: Vec<Vec<f64>>,
    pub step: StepPolicy,
    pub max_iterations: usize,
    /// Convergence threshold on the simplex diameter.
    pub tolerance: f64,
    /// Smallest admissible normalised ratio.
    pub min_ratio: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            seeds: Vec::new(),
            step: StepPolicy::PerSegment(400.0),
            max_iterations: 200,
            tolerance: 1e-4,
            min_ratio: 0.01,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    /// Best normalised ratios found (sum to 1).
    pub ratios: Vec<f64>,
    pub best_yield: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Objective<'a> {
    sys: &'a LadderSystem,
    total_time: f64,
    shape: Shape,
    opts: &'a OptimizeOptions,
    evaluations: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl Objective<'_> {
    fn ratios(x: &[f64]) -> Vec<f64> {
        let mut r = x.to_vec();
        r.push(1.0 - x.iter().sum::<f64>());
        r
    }

    fn score_ratios(&mut self, r: Vec<f64>, enforce_floor: bool) -> f64 {
        let feasible = r
            .iter()
            .all(|v| *v > 0.0 && (!enforce_floor || *v >= self.opts.min_ratio));
        let y = if feasible {
            self.evaluations += 1;
            evaluate_point(self.sys, self.total_time, &r, self.shape, self.opts.step)
                .map(|p| p.final_yield)
                .unwrap_or(WORST_YIELD)
        } else {
            WORST_YIELD
        };
        if feasible && self.best.as_ref().is_none_or(|(_, b)| y > *b) {
            self.best = Some((r, y));
        }
        y
    }

    /// Cost to minimise: −yield.
    fn cost(&mut self, x: &[f64]) -> f64 {
        -self.score_ratios(Self::ratios(x), true)
    }
}

/// Searches the ratio simplex for the highest final yield at fixed T_f.
///
/// Deterministic for fixed options. Every seed is evaluated before the
/// search starts, so the returned yield is never below the best seed.
pub fn optimize_ratios(
    sys: &LadderSystem,
    total_time: f64,
    shape: Shape,
    opts: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    sys.ensure_valid()?;
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::domain(format!(
            "total time must be > 0, got {total_time}"
        )));
    }
    let m = sys.n_transitions();
    let mut seeds = vec![vec![1.0 / m as f64; m]];
    for s in &opts.seeds {
        if s.len() != m || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!(
                "seed {s:?} must have {m} positive entries"
            )));
        }
        seeds.push(canonical_ratios(s));
    }

    let mut obj = Objective {
        sys,
        total_time,
        shape,
        opts,
        evaluations: 0,
        best: None,
    };
    let mut best_seed = (seeds[0].clone(), f64::NEG_INFINITY);
    for s in &seeds {
        let y = obj.score_ratios(s.clone(), false);
        if y > best_seed.1 {
            best_seed = (s.clone(), y);
        }
    }

    let dim = m - 1;
    let mut iterations = 0;
    let mut converged = dim == 0;
    if dim > 0 {
        let x0: Vec<f64> = best_seed.0[..dim].to_vec();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let f0 = obj.cost(&x0);
        simplex.push((x0.clone(), f0));
        for i in 0..dim {
            let mut x = x0.clone();
            x[i] += opts.initial_step;
            if Objective::ratios(&x)[dim] < opts.min_ratio {
                x[i] = x0[i] - opts.initial_step;
            }
            let f = obj.cost(&x);
            simplex.push((x, f));
        }

        while iterations < opts.max_iterations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if diameter(&simplex) < opts.tolerance {
                converged = true;
                break;
            }
            iterations += 1;

            let worst = simplex[dim].clone();
            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(REFLECT);
            let fr = obj.cost(&xr);
            if fr < simplex[0].1 {
                let xe = along(REFLECT * EXPAND);
                let fe = obj.cost(&xe);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = along(REFLECT * CONTRACT);
                let fc = obj.cost(&xc);
                (xc, fc)
            } else {
                let xc = along(-CONTRACT);
                let fc = obj.cost(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[dim] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = best
                    .iter()
                    .zip(&v.0)
                    .map(|(b, x)| b + SHRINK * (x - b))
                    .collect();
                let f = obj.cost(&x);
                *v = (x, f);
            }
        }
    }

    let (ratios, best_yield) = obj.best.clone().unwrap_or(best_seed);
    Ok(OptimizeOutcome {
        ratios,
        best_yield,
        iterations,
        evaluations: obj.evaluations,
        converged,
    })
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let s: f64 = simplex[i]
                .0
                .iter()
                .zip(&simplex[j].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d = d.max(s.sqrt());
        }
    }
    d
}
