//! Grid sweeps over total control time and pulse-length ratios.

mod optimize;

pub use optimize::{optimize_ratios, OptimizeOptions, OptimizeOutcome};

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{propagate_with, PropagateOptions, Sampling, StepPolicy};
use crate::error::{Error, Result};
use crate::model::{ground_state, ratios_to_durations, LadderSystem, Shape};
use crate::output::{config_hash, header_line, sig12};
use crate::protocol::{build_inversion_schedule, yield_metric};

/// Total control times × ratio vectors, evaluated for one envelope shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub total_times: Vec<f64>,
    pub ratio_sets: Vec<Vec<f64>>,
    pub shape: Shape,
}

impl SweepGrid {
    pub fn new(total_times: Vec<f64>, ratio_sets: Vec<Vec<f64>>, shape: Shape) -> Result<Self> {
        if total_times.is_empty() || ratio_sets.is_empty() {
            return Err(Error::domain(
                "sweep grid needs at least one time and one ratio set",
            ));
        }
        if let Some(t) = total_times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::domain(format!("total times must be > 0, got {t}")));
        }
        for r in &ratio_sets {
            if r.is_empty() || r.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::domain(format!(
                    "ratio entries must be > 0, got {r:?}"
                )));
            }
        }
        Ok(Self {
            total_times,
            ratio_sets,
            shape,
        })
    }

    /// T_f = 5, 10, …, 50 ns against equal ratios, the lifetime ratios
    /// τ₂:…:τ_N (when all are finite), and 1:…:1:k for k = 2, 3, 4.
    pub fn default_for(sys: &LadderSystem, shape: Shape) -> Self {
        let m = sys.n_transitions().max(1);
        let mut ratio_sets = vec![vec![1.0; m]];
        if let Some(tau) = sys.finite_lifetimes() {
            if !tau.is_empty() {
                ratio_sets.push(tau);
            }
        }
        if m > 1 {
            for k in [2.0, 3.0, 4.0] {
                let mut r = vec![1.0; m];
                r[m - 1] = k;
                ratio_sets.push(r);
            }
        }
        Self {
            total_times: (1..=10).map(|k| 5.0 * k as f64).collect(),
            ratio_sets,
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.total_times.len() * self.ratio_sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in output order: ratio-major, times in given order.
    pub fn points(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.ratio_sets
            .iter()
            .flat_map(move |r| self.total_times.iter().map(move |&t| (t, r.as_slice())))
    }
}

/// Scales ratios to sum to 1.
pub fn canonical_ratios(ratios: &[f64]) -> Vec<f64> {
    let s: f64 = ratios.iter().sum();
    ratios.iter().map(|r| r / s).collect()
}

/// Colon-separated ratios normalised to a smallest entry of 1, e.g.
/// `1:1:3`. Proportional vectors get the same label.
pub fn ratio_label(ratios: &[f64]) -> String {
    let c = canonical_ratios(ratios);
    let min = c.iter().copied().fold(f64::INFINITY, f64::min);
    c.iter()
        .map(|x| {
            let v = format!("{:.4}", x / min);
            v.trim_end_matches('0').trim_end_matches('.').to_string()
        })
        .collect::<Vec<_>>()
        .join(":")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "yield")]
    pub final_yield: f64,
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub total_time: f64,
    /// Canonical (sum-to-one) ratios.
    pub ratios: Vec<f64>,
    pub label: String,
    /// Error text when this point's propagation failed.
    pub outcome: std::result::Result<SweepPoint, String>,
}

impl SweepRow {
    pub fn final_yield(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|p| p.final_yield)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub config_hash: String,
    pub step: StepPolicy,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.outcome.is_err())
    }

    /// Yield at (T_f, ratios), matching ratios up to scale.
    pub fn yield_at(&self, total_time: f64, ratios: &[f64]) -> Option<f64> {
        let label = ratio_label(ratios);
        self.rows
            .iter()
            .find(|r| r.total_time == total_time && r.label == label)
            .and_then(SweepRow::final_yield)
    }
}

/// Final state of the calibrated schedule for one (T_f, ratios) point.
pub fn evaluate_point(
    sys: &LadderSystem,
    total_time: f64,
    ratios: &[f64],
    shape: Shape,
    step: StepPolicy,
) -> Result<SweepPoint> {
    let durations = ratios_to_durations(total_time, ratios)?;
    let schedule = build_inversion_schedule(sys, &durations, shape)?;
    let opts = PropagateOptions {
        step,
        sampling: Sampling::Endpoints,
    };
    let traj = propagate_with(&ground_state(sys.n_levels())?, &schedule, sys, &opts)?;
    let rho = traj.final_state();
    Ok(SweepPoint {
        final_yield: yield_metric(rho),
        populations: rho.populations(),
    })
}

#[derive(Serialize)]
struct SweepProvenance<'a> {
    system: &'a LadderSystem,
    grid: &'a SweepGrid,
    step: StepPolicy,
}

/// Evaluates every grid point, in parallel on the current rayon pool.
///
/// Rows come back in [`SweepGrid::points`] order whatever the pool size,
/// and each point is a pure function of its inputs, so the result is
/// bit-identical across thread counts. A failed point is recorded in its
/// row and does not abort the others.
pub fn run_sweep(sys: &LadderSystem, grid: &SweepGrid, step: StepPolicy) -> Result<SweepResult> {
    sys.ensure_valid()?;
    let grid = SweepGrid::new(
        grid.total_times.clone(),
        grid.ratio_sets.clone(),
        grid.shape,
    )?;
    if let Some(r) = grid
        .ratio_sets
        .iter()
        .find(|r| r.len() != sys.n_transitions())
    {
        return Err(Error::domain(format!(
            "ratio set {r:?} needs {} entries",
            sys.n_transitions()
        )));
    }
    let points: Vec<(f64, &[f64])> = grid.points().collect();
    let rows = points
        .par_iter()
        .map(|&(t, r)| SweepRow {
            total_time: t,
            ratios: canonical_ratios(r),
            label: ratio_label(r),
            outcome: evaluate_point(sys, t, r, grid.shape, step).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepResult {
        rows,
        config_hash: config_hash(&SweepProvenance {
            system: sys,
            grid: &grid,
            step,
        }),
        step,
    })
}

/// Writes `Tf_ns,ratio_label,yield` rows, one series per ratio set.
pub fn export_fig2(result: &SweepResult, path: &Path) -> Result<()> {
    export_fig2_with_hash(result, path, &result.config_hash)
}

/// As [`export_fig2`] with a caller-supplied provenance hash.
pub fn export_fig2_with_hash(result: &SweepResult, path: &Path, hash: &str) -> Result<()> {
    if result.rows.is_empty() {
        return Err(Error::domain("sweep result is empty"));
    }
    let mut out = String::new();
    out.push_str(&header_line(hash));
    out.push('\n');
    out.push_str("Tf_ns,ratio_label,yield\n");
    for row in &result.rows {
        let y = row.final_yield().unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{}\n",
            sig12(row.total_time),
            row.label,
            sig12(y)
        ));
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}
