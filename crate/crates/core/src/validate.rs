//! Self-checks of the numerical engine against closed forms and
//! physical invariants, run by the `validate` command.

use std::f64::consts::PI;
use std::fmt;

use crate::dynamics::{
    lindblad_channels, propagate_expm, propagate_with, PropagateOptions, Sampling, StepPolicy,
};
use crate::error::Result;
use crate::model::{
    ground_state, DensityMatrix, Envelope, LadderSystem, PulseSpec, Schedule, Shape,
};
use crate::oracle::{cascade_populations, rabi_populations};
use crate::protocol::{build_inversion_schedule_with_gap, yield_metric};

pub const ORACLE_TOL: f64 = 1e-8;
pub const EXPM_ORACLE_TOL: f64 = 1e-10;
pub const CROSS_PROPAGATOR_TOL: f64 = 1e-6;
pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const INVARIANCE_TOL: f64 = 1e-6;
pub const D_INDEPENDENCE_TOL: f64 = 1e-8;
pub const IDEAL_YIELD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        self.checks
            .iter()
            .map(|c| format!("{:<4}  {:<width$}  {}\n", c.status, c.name, c.detail))
            .collect()
    }

    fn record(&mut self, name: &'static str, result: Result<(bool, String)>) {
        let (status, detail) = match result {
            Ok((true, d)) => (CheckStatus::Pass, d),
            Ok((false, d)) => (CheckStatus::Fail, d),
            Err(e) => (CheckStatus::Fail, format!("error: {e}")),
        };
        self.checks.push(CheckOutcome {
            name,
            status,
            detail,
        });
    }

    fn skip(&mut self, name: &'static str, why: &str) {
        self.checks.push(CheckOutcome {
            name,
            status: CheckStatus::Skipped,
            detail: why.to_string(),
        });
    }
}

/// The scenario every check is run against.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: LadderSystem,
    pub durations: Vec<f64>,
    pub gap: f64,
    pub step_divisor: f64,
    pub samples: usize,
}

impl Scenario {
    fn step(&self) -> StepPolicy {
        StepPolicy::ShortestPulse(self.step_divisor)
    }

    fn opts(&self, sampling: Sampling) -> PropagateOptions {
        PropagateOptions {
            step: self.step(),
            sampling,
        }
    }

    fn final_state(
        &self,
        sys: &LadderSystem,
        shape: Shape,
        durations: &[f64],
    ) -> Result<DensityMatrix> {
        let sched = build_inversion_schedule_with_gap(sys, durations, shape, self.gap)?;
        let tr = propagate_with(
            &ground_state(sys.n_levels())?,
            &sched,
            sys,
            &self.opts(Sampling::Endpoints),
        )?;
        Ok(tr.final_state().clone())
    }
}

fn two_level() -> LadderSystem {
    LadderSystem {
        energies: vec![0.0, 1.0],
        osc_strengths: vec![1.0],
        lifetimes: vec![None],
        labels: vec![],
        channels: None,
    }
}

fn single_pulse(shape: Shape, duration: f64, area: f64) -> Result<Schedule> {
    Schedule::sequential(
        vec![PulseSpec {
            transition: 1,
            envelope: Envelope::with_area(shape, duration, area)?,
        }],
        0.0,
    )
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Decay rates of the nearest-neighbour cascade, or `None` when the
/// channel set contains anything else.
fn cascade_rates(sys: &LadderSystem) -> Option<Vec<f64>> {
    let mut rates = vec![0.0; sys.n_transitions()];
    for c in lindblad_channels(sys) {
        if c.to_level + 1 != c.from_level {
            return None;
        }
        rates[c.to_level - 1] += c.rate;
    }
    Some(rates)
}

pub fn run_checks(sc: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let sys = &sc.system;
    let ideal = sys.without_decay();

    report.record(
        "rabi oracle vs RK4",
        (|| {
            let q = two_level();
            let mut worst: f64 = 0.0;
            for (shape, theta) in [
                (Shape::Square, PI / 4.0),
                (Shape::Square, PI / 2.0),
                (Shape::RaisedCosine, PI / 3.0),
            ] {
                let sched = single_pulse(shape, 5.0, theta)?;
                let tr =
                    propagate_with(&ground_state(2)?, &sched, &q, &sc.opts(Sampling::Endpoints))?;
                let (lo, up) = rabi_populations(theta);
                worst = worst.max(max_abs_diff(&tr.final_state().populations(), &[lo, up]));
            }
            Ok((
                worst < ORACLE_TOL,
                format!("max |Δp| = {worst:.3e} (tol {ORACLE_TOL:e})"),
            ))
        })(),
    );

    report.record(
        "rabi oracle vs expm",
        (|| {
            let q = two_level();
            let mut worst: f64 = 0.0;
            for theta in [PI / 4.0, PI / 2.0] {
                let tr = propagate_expm(
                    &ground_state(2)?,
                    &single_pulse(Shape::Square, 5.0, theta)?,
                    &q,
                )?;
                let (lo, up) = rabi_populations(theta);
                worst = worst.max(max_abs_diff(&tr.final_state().populations(), &[lo, up]));
            }
            Ok((
                worst < EXPM_ORACLE_TOL,
                format!("max |Δp| = {worst:.3e} (tol {EXPM_ORACLE_TOL:e})"),
            ))
        })(),
    );

    match cascade_rates(sys) {
        None => report.skip(
            "cascade oracle",
            "channel set is not a nearest-neighbour cascade",
        ),
        Some(rates) => report.record(
            "cascade oracle",
            (|| {
                let n = sys.n_levels();
                let t = 50.0;
                let idle = single_pulse(Shape::Square, t, 0.0)?;
                let top = DensityMatrix::pure(n, n)?;
                let rk = propagate_with(&top, &idle, sys, &sc.opts(Sampling::Endpoints))?;
                let ex = propagate_expm(&top, &idle, sys)?;
                let exact = cascade_populations(&rates, t, n);
                let e_rk = max_abs_diff(&rk.final_state().populations(), &exact);
                let e_ex = max_abs_diff(&ex.final_state().populations(), &exact);
                Ok((
                    e_rk.max(e_ex) < ORACLE_TOL,
                    format!("RK4 {e_rk:.3e}, expm {e_ex:.3e} (tol {ORACLE_TOL:e})"),
                ))
            })(),
        ),
    }

    report.record(
        "RK4 vs expm (square)",
        (|| {
            let sched =
                build_inversion_schedule_with_gap(sys, &sc.durations, Shape::Square, sc.gap)?;
            let rho0 = ground_state(sys.n_levels())?;
            let rk = propagate_with(&rho0, &sched, sys, &sc.opts(Sampling::Endpoints))?;
            let ex = propagate_expm(&rho0, &sched, sys)?;
            let d = rk.final_state().frobenius_distance(ex.final_state());
            Ok((
                d < CROSS_PROPAGATOR_TOL,
                format!("‖Δρ‖_F = {d:.3e} (tol {CROSS_PROPAGATOR_TOL:e})"),
            ))
        })(),
    );

    report.record(
        "CPTP sanity",
        (|| {
            let mut worst = None;
            for shape in [Shape::Square, Shape::RaisedCosine] {
                let sched = build_inversion_schedule_with_gap(sys, &sc.durations, shape, sc.gap)?;
                // propagate_with rejects any sample outside tolerance.
                let tr = propagate_with(
                    &ground_state(sys.n_levels())?,
                    &sched,
                    sys,
                    &sc.opts(Sampling::Uniform(sc.samples)),
                )?;
                let d = tr.worst_diagnostics();
                worst = Some(worst.map_or(d, |w: crate::model::StateDiagnostics| w.worst(d)));
            }
            let d = worst.expect("two runs");
            Ok((
                true,
                format!(
                    "|Tr−1| ≤ {:.1e}, min eig ≥ {:.1e}, herm ≤ {:.1e}",
                    d.trace_error, d.min_eigenvalue, d.hermiticity_error
                ),
            ))
        })(),
    );

    report.record(
        "step convergence",
        (|| {
            let sched =
                build_inversion_schedule_with_gap(sys, &sc.durations, Shape::Square, sc.gap)?;
            let rho0 = ground_state(sys.n_levels())?;
            let coarse = propagate_with(&rho0, &sched, sys, &sc.opts(Sampling::Endpoints))?;
            let fine_opts = PropagateOptions {
                step: sc.step().refined(),
                sampling: Sampling::Endpoints,
            };
            let fine = propagate_with(&rho0, &sched, sys, &fine_opts)?;
            let d = coarse.final_state().frobenius_distance(fine.final_state());
            Ok((
                d < CONVERGENCE_TOL,
                format!("halving step moves ρ by {d:.3e} (tol {CONVERGENCE_TOL:e})"),
            ))
        })(),
    );

    report.record(
        "ideal transfer",
        (|| {
            let mut worst = f64::INFINITY;
            for shape in [Shape::Square, Shape::RaisedCosine] {
                let rho = sc.final_state(&ideal, shape, &sc.durations)?;
                worst = worst.min(rho.population(ideal.n_levels()));
            }
            Ok((
                worst >= 1.0 - IDEAL_YIELD_TOL,
                format!("min ρ_NN = {worst:.9}"),
            ))
        })(),
    );

    report.record(
        "shape/length invariance",
        (|| {
            let equal = vec![
                sc.durations.iter().sum::<f64>() / sc.durations.len() as f64;
                sc.durations.len()
            ];
            let a = sc.final_state(&ideal, Shape::Square, &sc.durations)?;
            let b = sc.final_state(&ideal, Shape::RaisedCosine, &sc.durations)?;
            let c = sc.final_state(&ideal, Shape::Square, &equal)?;
            let d = a.frobenius_distance(&b).max(a.frobenius_distance(&c));
            Ok((
                d < INVARIANCE_TOL,
                format!("max ‖Δρ‖_F = {d:.3e} (tol {INVARIANCE_TOL:e})"),
            ))
        })(),
    );

    report.record(
        "d-independence",
        (|| {
            let base = sc.final_state(sys, Shape::Square, &sc.durations)?;
            let mut worst: f64 = 0.0;
            for c in [0.4, 2.5] {
                let scaled =
                    sys.with_osc_strengths(sys.osc_strengths.iter().map(|d| d * c).collect());
                let rho = sc.final_state(&scaled, Shape::Square, &sc.durations)?;
                worst = worst.max(rho.frobenius_distance(&base));
            }
            Ok((
                worst < D_INDEPENDENCE_TOL,
                format!("max ‖Δρ‖_F = {worst:.3e} (tol {D_INDEPENDENCE_TOL:e})"),
            ))
        })(),
    );

    if lindblad_channels(sys).iter().all(|c| c.rate == 0.0) {
        report.skip("dissipative ordering", "no nonzero decay rates");
    } else {
        report.record(
            "dissipative ordering",
            (|| {
                let lossy = yield_metric(&sc.final_state(sys, Shape::Square, &sc.durations)?);
                let ideal_y =
                    yield_metric(&sc.final_state(&ideal, Shape::Square, &sc.durations)?);
                Ok((
                    lossy < ideal_y,
                    format!("yield {lossy:.6} < ideal {ideal_y:.6}"),
                ))
            })(),
        );
    }

    report
}
