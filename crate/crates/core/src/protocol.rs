//! The sequential inversion protocol and its figures of merit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{DensityMatrix, Envelope, LadderSystem, PulseSpec, Schedule, Shape};

/// Pulse area π/(2d) that fully transfers population across a transition
/// of oscillator strength `d`.
pub fn required_area(d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain(format!(
            "oscillator strength must be > 0, got {d}"
        )));
    }
    Ok(PI / (2.0 * d))
}

/// One calibrated pulse per transition, back to back, in ladder order.
pub fn build_inversion_schedule(
    sys: &LadderSystem,
    durations: &[f64],
    shape: Shape,
) -> Result<Schedule> {
    build_inversion_schedule_with_gap(sys, durations, shape, 0.0)
}

/// As [`build_inversion_schedule`], with `gap` ns of free evolution
/// between pulses.
pub fn build_inversion_schedule_with_gap(
    sys: &LadderSystem,
    durations: &[f64],
    shape: Shape,
    gap: f64,
) -> Result<Schedule> {
    sys.ensure_valid()?;
    if durations.len() != sys.n_transitions() {
        return Err(Error::domain(format!(
            "expected {} durations for a {}-level ladder, got {}",
            sys.n_transitions(),
            sys.n_levels(),
            durations.len()
        )));
    }
    let pulses = durations
        .iter()
        .zip(&sys.osc_strengths)
        .enumerate()
        .map(|(k, (&dt, &d))| {
            Ok(PulseSpec {
                transition: k + 1,
                envelope: Envelope::with_area(shape, dt, required_area(d)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Schedule::sequential(pulses, gap)
}

/// ρ_NN − ρ₁₁.
pub fn yield_metric(rho: &DensityMatrix) -> f64 {
    rho.population(rho.dim()) - rho.population(1)
}

/// Time spent in `level` (1-based): trapezoidal ∫ρ_nn dt over the
/// trajectory samples, in ns.
pub fn occupancy(traj: &Trajectory, level: usize) -> Result<f64> {
    let n = traj.final_state().dim();
    if level == 0 || level > n {
        return Err(Error::domain(format!("level {level} outside 1..={n}")));
    }
    let t = traj.times();
    let p = traj.populations();
    Ok((1..t.len())
        .map(|i| 0.5 * (t[i] - t[i - 1]) * (p[i][level - 1] + p[i - 1][level - 1]))
        .sum())
}

/// For the four-level chain: Δt₂+Δt₃ > 3(Δt₁+Δt₂).
pub fn check_ratio_heuristic(durations: &[f64]) -> Result<bool> {
    match durations {
        [t1, t2, t3] => Ok(t2 + t3 > 3.0 * (t1 + t2)),
        _ => Err(Error::domain(format!(
            "ratio heuristic needs exactly 3 durations, got {}",
            durations.len()
        ))),
    }
}

/// Final yield, populations and per-level occupancy of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldReport {
    #[serde(rename = "yield")]
    pub final_yield: f64,
    #[serde(rename = "populations")]
    pub final_populations: Vec<f64>,
    #[serde(rename = "occupancy_ns")]
    pub occupancy: Vec<f64>,
}

impl YieldReport {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let rho = traj.final_state();
        let occupancy = (1..=rho.dim())
            .map(|n| occupancy(traj, n).expect("level within range"))
            .collect();
        Self {
            final_yield: yield_metric(rho),
            final_populations: rho.populations(),
            occupancy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagate_with, PropagateOptions, Sampling, StepPolicy};
    use crate::model::ground_state;

    #[test]
    fn areas() {
        assert_eq!(required_area(1.0).unwrap(), PI / 2.0);
        assert_eq!(required_area(0.5).unwrap(), PI);
        assert_eq!(required_area(2.0).unwrap(), PI / 4.0);
        assert!(required_area(0.0).is_err());
        assert!(required_area(-1.0).is_err());
    }

    /// Simpson's rule over the envelope, independent of `Envelope::area`.
    fn simpson_area(e: &Envelope) -> f64 {
        let m = 2000;
        let h = e.duration() / m as f64;
        let mut s = e.value(0.0) + e.value(e.duration());
        for i in 1..m {
            s += e.value(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn rubidium_fig3_amplitudes() {
        let sys = LadderSystem::rubidium();
        let s = build_inversion_schedule(&sys, &[6.0, 6.0, 18.0], Shape::Square).unwrap();
        let amps: Vec<f64> = s
            .pulses()
            .iter()
            .map(|p| p.pulse.envelope.amplitude())
            .collect();
        let expect = [PI / 12.0, PI / 12.0, PI / 36.0];
        for (a, e) in amps.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        for p in s.pulses() {
            assert!((simpson_area(&p.pulse.envelope) - PI / 2.0).abs() < 1e-10);
        }
        assert_eq!(s.total_time(), 30.0);
        assert_eq!(
            s.pulses()
                .iter()
                .map(|p| p.pulse.transition)
                .collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn raised_cosine_calibration() {
        let sys = LadderSystem::rubidium().with_osc_strengths(vec![0.5, 1.0, 2.0]);
        let s = build_inversion_schedule(&sys, &[3.0, 5.0, 7.0], Shape::RaisedCosine).unwrap();
        for (p, d) in s.pulses().iter().zip([0.5, 1.0, 2.0]) {
            let e = &p.pulse.envelope;
            assert!((e.amplitude() - PI / (d * e.duration())).abs() < 1e-15);
            let a = simpson_area(e);
            assert!((a - PI / (2.0 * d)).abs() / a < 1e-10);
        }
    }

    #[test]
    fn two_level_schedule() {
        let sys = LadderSystem {
            energies: vec![0.0, 1.0],
            osc_strengths: vec![1.0],
            lifetimes: vec![None],
            labels: vec![],
            channels: None,
        };
        let s = build_inversion_schedule(&sys, &[10.0], Shape::Square).unwrap();
        assert_eq!(s.pulses().len(), 1);
        assert!((s.pulses()[0].pulse.envelope.amplitude() - PI / 20.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_duration_count() {
        let r = build_inversion_schedule(&LadderSystem::rubidium(), &[1.0, 2.0], Shape::Square);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn yields() {
        assert_eq!(yield_metric(&ground_state(4).unwrap()), -1.0);
        assert_eq!(yield_metric(&DensityMatrix::pure(4, 4).unwrap()), 1.0);
        assert_eq!(
            yield_metric(&DensityMatrix::maximally_mixed(4).unwrap()),
            0.0
        );
    }

    #[test]
    fn heuristic() {
        assert!(!check_ratio_heuristic(&[6.0, 6.0, 18.0]).unwrap());
        assert!(check_ratio_heuristic(&[2.0, 2.0, 26.0]).unwrap());
        assert!(!check_ratio_heuristic(&[10.0, 10.0, 10.0]).unwrap());
        assert!(check_ratio_heuristic(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn occupancy_of_idle_ground_state() {
        let sys = LadderSystem::rubidium();
        let idle = Schedule::sequential(
            vec![PulseSpec {
                transition: 1,
                envelope: Envelope::new(Shape::Square, 10.0, 0.0).unwrap(),
            }],
            0.0,
        )
        .unwrap();
        let opts = PropagateOptions {
            step: StepPolicy::Fixed(0.01),
            sampling: Sampling::Uniform(101),
        };
        let tr = propagate_with(&ground_state(4).unwrap(), &idle, &sys, &opts).unwrap();
        assert!((occupancy(&tr, 1).unwrap() - 10.0).abs() < 1e-12);
        assert!(occupancy(&tr, 5).is_err());
        assert!(occupancy(&tr, 0).is_err());

        let report = YieldReport::from_trajectory(&tr);
        let json = serde_json::to_value(&report).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 3);
        for k in ["yield", "populations", "occupancy_ns"] {
            assert!(json.get(k).is_some(), "missing {k}");
        }
    }
}
