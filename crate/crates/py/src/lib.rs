//! Python bindings for `ladder_inversion`.
//!
//! ```python
//! import ladder_inversion as li
//! sys = li.LadderSystem.rubidium()
//! traj = li.simulate(sys, [6.0, 6.0, 18.0])
//! print(traj.final_yield)
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use ladder_inversion as core;
use ladder_inversion::validate::{run_checks, Scenario};
use ladder_inversion::{Shape, StepPolicy};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::IntegrationFailure { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_shape(name: &str) -> PyResult<Shape> {
    name.parse::<Shape>().map_err(to_py)
}

/// An N-level ladder: energies, oscillator strengths and lifetimes.
#[pyclass(
    name = "LadderSystem",
    module = "ladder_inversion",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyLadderSystem {
    inner: core::LadderSystem,
}

#[pymethods]
impl PyLadderSystem {
    /// `lifetimes` covers levels 2..N in ns; `None` marks a stable level.
    #[new]
    #[pyo3(signature = (energies, osc_strengths, lifetimes, labels=None))]
    fn new(
        energies: Vec<f64>,
        osc_strengths: Vec<f64>,
        lifetimes: Vec<Option<f64>>,
        labels: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let inner = core::LadderSystem {
            energies,
            osc_strengths,
            lifetimes,
            labels: labels.unwrap_or_default(),
            channels: None,
        };
        inner.ensure_valid().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn rubidium() -> Self {
        Self {
            inner: core::LadderSystem::rubidium(),
        }
    }

    fn without_decay(&self) -> Self {
        Self {
            inner: self.inner.without_decay(),
        }
    }

    #[getter]
    fn n_levels(&self) -> usize {
        self.inner.n_levels()
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies.clone()
    }

    #[getter]
    fn osc_strengths(&self) -> Vec<f64> {
        self.inner.osc_strengths.clone()
    }

    #[getter]
    fn lifetimes(&self) -> Vec<Option<f64>> {
        self.inner.lifetimes.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.clone()
    }

    fn transition_frequencies(&self) -> Vec<f64> {
        self.inner.transition_frequencies()
    }

    fn __repr__(&self) -> String {
        let lifetimes: Vec<String> = self
            .inner
            .lifetimes
            .iter()
            .map(|t| t.map_or_else(|| "None".to_string(), |t| format!("{t:?}")))
            .collect();
        format!(
            "LadderSystem(energies={:?}, osc_strengths={:?}, lifetimes=[{}])",
            self.inner.energies,
            self.inner.osc_strengths,
            lifetimes.join(", ")
        )
    }
}

/// Sampled populations of one propagation.
#[pyclass(name = "Trajectory", module = "ladder_inversion", frozen)]
struct PyTrajectory {
    inner: core::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    /// One row of level populations per sample time.
    #[getter]
    fn populations(&self) -> Vec<Vec<f64>> {
        self.inner.populations().to_vec()
    }

    #[getter]
    fn final_populations(&self) -> Vec<f64> {
        self.inner.final_state().populations()
    }

    /// ρ_NN − ρ_11 at the final time.
    #[getter]
    fn final_yield(&self) -> f64 {
        core::yield_metric(self.inner.final_state())
    }

    /// Final density matrix as rows of complex numbers.
    fn final_state(&self, py: Python<'_>) -> PyResult<Vec<Vec<Py<PyAny>>>> {
        let rho = self.inner.final_state();
        let n = rho.dim();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let z = rho.matrix()[(j, k)];
                        Ok(pyo3::types::PyComplex::from_doubles(py, z.re, z.im)
                            .into_any()
                            .unbind())
                    })
                    .collect()
            })
            .collect()
    }

    /// Time-integrated population of a 1-based level, ns.
    fn occupancy(&self, level: usize) -> PyResult<f64> {
        core::occupancy(&self.inner, level).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Propagates the calibrated inversion schedule from the ground state.
#[pyfunction]
#[pyo3(signature = (system, durations, shape="square", gap=0.0, step_divisor=2000.0, samples=500))]
fn simulate(
    py: Python<'_>,
    system: &PyLadderSystem,
    durations: Vec<f64>,
    shape: &str,
    gap: f64,
    step_divisor: f64,
    samples: usize,
) -> PyResult<PyTrajectory> {
    let shape = parse_shape(shape)?;
    let sys = &system.inner;
    let sched = core::protocol::build_inversion_schedule_with_gap(sys, &durations, shape, gap)
        .map_err(to_py)?;
    let opts = core::PropagateOptions {
        step: StepPolicy::ShortestPulse(step_divisor),
        sampling: core::Sampling::Uniform(samples),
    };
    let rho0 = core::ground_state(sys.n_levels()).map_err(to_py)?;
    let inner = py
        .detach(|| core::propagate_with(&rho0, &sched, sys, &opts))
        .map_err(to_py)?;
    Ok(PyTrajectory { inner })
}

/// Exact propagation of a square-pulse schedule by matrix exponential.
#[pyfunction]
#[pyo3(signature = (system, durations, gap=0.0))]
fn simulate_exact(
    system: &PyLadderSystem,
    durations: Vec<f64>,
    gap: f64,
) -> PyResult<PyTrajectory> {
    let sys = &system.inner;
    let sched =
        core::protocol::build_inversion_schedule_with_gap(sys, &durations, Shape::Square, gap)
            .map_err(to_py)?;
    let rho0 = core::ground_state(sys.n_levels()).map_err(to_py)?;
    let inner = core::propagate_expm(&rho0, &sched, sys).map_err(to_py)?;
    Ok(PyTrajectory { inner })
}

#[pyfunction]
fn ratios_to_durations(total_time: f64, ratios: Vec<f64>) -> PyResult<Vec<f64>> {
    core::ratios_to_durations(total_time, &ratios).map_err(to_py)
}

/// Pulse area that completes one transition of oscillator strength `d`.
#[pyfunction]
fn required_area(d: f64) -> PyResult<f64> {
    core::required_area(d).map_err(to_py)
}

/// (lower, upper) populations after a rotation by `theta`.
#[pyfunction]
fn rabi_populations(theta: f64) -> (f64, f64) {
    core::rabi_populations(theta)
}

/// Populations of a free decay chain started in `start_level` (1-based).
#[pyfunction]
fn cascade_populations(rates: Vec<f64>, t: f64, start_level: usize) -> PyResult<Vec<f64>> {
    if !(1..=rates.len() + 1).contains(&start_level) {
        return Err(PyValueError::new_err(format!(
            "start_level must be in 1..={}",
            rates.len() + 1
        )));
    }
    if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || !(t >= 0.0) {
        return Err(PyValueError::new_err("rates and t must be finite and >= 0"));
    }
    Ok(core::cascade_populations(&rates, t, start_level))
}

#[pyfunction]
fn check_ratio_heuristic(durations: Vec<f64>) -> PyResult<bool> {
    core::check_ratio_heuristic(&durations).map_err(to_py)
}

/// Every rule the system breaks, as readable strings.
#[pyfunction]
fn validate_system(system: &PyLadderSystem) -> Vec<String> {
    core::validate_system(&system.inner)
        .iter()
        .map(ToString::to_string)
        .collect()
}

/// Final yield over a (total time × ratio set) grid.
///
/// Returns `(total_time, ratio_label, yield)` rows; failed points carry
/// `None`.
#[pyfunction]
#[pyo3(signature = (system, total_times=None, ratio_sets=None, shape="square", step_divisor=2000.0, threads=None))]
fn sweep(
    py: Python<'_>,
    system: &PyLadderSystem,
    total_times: Option<Vec<f64>>,
    ratio_sets: Option<Vec<Vec<f64>>>,
    shape: &str,
    step_divisor: f64,
    threads: Option<usize>,
) -> PyResult<Vec<(f64, String, Option<f64>)>> {
    let sys = &system.inner;
    let shape = parse_shape(shape)?;
    let default = core::SweepGrid::default_for(sys, shape);
    let grid = core::SweepGrid::new(
        total_times.unwrap_or(default.total_times),
        ratio_sets.unwrap_or(default.ratio_sets),
        shape,
    )
    .map_err(to_py)?;
    let step = StepPolicy::ShortestPulse(step_divisor);
    let result = py.detach(|| match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PyValueError::new_err(e.to_string()))
            .and_then(|pool| {
                pool.install(|| core::run_sweep(sys, &grid, step))
                    .map_err(to_py)
            }),
        None => core::run_sweep(sys, &grid, step).map_err(to_py),
    })?;
    Ok(result
        .rows
        .iter()
        .map(|r| (r.total_time, r.label.clone(), r.final_yield()))
        .collect())
}

/// Searches normalized pulse ratios for the best yield at `total_time`.
#[pyfunction]
#[pyo3(signature = (system, total_time, shape="square", seeds=None, max_iterations=200, tolerance=1e-4, min_ratio=0.01))]
#[allow(clippy::too_many_arguments)]
fn optimize_ratios<'py>(
    py: Python<'py>,
    system: &PyLadderSystem,
    total_time: f64,
    shape: &str,
    seeds: Option<Vec<Vec<f64>>>,
    max_iterations: usize,
    tolerance: f64,
    min_ratio: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let shape = parse_shape(shape)?;
    let opts = core::OptimizeOptions {
        seeds: seeds.unwrap_or_default(),
        max_iterations,
        tolerance,
        min_ratio,
        ..core::OptimizeOptions::default()
    };
    let sys = &system.inner;
    let out = py
        .detach(|| core::optimize_ratios(sys, total_time, shape, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("ratios", out.ratios)?;
    d.set_item("yield", out.best_yield)?;
    d.set_item("iterations", out.iterations)?;
    d.set_item("evaluations", out.evaluations)?;
    d.set_item("converged", out.converged)?;
    Ok(d)
}

/// Runs the oracle and invariant checks; returns `(passed, table)`.
#[pyfunction]
#[pyo3(signature = (system, durations, gap=0.0, step_divisor=2000.0, samples=500))]
fn run_validation(
    py: Python<'_>,
    system: &PyLadderSystem,
    durations: Vec<f64>,
    gap: f64,
    step_divisor: f64,
    samples: usize,
) -> (bool, String) {
    let scenario = Scenario {
        system: system.inner.clone(),
        durations,
        gap,
        step_divisor,
        samples,
    };
    let report = py.detach(|| run_checks(&scenario));
    (report.passed(), report.table())
}

#[pymodule]
#[pyo3(name = "ladder_inversion")]
pub fn ladder_inversion_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyLadderSystem>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_exact, m)?)?;
    m.add_function(wrap_pyfunction!(ratios_to_durations, m)?)?;
    m.add_function(wrap_pyfunction!(required_area, m)?)?;
    m.add_function(wrap_pyfunction!(rabi_populations, m)?)?;
    m.add_function(wrap_pyfunction!(cascade_populations, m)?)?;
    m.add_function(wrap_pyfunction!(check_ratio_heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(validate_system, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(run_validation, m)?)?;
    Ok(())
}
