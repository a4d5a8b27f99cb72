//! Ladder systems, pulse envelopes, schedules and density matrices.
//!
//! Units throughout: time in ns, energies and field amplitudes in rad/ns,
//! with ħ = 1. Level and transition indices are 1-based to match the usual
//! physics labelling: transition `n` couples level `n` to level `n + 1`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::DecayChannel;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerances a freshly constructed [`DensityMatrix`] must meet.
pub const STATE_HERMITICITY_TOL: f64 = 1e-12;
pub const STATE_TRACE_TOL: f64 = 1e-9;
pub const STATE_NEGATIVITY_TOL: f64 = 1e-9;

/// A single failed rule found by [`validate_system`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: &str, rule: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// An N-level ladder with nearest-neighbour dipole couplings.
///
/// `osc_strengths[k]` and `lifetimes[k]` belong to transition `k + 1`
/// and level `k + 2` respectively; the ground state never decays. A
/// lifetime of `None` means the level is stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSystem {
    pub energies: Vec<f64>,
    pub osc_strengths: Vec<f64>,
    pub lifetimes: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    /// Explicit decay channels replacing the nearest-neighbour cascade
    /// derived from `lifetimes`. Used to add branching decays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<DecayChannel>>,
}

impl LadderSystem {
    /// Four-level Rubidium ladder 5S1/2 → 5P3/2 → 4D5/2 → 6P3/2.
    ///
    /// The lifetimes keep the ratios that matter for the inversion
    /// problem: τ₂ is just under a third of τ₃ and about a quarter of τ₄.
    /// Energies are rotating-frame placeholders chosen only to keep the
    /// transition frequencies distinct.
    pub fn rubidium() -> Self {
        Self {
            energies: vec![0.0, 1.0, 2.1, 3.3],
            osc_strengths: vec![1.0; 3],
            lifetimes: vec![Some(26.2), Some(83.0), Some(112.0)],
            labels: ["5S_1/2", "5P_3/2", "4D_5/2", "6P_3/2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            channels: None,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.n_levels().saturating_sub(1)
    }

    /// μₙ = Eₙ₊₁ − Eₙ for n = 1..N−1.
    pub fn transition_frequencies(&self) -> Vec<f64> {
        self.energies.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Oscillator strength of transition `n` (1-based).
    pub fn osc_strength(&self, transition: usize) -> Option<f64> {
        transition
            .checked_sub(1)
            .and_then(|k| self.osc_strengths.get(k))
            .copied()
    }

    pub fn label(&self, level: usize) -> String {
        level
            .checked_sub(1)
            .and_then(|k| self.labels.get(k))
            .cloned()
            .unwrap_or_else(|| format!("|{level}>"))
    }

    /// Returns `Err(InvalidSystem)` listing every violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_system(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSystem(violations))
        }
    }

    /// Same ladder with every level stable and no channel override.
    pub fn without_decay(&self) -> Self {
        Self {
            lifetimes: vec![None; self.lifetimes.len()],
            channels: None,
            ..self.clone()
        }
    }

    pub fn with_osc_strengths(&self, osc_strengths: Vec<f64>) -> Self {
        Self {
            osc_strengths,
            ..self.clone()
        }
    }

    pub fn with_channels(&self, channels: Vec<DecayChannel>) -> Self {
        Self {
            channels: Some(channels),
            ..self.clone()
        }
    }

    /// Lifetimes as finite values, or `None` if any level is stable.
    pub fn finite_lifetimes(&self) -> Option<Vec<f64>> {
        self.lifetimes
            .iter()
            .map(|t| t.filter(|t| t.is_finite()))
            .collect()
    }
}

/// Checks every [`LadderSystem`] invariant and lists the failures.
pub fn validate_system(sys: &LadderSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = sys.n_levels();
    if n < 2 {
        out.push(Violation::new("n_levels", format!("must be >= 2, got {n}")));
    }
    if let Some(k) = sys.energies.iter().position(|e| !e.is_finite()) {
        out.push(Violation::new(
            "energies",
            format!("E_{} must be finite", k + 1),
        ));
    }

    let mu = sys.transition_frequencies();
    for (k, m) in mu.iter().enumerate() {
        if !(*m > 0.0) {
            out.push(Violation::new(
                "energies",
                format!(
                    "μ_{} = E_{} − E_{} must be > 0, got {m}",
                    k + 1,
                    k + 2,
                    k + 1
                ),
            ));
        }
    }
    let scale = mu.iter().fold(0.0_f64, |a, m| a.max(m.abs()));
    'outer: for i in 0..mu.len() {
        for j in i + 1..mu.len() {
            if (mu[i] - mu[j]).abs() <= 1e-12 * scale {
                out.push(Violation::new(
                    "energies",
                    format!(
                        "μ not pairwise distinct (μ_{} = μ_{} = {})",
                        i + 1,
                        j + 1,
                        mu[i]
                    ),
                ));
                break 'outer;
            }
        }
    }

    let expected = n.saturating_sub(1);
    if sys.osc_strengths.len() != expected {
        out.push(Violation::new(
            "osc_strengths",
            format!(
                "expected {expected} entries, got {}",
                sys.osc_strengths.len()
            ),
        ));
    }
    for (k, d) in sys.osc_strengths.iter().enumerate() {
        if !(*d > 0.0 && d.is_finite()) {
            out.push(Violation::new(
                "osc_strengths",
                format!("osc_strengths must be > 0 (d_{} = {d})", k + 1),
            ));
        }
    }

    if sys.lifetimes.len() != expected {
        out.push(Violation::new(
            "lifetimes",
            format!("expected {expected} entries, got {}", sys.lifetimes.len()),
        ));
    }
    for (k, tau) in sys.lifetimes.iter().enumerate() {
        if let Some(tau) = tau {
            if !(*tau > 0.0) {
                out.push(Violation::new(
                    "lifetimes",
                    format!("lifetimes must be > 0 (τ_{} = {tau})", k + 2),
                ));
            }
        }
    }

    if !sys.labels.is_empty() && sys.labels.len() != n {
        out.push(Violation::new(
            "labels",
            format!("expected 0 or {n} labels, got {}", sys.labels.len()),
        ));
    }

    if let Some(channels) = &sys.channels {
        for c in channels {
            if c.from_level < 2 || c.from_level > n || c.to_level < 1 || c.to_level >= c.from_level
            {
                out.push(Violation::new(
                    "channels",
                    format!(
                        "channel {}→{} must lower the level within 1..={n}",
                        c.from_level, c.to_level
                    ),
                ));
            }
            if !(c.rate >= 0.0 && c.rate.is_finite()) {
                out.push(Violation::new(
                    "channels",
                    format!("rate must be finite and >= 0, got {}", c.rate),
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Square,
    /// f(t) = a·sin²(πt/Δt)
    RaisedCosine,
}

impl Shape {
    /// Ratio area / (amplitude × duration).
    pub fn area_factor(self) -> f64 {
        match self {
            Shape::Square => 1.0,
            Shape::RaisedCosine => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::RaisedCosine => "raised_cosine",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Shape::Square),
            "raised_cosine" => Ok(Shape::RaisedCosine),
            other => Err(Error::domain(format!("unknown envelope shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    shape: Shape,
    duration: f64,
    amplitude: f64,
}

impl Envelope {
    pub fn new(shape: Shape, duration: f64, amplitude: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::domain(format!(
                "envelope duration must be > 0, got {duration}"
            )));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::domain(format!(
                "envelope amplitude must be >= 0, got {amplitude}"
            )));
        }
        Ok(Self {
            shape,
            duration,
            amplitude,
        })
    }

    /// Envelope whose time integral equals `area`.
    pub fn with_area(shape: Shape, duration: f64, area: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::domain(format!(
                "envelope duration must be > 0, got {duration}"
            )));
        }
        Self::new(shape, duration, area / (shape.area_factor() * duration))
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn area(&self) -> f64 {
        self.amplitude * self.duration * self.shape.area_factor()
    }

    /// Envelope value at time `t` measured from the pulse start. Zero
    /// outside `[0, duration]`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        match self.shape {
            Shape::Square => self.amplitude,
            Shape::RaisedCosine => {
                let s = (PI * t / self.duration).sin();
                self.amplitude * s * s
            }
        }
    }
}

/// A resonant pulse on transition `transition` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub transition: usize,
    pub envelope: Envelope,
}

impl PulseSpec {
    pub fn check_against(&self, sys: &LadderSystem) -> Result<()> {
        if self.transition == 0 || self.transition > sys.n_transitions() {
            return Err(Error::domain(format!(
                "pulse transition {} is outside 1..={}",
                self.transition,
                sys.n_transitions()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledPulse {
    pub start: f64,
    pub pulse: PulseSpec,
}

impl ScheduledPulse {
    pub fn end(&self) -> f64 {
        self.start + self.pulse.envelope.duration()
    }
}

/// An ordered, non-overlapping pulse train starting at t = 0 and ending
/// with the last pulse at `total_time`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pulses: Vec<ScheduledPulse>,
    total_time: f64,
}

impl Schedule {
    pub fn empty() -> Self {
        Self {
            pulses: Vec::new(),
            total_time: 0.0,
        }
    }

    /// Places `pulses` back to back with `gap` ns of free evolution
    /// between consecutive pulses.
    pub fn sequential(pulses: Vec<PulseSpec>, gap: f64) -> Result<Self> {
        if !(gap >= 0.0 && gap.is_finite()) {
            return Err(Error::domain(format!("gap must be >= 0, got {gap}")));
        }
        let mut t = 0.0;
        let mut placed = Vec::with_capacity(pulses.len());
        for (k, pulse) in pulses.into_iter().enumerate() {
            if k > 0 {
                t += gap;
            }
            placed.push(ScheduledPulse { start: t, pulse });
            t += pulse.envelope.duration();
        }
        Ok(Self {
            pulses: placed,
            total_time: t,
        })
    }

    /// Builds a schedule from explicit start times.
    pub fn new(pulses: Vec<ScheduledPulse>) -> Result<Self> {
        let Some(first) = pulses.first() else {
            return Ok(Self::empty());
        };
        if first.start != 0.0 {
            return Err(Error::domain("first pulse must start at t = 0"));
        }
        for w in pulses.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::domain(
                    "pulse start times must be strictly increasing",
                ));
            }
            let overlap = w[0].end() - w[1].start;
            if overlap > 1e-12 * w[0].end().max(1.0) {
                return Err(Error::domain(format!(
                    "pulse starting at {} ns overlaps the previous pulse",
                    w[1].start
                )));
            }
        }
        let total_time = pulses.last().map(|p| p.end()).unwrap_or(0.0);
        Ok(Self { pulses, total_time })
    }

    pub fn pulses(&self) -> &[ScheduledPulse] {
        &self.pulses
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.pulses
            .iter()
            .map(|p| p.pulse.envelope.duration())
            .collect()
    }

    pub fn shortest_duration(&self) -> Option<f64> {
        self.pulses
            .iter()
            .map(|p| p.pulse.envelope.duration())
            .reduce(f64::min)
    }

    pub fn check_against(&self, sys: &LadderSystem) -> Result<()> {
        self.pulses
            .iter()
            .try_for_each(|p| p.pulse.check_against(sys))
    }
}

/// Hermiticity, trace and positivity measurements of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    /// |Tr ρ − 1|
    pub trace_error: f64,
    /// max |ρ − ρ†| entrywise
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub fn within(&self, trace_tol: f64, herm_tol: f64, negativity_tol: f64) -> bool {
        self.trace_error < trace_tol
            && self.hermiticity_error < herm_tol
            && self.min_eigenvalue >= -negativity_tol
    }

    /// Elementwise worst case of two diagnostics.
    pub fn worst(self, other: Self) -> Self {
        Self {
            trace_error: self.trace_error.max(other.trace_error),
            hermiticity_error: self.hermiticity_error.max(other.hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }
}

/// N×N density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates the state invariants at construction tolerances.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let rho = Self(matrix);
        let diag = rho.diagnostics();
        if diag.hermiticity_error > STATE_HERMITICITY_TOL {
            return Err(Error::domain(format!(
                "density matrix is not Hermitian (deviation {:e})",
                diag.hermiticity_error
            )));
        }
        if diag.trace_error > STATE_TRACE_TOL {
            return Err(Error::domain(format!(
                "density matrix trace deviates from 1 by {:e}",
                diag.trace_error
            )));
        }
        if diag.min_eigenvalue < -STATE_NEGATIVITY_TOL {
            return Err(Error::domain(format!(
                "density matrix has negative eigenvalue {:e}",
                diag.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    /// Wraps a propagated matrix without re-validating it.
    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    /// Pure state |level⟩⟨level| (1-based).
    pub fn pure(n: usize, level: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        if level == 0 || level > n {
            return Err(Error::domain(format!("level {level} outside 1..={n}")));
        }
        let mut m = CMatrix::zeros(n, n);
        m[(level - 1, level - 1)] = Complex64::new(1.0, 0.0);
        Ok(Self(m))
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Self(
            CMatrix::identity(n, n) / Complex64::new(n as f64, 0.0),
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Entry ρ_{jk} with 1-based indices.
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.0[(j - 1, k - 1)]
    }

    /// ρ_nn (real part) for a 1-based level.
    pub fn population(&self, level: usize) -> f64 {
        self.0[(level - 1, level - 1)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.0[(k, k)].re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        let m = &self.0;
        let n = m.nrows();
        let mut herm: f64 = 0.0;
        for j in 0..n {
            for k in j..n {
                herm = herm.max((m[(j, k)] - m[(k, j)].conj()).norm());
            }
        }
        // Eigenvalues of the Hermitian part; any anti-Hermitian residue is
        // reported separately above.
        let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let min_eigenvalue = h
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        StateDiagnostics {
            trace_error: (m.trace() - Complex64::new(1.0, 0.0)).norm(),
            hermiticity_error: herm,
            min_eigenvalue,
        }
    }
}

/// |1⟩⟨1| for an N-level ladder.
pub fn ground_state(n: usize) -> Result<DensityMatrix> {
    DensityMatrix::pure(n, 1)
}

/// Splits `total_time` into pulse durations proportional to `ratios`.
pub fn ratios_to_durations(total_time: f64, ratios: &[f64]) -> Result<Vec<f64>> {
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::domain(format!(
            "total time must be > 0, got {total_time}"
        )));
    }
    if ratios.is_empty() {
        return Err(Error::domain("ratio list is empty"));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::domain(format!("ratios must be > 0, got {r}")));
    }
    let sum: f64 = ratios.iter().sum();
    Ok(ratios.iter().map(|r| total_time * r / sum).collect())
}
