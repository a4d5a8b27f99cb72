//! Master-equation dynamics in the rotating frame.
//!
//! The generator is
//!
//! ```text
//! dρ/dt = −i[H(t), ρ] + Σ_k Γ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})
//! ```
//!
//! with H(t) = f(t)·dₙ·(|n⟩⟨n+1| + |n+1⟩⟨n|) while pulse n is on, and
//! L_k = |to⟩⟨from| for each decay channel. Two propagators are provided:
//! a fixed-step classical RK4 integrator for arbitrary envelopes and an
//! exact piecewise Liouvillian exponential for square pulses. The second
//! exists to cross-check the first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CMatrix, DensityMatrix, Envelope, LadderSystem, PulseSpec, Schedule, Shape, StateDiagnostics,
};

/// Sampled states must stay within these bounds during propagation.
pub const TRACE_DRIFT_TOL: f64 = 1e-7;
pub const NEGATIVITY_TOL: f64 = 1e-7;
pub const HERMITICITY_TOL: f64 = 1e-9;

/// Default divisor applied to the shortest pulse to get the RK4 step.
pub const DEFAULT_STEP_DIVISOR: f64 = 2000.0;
/// Default number of trajectory samples per schedule.
pub const DEFAULT_SAMPLES: usize = 500;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Spontaneous emission |from⟩ → |to⟩ at rate Γ (1/ns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    #[serde(rename = "from")]
    pub from_level: usize,
    #[serde(rename = "to")]
    pub to_level: usize,
    pub rate: f64,
}

/// Decay channels of `sys`.
///
/// Without an explicit override this is the nearest-neighbour cascade,
/// one channel n+1 → n with Γ = 1/τₙ₊₁ per level of finite lifetime.
pub fn lindblad_channels(sys: &LadderSystem) -> Vec<DecayChannel> {
    if let Some(channels) = &sys.channels {
        return channels.clone();
    }
    sys.lifetimes
        .iter()
        .enumerate()
        .filter_map(|(k, tau)| {
            let tau = (*tau)?;
            tau.is_finite().then(|| DecayChannel {
                from_level: k + 2,
                to_level: k + 1,
                rate: 1.0 / tau,
            })
        })
        .collect()
}

/// Rotating-frame Hamiltonian of `pulse` at time `t` after its start.
pub fn rwa_hamiltonian(sys: &LadderSystem, pulse: &PulseSpec, t: f64) -> Result<CMatrix> {
    pulse.check_against(sys)?;
    let duration = pulse.envelope.duration();
    if !(0.0..=duration).contains(&t) {
        return Err(Error::OutsideSupport { t, duration });
    }
    let n = sys.n_levels();
    let d = sys.osc_strengths[pulse.transition - 1];
    let g = Complex64::new(pulse.envelope.value(t) * d, 0.0);
    let mut h = CMatrix::zeros(n, n);
    h[(pulse.transition - 1, pulse.transition)] = g;
    h[(pulse.transition, pulse.transition - 1)] = g;
    Ok(h)
}

/// Right-hand side of the Lindblad master equation.
pub fn master_rhs(rho: &DensityMatrix, h: &CMatrix, channels: &[DecayChannel]) -> Result<CMatrix> {
    let n = rho.dim();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.nrows(),
        });
    }
    check_channels(channels, n)?;
    let mut out = CMatrix::zeros(n, n);
    commutator_dense(n, h.as_slice(), rho.matrix().as_slice(), out.as_mut_slice());
    dissipate(n, channels, rho.matrix().as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Liouvillian superoperator acting on column-stacked vec(ρ).
pub fn liouvillian(h: &CMatrix, channels: &[DecayChannel]) -> Result<CMatrix> {
    let n = h.nrows();
    check_channels(channels, n)?;
    let id = CMatrix::identity(n, n);
    let mi = Complex64::new(0.0, -1.0);
    // vec(AXB) = (Bᵀ ⊗ A) vec(X)
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * mi;
    for c in channels {
        let mut op = CMatrix::zeros(n, n);
        op[(c.to_level - 1, c.from_level - 1)] = Complex64::new(1.0, 0.0);
        let ldl = op.adjoint() * &op;
        let g = Complex64::new(c.rate, 0.0);
        let half = Complex64::new(0.5, 0.0);
        l += (op.conjugate().kronecker(&op)
            - id.kronecker(&ldl) * half
            - ldl.transpose().kronecker(&id) * half)
            * g;
    }
    Ok(l)
}

fn check_channels(channels: &[DecayChannel], n: usize) -> Result<()> {
    for c in channels {
        if c.from_level == 0 || c.from_level > n || c.to_level == 0 || c.to_level > n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.from_level.max(c.to_level),
            });
        }
    }
    Ok(())
}

// Column-major kernels on flat N×N buffers; index (r, c) ↦ c·n + r.

fn commutator_dense(n: usize, h: &[Complex64], rho: &[Complex64], out: &mut [Complex64]) {
    for k in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for m in 0..n {
                acc += h[m * n + j] * rho[k * n + m] - rho[m * n + j] * h[k * n + m];
            }
            // −i·acc
            out[k * n + j] = Complex64::new(acc.im, -acc.re);
        }
    }
}

/// −i[H, ρ] for H = g(|p⟩⟨q| + |q⟩⟨p|), g real.
fn commutator_coupling(
    n: usize,
    p: usize,
    q: usize,
    g: f64,
    rho: &[Complex64],
    out: &mut [Complex64],
) {
    out.fill(ZERO);
    if g == 0.0 {
        return;
    }
    let g = Complex64::new(0.0, -g);
    // Hρ: row p ← g·row q of ρ, row q ← g·row p of ρ.
    for k in 0..n {
        out[k * n + p] += g * rho[k * n + q];
        out[k * n + q] += g * rho[k * n + p];
    }
    // ρH: column p ← g·column q of ρ, column q ← g·column p of ρ.
    for j in 0..n {
        out[p * n + j] -= g * rho[q * n + j];
        out[q * n + j] -= g * rho[p * n + j];
    }
}

fn dissipate(n: usize, channels: &[DecayChannel], rho: &[Complex64], out: &mut [Complex64]) {
    for c in channels {
        if c.rate == 0.0 {
            continue;
        }
        let a = c.to_level - 1;
        let b = c.from_level - 1;
        let half = 0.5 * c.rate;
        out[a * n + a] += rho[b * n + b] * c.rate;
        for m in 0..n {
            out[m * n + b] -= rho[m * n + b] * half;
            out[b * n + m] -= rho[b * n + m] * half;
        }
    }
}

/// How the RK4 step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum StepPolicy {
    /// Fixed step in ns.
    Fixed(f64),
    /// Step = (shortest pulse duration) / divisor, used everywhere.
    ShortestPulse(f64),
    /// Each pulse or gap gets its own step = (its duration) / divisor.
    PerSegment(f64),
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::ShortestPulse(DEFAULT_STEP_DIVISOR)
    }
}

impl StepPolicy {
    fn validate(&self) -> Result<()> {
        let v = match *self {
            StepPolicy::Fixed(v) | StepPolicy::ShortestPulse(v) | StepPolicy::PerSegment(v) => v,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "step parameter must be > 0, got {v}"
            )))
        }
    }

    /// Same policy with the step halved.
    pub fn refined(self) -> Self {
        match self {
            StepPolicy::Fixed(h) => StepPolicy::Fixed(h / 2.0),
            StepPolicy::ShortestPulse(k) => StepPolicy::ShortestPulse(k * 2.0),
            StepPolicy::PerSegment(k) => StepPolicy::PerSegment(k * 2.0),
        }
    }

    fn step_for(&self, schedule: &Schedule, segment_len: f64) -> f64 {
        match *self {
            StepPolicy::Fixed(h) => h,
            StepPolicy::ShortestPulse(k) => schedule.shortest_duration().unwrap_or(segment_len) / k,
            StepPolicy::PerSegment(k) => segment_len / k,
        }
    }
}

/// Where trajectory samples are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Only t = 0 and t = T_f.
    Endpoints,
    /// Every `every` ns from t = 0, plus T_f.
    Every(f64),
    /// `count` uniformly spaced samples including both endpoints.
    Uniform(usize),
}

/// Time-sampled states of one propagation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    populations: Vec<Vec<f64>>,
}

impl Trajectory {
    fn new(times: Vec<f64>, states: Vec<DensityMatrix>) -> Self {
        let populations = states.iter().map(DensityMatrix::populations).collect();
        Self {
            times,
            states,
            populations,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// ρ_nn per sample, outer index = sample.
    pub fn populations(&self) -> &[Vec<f64>] {
        &self.populations
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("trajectory holds at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory holds at least one sample")
    }

    /// Worst-case diagnostics across all samples.
    pub fn worst_diagnostics(&self) -> StateDiagnostics {
        self.states
            .iter()
            .map(DensityMatrix::diagnostics)
            .reduce(StateDiagnostics::worst)
            .expect("trajectory holds at least one sample")
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    end: f64,
    drive: Option<Drive>,
}

#[derive(Debug, Clone, Copy)]
struct Drive {
    lower: usize,
    envelope: Envelope,
    strength: f64,
}

impl Drive {
    fn coupling(&self, t_local: f64) -> f64 {
        // Stage times can round a hair outside the segment.
        let t = t_local.clamp(0.0, self.envelope.duration());
        self.strength * self.envelope.value(t)
    }
}

fn segments(schedule: &Schedule, sys: &LadderSystem) -> Vec<Segment> {
    let mut out = Vec::with_capacity(2 * schedule.pulses().len());
    let mut t = 0.0;
    for sp in schedule.pulses() {
        if sp.start > t {
            out.push(Segment {
                start: t,
                end: sp.start,
                drive: None,
            });
        }
        out.push(Segment {
            start: sp.start,
            end: sp.end(),
            drive: Some(Drive {
                lower: sp.pulse.transition - 1,
                envelope: sp.pulse.envelope,
                strength: sys.osc_strengths[sp.pulse.transition - 1],
            }),
        });
        t = sp.end();
    }
    out
}

fn sample_times(total: f64, sampling: Sampling) -> Result<Vec<f64>> {
    let mut times = vec![0.0];
    if total <= 0.0 {
        return Ok(times);
    }
    match sampling {
        Sampling::Endpoints => {}
        Sampling::Every(every) => {
            if !(every > 0.0 && every.is_finite()) {
                return Err(Error::domain(format!(
                    "sample interval must be > 0, got {every}"
                )));
            }
            let mut k = 1usize;
            loop {
                let t = k as f64 * every;
                if t >= total * (1.0 - 1e-12) {
                    break;
                }
                times.push(t);
                k += 1;
            }
        }
        Sampling::Uniform(count) => {
            if count < 2 {
                return Err(Error::domain(format!(
                    "need at least 2 samples, got {count}"
                )));
            }
            let every = total / (count - 1) as f64;
            times.extend((1..count - 1).map(|k| k as f64 * every));
        }
    }
    times.push(total);
    Ok(times)
}

fn check_sample(rho: &DensityMatrix, t: f64) -> Result<()> {
    let d = rho.diagnostics();
    let reason = if !d.trace_error.is_finite() || d.trace_error > TRACE_DRIFT_TOL {
        format!(
            "trace drift {:e} exceeds {TRACE_DRIFT_TOL:e}",
            d.trace_error
        )
    } else if !(d.min_eigenvalue >= -NEGATIVITY_TOL) {
        format!("negative eigenvalue {:e}", d.min_eigenvalue)
    } else if d.hermiticity_error > HERMITICITY_TOL {
        format!("hermiticity defect {:e}", d.hermiticity_error)
    } else {
        return Ok(());
    };
    Err(Error::IntegrationFailure { time: t, reason })
}

fn check_inputs(rho0: &DensityMatrix, schedule: &Schedule, sys: &LadderSystem) -> Result<()> {
    sys.ensure_valid()?;
    schedule.check_against(sys)?;
    if rho0.dim() != sys.n_levels() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_levels(),
            found: rho0.dim(),
        });
    }
    Ok(())
}

/// Options for [`propagate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    pub step: StepPolicy,
    pub sampling: Sampling,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            step: StepPolicy::default(),
            sampling: Sampling::Uniform(DEFAULT_SAMPLES),
        }
    }
}

/// Integrates the master equation through `schedule` with fixed-step RK4
/// and samples every `sample_every` ns.
pub fn propagate(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    sys: &LadderSystem,
    step: f64,
    sample_every: f64,
) -> Result<Trajectory> {
    propagate_with(
        rho0,
        schedule,
        sys,
        &PropagateOptions {
            step: StepPolicy::Fixed(step),
            sampling: Sampling::Every(sample_every),
        },
    )
}

/// RK4 propagation with an explicit step policy and sampling plan.
///
/// Sample instants and pulse boundaries are always hit exactly; between
/// them the interval is split into equal steps no longer than the policy
/// step. Sampled states are checked, never corrected.
pub fn propagate_with(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    sys: &LadderSystem,
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    check_inputs(rho0, schedule, sys)?;
    opts.step.validate()?;
    let n = sys.n_levels();
    let channels = lindblad_channels(sys);
    let samples = sample_times(schedule.total_time(), opts.sampling)?;

    let mut rk = Rk4::new(n, &channels);
    let mut y: Vec<Complex64> = rho0.matrix().as_slice().to_vec();
    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::with_capacity(samples.len());
    times.push(0.0);
    states.push(rho0.clone());

    let mut next_sample = 1;
    for seg in segments(schedule, sys) {
        let step = opts.step.step_for(schedule, seg.end - seg.start);
        let mut a = seg.start;
        while a < seg.end {
            let sample_here = samples.get(next_sample).copied().filter(|&s| s < seg.end);
            let b = sample_here.unwrap_or(seg.end);
            rk.advance(&mut y, &seg, a, b, step);
            a = b;
            while next_sample < samples.len() && samples[next_sample] <= b {
                let rho =
                    DensityMatrix::from_matrix_unchecked(CMatrix::from_column_slice(n, n, &y));
                check_sample(&rho, samples[next_sample])?;
                times.push(samples[next_sample]);
                states.push(rho);
                next_sample += 1;
            }
        }
    }
    Ok(Trajectory::new(times, states))
}

struct Rk4<'a> {
    n: usize,
    channels: &'a [DecayChannel],
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl<'a> Rk4<'a> {
    fn new(n: usize, channels: &'a [DecayChannel]) -> Self {
        let buf = vec![ZERO; n * n];
        Self {
            n,
            channels,
            k: [buf.clone(), buf.clone(), buf.clone(), buf.clone()],
            tmp: buf,
        }
    }

    fn eval(
        n: usize,
        channels: &[DecayChannel],
        seg: &Segment,
        t: f64,
        rho: &[Complex64],
        out: &mut [Complex64],
    ) {
        match &seg.drive {
            Some(d) => {
                commutator_coupling(n, d.lower, d.lower + 1, d.coupling(t - seg.start), rho, out)
            }
            None => out.fill(ZERO),
        }
        dissipate(n, channels, rho, out);
    }

    /// Integrates from `a` to `b` in equal steps of at most `max_step`.
    fn advance(&mut self, y: &mut [Complex64], seg: &Segment, a: f64, b: f64, max_step: f64) {
        let len = b - a;
        if len <= 0.0 {
            return;
        }
        let steps = ((len / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        let (n, ch) = (self.n, self.channels);
        for i in 0..steps {
            let t = a + i as f64 * h;
            let [k1, k2, k3, k4] = &mut self.k;
            let tmp = &mut self.tmp;
            Self::eval(n, ch, seg, t, y, k1);
            axpy(tmp, y, 0.5 * h, k1);
            Self::eval(n, ch, seg, t + 0.5 * h, tmp, k2);
            axpy(tmp, y, 0.5 * h, k2);
            Self::eval(n, ch, seg, t + 0.5 * h, tmp, k3);
            axpy(tmp, y, h, k3);
            Self::eval(n, ch, seg, t + h, tmp, k4);
            let w = h / 6.0;
            for j in 0..y.len() {
                y[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * w;
            }
        }
    }
}

fn axpy(out: &mut [Complex64], y: &[Complex64], a: f64, x: &[Complex64]) {
    for ((o, y), x) in out.iter_mut().zip(y).zip(x) {
        *o = y + x * a;
    }
}

/// Exact propagation for piecewise-constant (square) schedules.
///
/// Each pulse or gap is a constant Liouvillian whose exponential maps
/// vec(ρ) across the segment. Samples are taken at t = 0 and at the end
/// of every segment.
pub fn propagate_expm(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    sys: &LadderSystem,
) -> Result<Trajectory> {
    check_inputs(rho0, schedule, sys)?;
    if let Some(p) = schedule
        .pulses()
        .iter()
        .find(|p| p.pulse.envelope.shape() != Shape::Square)
    {
        return Err(Error::UnsupportedShape(
            p.pulse.envelope.shape().to_string(),
        ));
    }
    let n = sys.n_levels();
    let channels = lindblad_channels(sys);
    let mut v = nalgebra::DVector::from_column_slice(rho0.matrix().as_slice());
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    for seg in segments(schedule, sys) {
        let mut h = CMatrix::zeros(n, n);
        if let Some(d) = &seg.drive {
            let g = Complex64::new(d.coupling(0.0), 0.0);
            h[(d.lower, d.lower + 1)] = g;
            h[(d.lower + 1, d.lower)] = g;
        }
        let l = liouvillian(&h, &channels)? * Complex64::new(seg.end - seg.start, 0.0);
        v = l.exp() * v;
        times.push(seg.end);
        states.push(DensityMatrix::from_matrix_unchecked(
            CMatrix::from_column_slice(n, n, v.as_slice()),
        ));
    }
    Ok(Trajectory::new(times, states))
}
