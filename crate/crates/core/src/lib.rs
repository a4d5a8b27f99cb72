//! Population inversion in N-level ladder systems.
//!
//! A sequence of resonant pulses, one per transition and each of area
//! π/(2dₙ), carries the ground state |1⟩ to the top level |N⟩ when the
//! excited states do not decay. This crate simulates the same protocol
//! with spontaneous emission modelled as a Lindblad cascade, sweeps
//! total control time and pulse-length ratios, and searches ratios for
//! the best final inversion ρ_NN − ρ₁₁.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod oracle;
pub mod output;
pub mod protocol;
pub mod sweep;
pub mod validate;

pub use config::ConfigFile;
pub use dynamics::{
    lindblad_channels, master_rhs, propagate, propagate_expm, propagate_with, rwa_hamiltonian,
    DecayChannel, PropagateOptions, Sampling, StepPolicy, Trajectory,
};
pub use error::{Error, Result};
pub use model::{
    ground_state, ratios_to_durations, validate_system, DensityMatrix, Envelope, LadderSystem,
    PulseSpec, Schedule, Shape, Violation,
};
pub use oracle::{cascade_populations, rabi_populations};
pub use protocol::{
    build_inversion_schedule, check_ratio_heuristic, occupancy, required_area, yield_metric,
    YieldReport,
};
pub use sweep::{
    export_fig2, optimize_ratios, run_sweep, OptimizeOptions, OptimizeOutcome, SweepGrid,
    SweepResult,
};
