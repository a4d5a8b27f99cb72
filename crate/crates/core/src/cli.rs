//! Command-line entry point: `simulate`, `sweep`, `optimize`, `validate`.
//!
//! Exit codes: 0 success, 1 a validation check failed, 2 configuration
//! error, 3 numerical or output failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ConfigFile, Numerics};
use crate::dynamics::{propagate_with, PropagateOptions, Sampling, StepPolicy, Trajectory};
use crate::error::Error;
use crate::model::{ground_state, LadderSystem, Schedule};
use crate::output::{config_hash, header_line, sig12, Provenance};
use crate::protocol::{build_inversion_schedule_with_gap, YieldReport};
use crate::sweep::{export_fig2_with_hash, optimize_ratios, run_sweep};
use crate::validate::{run_checks, Scenario};

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "LADDER_INVERSION_OUT";
const DEFAULT_OUT_DIR: &str = "out";
const ENVELOPE_SAMPLES: usize = 201;

#[derive(Debug, Parser)]
#[command(
    name = "ladder-inversion",
    version,
    about = "Population inversion in ladder systems under sequential resonant pulses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate one schedule and write its trajectory and yield report.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run with every decay rate set to zero.
        #[arg(long)]
        ideal_compare: bool,
        /// Dump every sampled density matrix as JSON.
        #[arg(long)]
        dump_states: bool,
    },
    /// Final yield over a grid of total times and pulse ratios.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Search pulse ratios for the best yield at the configured total time.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the oracle and invariant checks.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file (default: built-in Rubidium ladder).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $LADDER_INVERSION_OUT or ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Force all decay rates to zero.
    #[arg(long)]
    pub no_decay: bool,
    /// RK4 step = shortest pulse / divisor.
    #[arg(long)]
    pub step_divisor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Simulate,
    Sweep,
    Optimize,
    Validate,
}

/// Everything one command invocation needs, with defaults resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub command: CommandKind,
    pub numerics: Numerics,
    pub out_dir: PathBuf,
    pub no_decay: bool,
    pub ideal_compare: bool,
    pub dump_states: bool,
    pub threads: Option<usize>,
}

#[derive(Serialize)]
struct HashInput<'a> {
    config: &'a ConfigFile,
    no_decay: bool,
    numerics: Numerics,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, Error> {
        let (command, common, ideal_compare, dump_states, threads) = match cli.command {
            Command::Simulate {
                common,
                ideal_compare,
                dump_states,
            } => (
                CommandKind::Simulate,
                common,
                ideal_compare,
                dump_states,
                None,
            ),
            Command::Sweep { common, threads } => {
                (CommandKind::Sweep, common, false, false, threads)
            }
            Command::Optimize { common } => (CommandKind::Optimize, common, false, false, None),
            Command::Validate { common } => (CommandKind::Validate, common, false, false, None),
        };
        let file = match &common.config {
            Some(path) => ConfigFile::from_path(path)?,
            None => ConfigFile::rubidium(),
        };
        let mut numerics = file.numerics();
        if let Some(k) = common.step_divisor {
            numerics.step_divisor = k;
        }
        numerics.validate()?;
        if threads == Some(0) {
            return Err(Error::config("--threads", "must be >= 1"));
        }
        let out_dir = common
            .out
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let cfg = Self {
            file,
            command,
            numerics,
            out_dir,
            no_decay: common.no_decay,
            ideal_compare,
            dump_states,
            threads,
        };
        // Surface system and pulse errors before any work starts.
        cfg.system()?;
        if command != CommandKind::Sweep {
            cfg.file.durations()?;
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<LadderSystem, Error> {
        let sys = self.file.system()?;
        Ok(if self.no_decay {
            sys.without_decay()
        } else {
            sys
        })
    }

    pub fn hash(&self) -> String {
        config_hash(&HashInput {
            config: &self.file,
            no_decay: self.no_decay,
            numerics: self.numerics,
        })
    }

    fn step(&self) -> StepPolicy {
        StepPolicy::ShortestPulse(self.numerics.step_divisor)
    }
}

/// Why a command did not succeed; maps onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Config(Error),
    Checks(String),
    Numerical(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Checks(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Checks(s) => write!(f, "validation failed: {s}"),
            Failure::Numerical(e) => write!(f, "run failed: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidSystem(_) => Failure::Config(e),
            other => Failure::Numerical(other),
        }
    }
}

/// Result of a successful command: a human summary and the files written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cfg = match RunConfig::from_cli(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    match execute(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            0
        }
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    match cfg.command {
        CommandKind::Simulate => cmd_simulate(cfg),
        CommandKind::Sweep => cmd_sweep(cfg),
        CommandKind::Optimize => cmd_optimize(cfg),
        CommandKind::Validate => cmd_validate(cfg),
    }
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Failure::Numerical(e.into()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(contents.as_bytes()))
        .map_err(|e| Failure::Numerical(e.into()))
}

pub fn trajectory_csv(traj: &Trajectory, hash: &str) -> String {
    let n = traj.final_state().dim();
    let mut out = header_line(hash);
    out.push('\n');
    out.push_str("t_ns");
    for k in 1..=n {
        out.push_str(&format!(",rho{k}{k}"));
    }
    out.push_str(",yield\n");
    for (t, p) in traj.times().iter().zip(traj.populations()) {
        out.push_str(&sig12(*t));
        for x in p {
            out.push(',');
            out.push_str(&sig12(*x));
        }
        out.push(',');
        out.push_str(&sig12(p[n - 1] - p[0]));
        out.push('\n');
    }
    out
}

fn envelope_csv(schedule: &Schedule, index: usize, hash: &str) -> String {
    let sp = &schedule.pulses()[index];
    let env = &sp.pulse.envelope;
    let mut out = header_line(hash);
    out.push('\n');
    out.push_str("t_ns,amplitude\n");
    for i in 0..ENVELOPE_SAMPLES {
        let local = env.duration() * i as f64 / (ENVELOPE_SAMPLES - 1) as f64;
        out.push_str(&format!(
            "{},{}\n",
            sig12(sp.start + local),
            sig12(env.value(local))
        ));
    }
    out
}

#[derive(Serialize)]
struct ReportFile<'a> {
    provenance: Provenance,
    #[serde(flatten)]
    report: &'a YieldReport,
}

#[derive(Serialize)]
struct StatesFile {
    provenance: Provenance,
    times: Vec<f64>,
    /// Row-major [re, im] pairs per state.
    states: Vec<Vec<[f64; 2]>>,
}

fn states_json(traj: &Trajectory, hash: &str) -> String {
    let states = traj
        .states()
        .iter()
        .map(|rho| {
            let n = rho.dim();
            (0..n)
                .flat_map(|j| (0..n).map(move |k| (j, k)))
                .map(|(j, k)| {
                    let z = rho.matrix()[(j, k)];
                    [z.re, z.im]
                })
                .collect()
        })
        .collect();
    let file = StatesFile {
        provenance: Provenance::new(hash),
        times: traj.times().to_vec(),
        states,
    };
    serde_json::to_string_pretty(&file).expect("states serialize")
}

fn report_json(report: &YieldReport, hash: &str) -> String {
    let file = ReportFile {
        provenance: Provenance::new(hash),
        report,
    };
    serde_json::to_string_pretty(&file).expect("report serializes")
}

fn simulate_once(cfg: &RunConfig, sys: &LadderSystem) -> Result<(Schedule, Trajectory), Failure> {
    let durations = cfg.file.durations()?;
    let schedule =
        build_inversion_schedule_with_gap(sys, &durations, cfg.file.pulses.shape, cfg.file.gap())?;
    let opts = PropagateOptions {
        step: cfg.step(),
        sampling: Sampling::Uniform(cfg.numerics.samples),
    };
    let traj = propagate_with(&ground_state(sys.n_levels())?, &schedule, sys, &opts)
        .map_err(Failure::Numerical)?;
    Ok((schedule, traj))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let sys = cfg.system()?;
    let hash = cfg.hash();
    let (schedule, traj) = simulate_once(cfg, &sys)?;
    let report = YieldReport::from_trajectory(&traj);
    prepare_out_dir(cfg)?;

    let mut files = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), Failure> {
        let path = cfg.out_dir.join(name);
        write_file(&path, &contents)?;
        files.push(path);
        Ok(())
    };
    for k in 0..schedule.pulses().len() {
        emit(
            &format!("pulse_{}.csv", k + 1),
            envelope_csv(&schedule, k, &hash),
        )?;
    }
    emit("trajectory.csv", trajectory_csv(&traj, &hash))?;
    emit("report.json", report_json(&report, &hash))?;
    if cfg.dump_states {
        emit("states.json", states_json(&traj, &hash))?;
    }

    let mut summary = format!(
        "final yield ρ_NN − ρ_11 = {:.6} at T = {} ns\n",
        report.final_yield,
        traj.final_time()
    );
    if cfg.ideal_compare {
        let (_, ideal) = simulate_once(cfg, &sys.without_decay())?;
        let ideal_report = YieldReport::from_trajectory(&ideal);
        emit("trajectory_ideal.csv", trajectory_csv(&ideal, &hash))?;
        emit("report_ideal.json", report_json(&ideal_report, &hash))?;
        summary.push_str(&format!(
            "ideal (no decay) yield = {:.6}\n",
            ideal_report.final_yield
        ));
    }
    for f in &files {
        summary.push_str(&format!("wrote {}\n", f.display()));
    }
    Ok(Outcome { summary, files })
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let sys = cfg.system()?;
    // The lifetime-ratio row comes from the configured lifetimes even when
    // decay is switched off, so both runs share one grid.
    let grid = cfg.file.sweep_grid(&cfg.file.system()?)?;
    let hash = cfg.hash();
    let result = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Numerical(Error::domain(e.to_string())))?
            .install(|| run_sweep(&sys, &grid, cfg.step())),
        None => run_sweep(&sys, &grid, cfg.step()),
    }
    .map_err(Failure::from)?;
    prepare_out_dir(cfg)?;
    let path = cfg.out_dir.join("fig2.csv");
    export_fig2_with_hash(&result, &path, &hash).map_err(Failure::Numerical)?;

    let failures: Vec<String> = result
        .failures()
        .map(|r| {
            format!(
                "T_f = {} ns, ratios {}: {}",
                r.total_time,
                r.label,
                r.outcome.as_ref().err().map(String::as_str).unwrap_or("")
            )
        })
        .collect();
    if !failures.is_empty() {
        return Err(Failure::Numerical(Error::IntegrationFailure {
            time: f64::NAN,
            reason: format!(
                "{} of {} grid points failed ({} written anyway):\n  {}",
                failures.len(),
                result.rows.len(),
                path.display(),
                failures.join("\n  ")
            ),
        }));
    }
    Ok(Outcome {
        summary: format!(
            "{} grid points\nwrote {}\n",
            result.rows.len(),
            path.display()
        ),
        files: vec![path],
    })
}

#[derive(Serialize)]
struct OptimizeFile {
    provenance: Provenance,
    total_time: f64,
    shape: crate::model::Shape,
    ratios: Vec<f64>,
    durations: Vec<f64>,
    #[serde(rename = "yield")]
    best_yield: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let sys = cfg.system()?;
    let total_time = cfg.file.total_time()?;
    let shape = cfg.file.pulses.shape;
    let opts = cfg.file.optimize_options();
    let out = optimize_ratios(&sys, total_time, shape, &opts)?;
    prepare_out_dir(cfg)?;
    let durations = crate::model::ratios_to_durations(total_time, &out.ratios)?;
    let file = OptimizeFile {
        provenance: Provenance::new(&cfg.hash()),
        total_time,
        shape,
        ratios: out.ratios.clone(),
        durations,
        best_yield: out.best_yield,
        iterations: out.iterations,
        evaluations: out.evaluations,
        converged: out.converged,
    };
    let path = cfg.out_dir.join("optimize.json");
    write_file(
        &path,
        &serde_json::to_string_pretty(&file).expect("serializes"),
    )?;
    Ok(Outcome {
        summary: format!(
            "best ratios {:?} → yield {:.6} ({} iterations, converged: {})\nwrote {}\n",
            out.ratios,
            out.best_yield,
            out.iterations,
            out.converged,
            path.display()
        ),
        files: vec![path],
    })
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let scenario = Scenario {
        system: cfg.system()?,
        durations: cfg.file.durations()?,
        gap: cfg.file.gap(),
        step_divisor: cfg.numerics.step_divisor,
        samples: cfg.numerics.samples,
    };
    let report = run_checks(&scenario);
    let table = report.table();
    if report.passed() {
        Ok(Outcome {
            summary: table,
            files: vec![],
        })
    } else {
        let names: Vec<_> = report.failures().map(|c| c.name).collect();
        Err(Failure::Checks(format!("{}\n{table}", names.join(", "))))
    }
}
