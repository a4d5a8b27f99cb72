//! JSON run configuration.
//!
//! ```json
//! {
//!   "levels": [{"label": "5S_1/2", "energy": 0.0}, ...],
//!   "transitions": [{"d": 1.0}, ...],
//!   "lifetimes": [26.2, 83.0, null],
//!   "pulses": {"shape": "square", "ratios": [1, 1, 3], "total_time": 30.0}
//! }
//! ```
//!
//! `lifetimes` lists levels 2..N in ns, `null` meaning stable. `pulses`
//! takes either `durations` or `ratios` with `total_time`. Optional
//! sections: `channels`, `numerics`, `sweep`, `optimize`.
//!
//! The shipped Rubidium lifetimes (26.2, 83.0, 112.0 ns) are a choice
//! that preserves the lifetime ratios relevant to the inversion problem,
//! not tabulated values. Oscillator strengths default to 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DecayChannel, DEFAULT_SAMPLES, DEFAULT_STEP_DIVISOR};
use crate::error::{Error, Result};
use crate::model::{ratios_to_durations, LadderSystem, Shape};
use crate::output::config_hash;
use crate::sweep::{OptimizeOptions, SweepGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub levels: Vec<LevelConfig>,
    pub transitions: Vec<TransitionConfig>,
    pub lifetimes: Vec<Option<f64>>,
    pub pulses: PulseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<DecayChannel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<NumericsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionConfig {
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
    /// Free evolution between pulses, ns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_divisor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_sets: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Integration settings after applying defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Numerics {
    pub step_divisor: f64,
    pub samples: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            step_divisor: DEFAULT_STEP_DIVISOR,
            samples: DEFAULT_SAMPLES,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_divisor > 0.0 && self.step_divisor.is_finite()) {
            return Err(Error::config(
                "numerics.step_divisor",
                format!("must be > 0, got {}", self.step_divisor),
            ));
        }
        if self.samples < 2 {
            return Err(Error::config(
                "numerics.samples",
                format!("must be >= 2, got {}", self.samples),
            ));
        }
        Ok(())
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(
                path.display().to_string(),
                format!("cannot read config: {e}"),
            )
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes infallibly")
    }

    /// Rubidium ladder with the 6/6/18 ns square-pulse scenario.
    pub fn rubidium() -> Self {
        let sys = LadderSystem::rubidium();
        Self {
            levels: sys
                .energies
                .iter()
                .zip(&sys.labels)
                .map(|(&energy, label)| LevelConfig {
                    label: Some(label.clone()),
                    energy,
                })
                .collect(),
            transitions: sys
                .osc_strengths
                .iter()
                .map(|&d| TransitionConfig { d })
                .collect(),
            lifetimes: sys.lifetimes.clone(),
            pulses: PulseConfig {
                shape: Shape::Square,
                ratios: Some(vec![1.0, 1.0, 3.0]),
                durations: None,
                total_time: Some(30.0),
                gap: None,
            },
            channels: None,
            numerics: None,
            sweep: None,
            optimize: None,
        }
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn system(&self) -> Result<LadderSystem> {
        let labels: Vec<String> = if self.levels.iter().all(|l| l.label.is_some()) {
            self.levels.iter().filter_map(|l| l.label.clone()).collect()
        } else {
            Vec::new()
        };
        let sys = LadderSystem {
            energies: self.levels.iter().map(|l| l.energy).collect(),
            osc_strengths: self.transitions.iter().map(|t| t.d).collect(),
            lifetimes: self.lifetimes.clone(),
            labels,
            channels: self.channels.clone(),
        };
        sys.ensure_valid()?;
        Ok(sys)
    }

    /// Pulse durations from either `durations` or `ratios` + `total_time`.
    pub fn durations(&self) -> Result<Vec<f64>> {
        let p = &self.pulses;
        match (&p.durations, &p.ratios) {
            (Some(_), Some(_)) => Err(Error::config(
                "pulses",
                "give either `durations` or `ratios`, not both",
            )),
            (Some(d), None) => {
                if let Some(t) = p.total_time {
                    let sum: f64 = d.iter().sum();
                    if (sum - t).abs() > 1e-9 * t.abs().max(1.0) {
                        return Err(Error::config(
                            "pulses.total_time",
                            format!("durations sum to {sum} ns but total_time is {t} ns"),
                        ));
                    }
                }
                if let Some(x) = d.iter().find(|x| !(**x > 0.0)) {
                    return Err(Error::config(
                        "pulses.durations",
                        format!("durations must be > 0, got {x}"),
                    ));
                }
                Ok(d.clone())
            }
            (None, Some(r)) => {
                let t = p.total_time.ok_or_else(|| {
                    Error::config(
                        "pulses.total_time",
                        "missing field `total_time` (needed with `ratios`)",
                    )
                })?;
                ratios_to_durations(t, r).map_err(|e| Error::config("pulses.ratios", e.to_string()))
            }
            (None, None) => Err(Error::config(
                "pulses",
                "missing field `durations` or `ratios`",
            )),
        }
    }

    /// Sum of pulse durations, excluding gaps.
    pub fn total_time(&self) -> Result<f64> {
        Ok(self.durations()?.iter().sum())
    }

    pub fn gap(&self) -> f64 {
        self.pulses.gap.unwrap_or(0.0)
    }

    pub fn numerics(&self) -> Numerics {
        let d = Numerics::default();
        match &self.numerics {
            Some(n) => Numerics {
                step_divisor: n.step_divisor.unwrap_or(d.step_divisor),
                samples: n.samples.unwrap_or(d.samples),
            },
            None => d,
        }
    }

    pub fn sweep_grid(&self, sys: &LadderSystem) -> Result<SweepGrid> {
        let shape = self
            .sweep
            .as_ref()
            .and_then(|s| s.shape)
            .unwrap_or(self.pulses.shape);
        let default = SweepGrid::default_for(sys, shape);
        let Some(s) = &self.sweep else {
            return Ok(default);
        };
        SweepGrid::new(
            s.total_times.clone().unwrap_or(default.total_times),
            s.ratio_sets.clone().unwrap_or(default.ratio_sets),
            shape,
        )
        .map_err(|e| Error::config("sweep", e.to_string()))
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        let mut o = OptimizeOptions::default();
        if let Some(c) = &self.optimize {
            if let Some(s) = &c.seeds {
                o.seeds = s.clone();
            }
            if let Some(m) = c.min_ratio {
                o.min_ratio = m;
            }
            if let Some(m) = c.max_iterations {
                o.max_iterations = m;
            }
            if let Some(t) = c.tolerance {
                o.tolerance = t;
            }
        }
        o
    }
}
