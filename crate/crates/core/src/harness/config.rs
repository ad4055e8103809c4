//! Experiment configuration (TOML) and its resolution against an environment.
//!
//! ```toml
//! seeds = [1, 2, 3, 4, 5]
//! output = "runs/synthetic"
//!
//! [env]
//! preset = "synthetic-v1"
//!
//! [decoder]
//! epsilon = 0.05
//! delta = 0.05
//! homing_episodes = 5000
//! n0 = 5000
//!
//! [online]
//! episodes = 40000
//! gamma = "schedule"
//! oracle = "aggregation"
//! ```
//!
//! `[env]` takes either `preset` (with optional `p`, `p_reward`) or `file`, a
//! path to an environment TOML. Setting the top-level `total_episodes`
//! instead of `online.episodes` gives the online phase whatever the
//! exploration phases leave of that budget.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::file::EnvSpec;
use crate::env::{build_synthetic_env, Environment, SYNTHETIC_PRESET};
use crate::error::{IglError, Result};
use crate::online::{GammaSchedule, OracleKind};
use crate::reachability::homing_budget;

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_N0: usize = 5000;
pub const DEFAULT_BUDGET_CONSTANT: f64 = 1.0;
const SYNTHETIC_P: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_episodes: Option<u64>,
    pub env: EnvSource,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub online: OnlineConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_reward: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    pub epsilon: f64,
    /// Defaults to `1/T²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Homing episodes per terminal state. Derived from `budget_constant`
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homing_episodes: Option<usize>,
    pub budget_constant: f64,
    /// Visitation-estimate episodes per terminal state; defaults to the homing budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visitation_episodes: Option<usize>,
    pub n0: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            epsilon: DEFAULT_EPSILON,
            delta: None,
            homing_episodes: None,
            budget_constant: DEFAULT_BUDGET_CONSTANT,
            visitation_episodes: None,
            n0: DEFAULT_N0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    /// `γ_t = H √(K t)`.
    Schedule,
    Constant,
    /// Constant `γ` from the closed-form parameter choice.
    Theory,
}

impl std::str::FromStr for GammaMode {
    type Err = IglError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schedule" => Ok(GammaMode::Schedule),
            "constant" => Ok(GammaMode::Constant),
            "theory" => Ok(GammaMode::Theory),
            other => Err(IglError::InvalidConfig(format!(
                "unknown gamma mode {other:?} (expected schedule, constant or theory)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    pub gamma: GammaMode,
    /// Required with `gamma = "constant"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_value: Option<f64>,
    pub oracle: OracleKind,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            episodes: None,
            gamma: GammaMode::Schedule,
            gamma_value: None,
            oracle: OracleKind::Aggregation,
        }
    }
}

impl ExperimentConfig {
    /// The built-in synthetic experiment with the given online length.
    pub fn synthetic(online_episodes: usize) -> Self {
        ExperimentConfig {
            seeds: default_seeds(),
            output: None,
            total_episodes: None,
            env: EnvSource {
                preset: Some(SYNTHETIC_PRESET.into()),
                ..EnvSource::default()
            },
            decoder: DecoderConfig {
                delta: Some(0.05),
                homing_episodes: Some(5000),
                ..DecoderConfig::default()
            },
            online: OnlineConfig {
                episodes: Some(online_episodes),
                ..OnlineConfig::default()
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IglError::InvalidConfig(e.to_string()))
    }

    /// Reads a config file. A relative `env.file` is taken relative to the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IglError::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        if let (Some(file), Some(dir)) = (config.env.file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| IglError::InvalidConfig(e.to_string()))
    }

    pub fn build_env(&self) -> Result<Environment> {
        match (&self.env.preset, &self.env.file) {
            (Some(name), None) if name == SYNTHETIC_PRESET => build_synthetic_env(
                self.env.p.unwrap_or(SYNTHETIC_P),
                self.env.p_reward.unwrap_or(SYNTHETIC_P),
            ),
            (Some(name), None) => Err(IglError::InvalidConfig(format!(
                "unknown environment preset {name:?} (available: {SYNTHETIC_PRESET})"
            ))),
            (None, Some(path)) => {
                if self.env.p.is_some() || self.env.p_reward.is_some() {
                    return Err(IglError::InvalidConfig(
                        "p and p_reward only apply to the preset".into(),
                    ));
                }
                EnvSpec::load(path)?.build()
            }
            _ => Err(IglError::InvalidConfig(
                "[env] needs exactly one of preset or file".into(),
            )),
        }
    }

    /// Checks ranges and budgets and fills in derived defaults.
    pub fn resolve(&self, env: &Environment) -> Result<ResolvedConfig> {
        let bad = |msg: String| Err(IglError::InvalidConfig(msg));
        let d = &self.decoder;
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if !(d.epsilon > 0.0 && d.epsilon < 0.25) {
            return bad(format!("epsilon = {} must lie in (0, 1/4)", d.epsilon));
        }
        if d.n0 == 0 {
            return bad("n0 must be at least 1".into());
        }
        if !(d.budget_constant > 0.0 && d.budget_constant.is_finite()) {
            return bad(format!("budget_constant = {} must be positive", d.budget_constant));
        }
        let online_episodes = match (self.online.episodes, self.total_episodes) {
            (Some(0), _) => return bad("online.episodes must be at least 1".into()),
            (Some(n), None) => Some(n),
            (None, Some(_)) => None,
            (Some(_), Some(_)) => return bad("set only one of online.episodes and total_episodes".into()),
            (None, None) => return bad("set online.episodes or total_episodes".into()),
        };
        let horizon_t = self.total_episodes.unwrap_or(online_episodes.unwrap_or(0) as u64);
        let delta = d.delta.unwrap_or(1.0 / (horizon_t as f64).powi(2));
        if !(delta > 0.0 && delta < 1.0) {
            return bad(format!("delta = {delta} must lie in (0, 1)"));
        }
        let mdp = env.mdp();
        let homing_episodes = match d.homing_episodes {
            Some(0) => return bad("homing_episodes must be at least 1".into()),
            Some(n) => n,
            None => {
                let n = homing_budget(
                    d.budget_constant,
                    mdp.num_states(),
                    mdp.num_actions(),
                    mdp.horizon(),
                    delta,
                    d.epsilon,
                );
                usize::try_from(n).map_err(|_| IglError::InvalidConfig(format!("homing budget {n} is too large")))?
            }
        };
        let visitation_episodes = match d.visitation_episodes {
            Some(0) => return bad("visitation_episodes must be at least 1".into()),
            Some(n) => n,
            None => homing_episodes,
        };
        let terminal = mdp.num_terminal() as u64;
        let exploration_floor = terminal * (homing_episodes + visitation_episodes) as u64;
        if let Some(total) = self.total_episodes {
            // collection adds at least n0 per reachable state on top of this
            if total <= exploration_floor {
                return bad(format!(
                    "total_episodes = {total} does not exceed the exploration budget of {exploration_floor} episodes"
                ));
            }
        }
        let gamma = match self.online.gamma {
            GammaMode::Schedule => GammaChoice::Schedule,
            GammaMode::Constant => match self.online.gamma_value {
                Some(g) if g > 0.0 && g.is_finite() => GammaChoice::Constant(g),
                Some(g) => return bad(format!("gamma_value = {g} must be positive")),
                None => return bad("gamma = \"constant\" needs gamma_value".into()),
            },
            GammaMode::Theory => GammaChoice::Theory,
        };
        Ok(ResolvedConfig {
            env: env.name().to_string(),
            seeds: self.seeds.clone(),
            epsilon: d.epsilon,
            delta,
            homing_episodes,
            visitation_episodes,
            n0: d.n0,
            total_episodes: self.total_episodes,
            online_episodes,
            gamma,
            oracle: self.online.oracle,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaChoice {
    Schedule,
    Constant(f64),
    Theory,
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub env: String,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub delta: f64,
    pub homing_episodes: usize,
    pub visitation_episodes: usize,
    pub n0: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_episodes: Option<u64>,
    /// `None` when the online phase takes what `total_episodes` leaves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub online_episodes: Option<usize>,
    pub gamma: GammaChoice,
    pub oracle: OracleKind,
}

impl ResolvedConfig {
    /// Episode count `T` used for the theory-mode parameters.
    pub fn horizon_episodes(&self) -> f64 {
        self.total_episodes
            .map(|t| t as f64)
            .unwrap_or(self.online_episodes.unwrap_or(0) as f64)
    }

    pub fn schedule(&self, theory_gamma: f64) -> GammaSchedule {
        match self.gamma {
            GammaChoice::Schedule => GammaSchedule::Sqrt,
            GammaChoice::Constant(g) => GammaSchedule::Constant(g),
            GammaChoice::Theory => GammaSchedule::Constant(theory_gamma),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| IglError::InvalidConfig(e.to_string()))
    }
}

#[cfg(test)]
impl ExperimentConfig {
    fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }
}
