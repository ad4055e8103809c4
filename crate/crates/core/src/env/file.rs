//! Declarative environment files (TOML).
//!
//! ```toml
//! name = "two-step"
//! actions = 2
//! feedback_symbols = 2
//! layers = [["root"], ["left", "right"]]
//!
//! [[contexts]]
//! name = "u"
//! weight = 1.0
//!
//! [transitions]
//! root = [[0.5, 0.5], [0.1, 0.9]]     # one row per action, over the next layer
//!
//! [rewards]
//! left = [0.9, 0.2]                   # shared by all contexts
//! right = { u = [0.0, 0.0] }          # or per context
//!
//! [feedback]
//! rule = "context-flip"               # y = r, or y = 1 - r for listed contexts
//! flip = []
//!
//! [identifiability]
//! m = 1.1
//! theta = 0.9
//! c = 0.0
//! ```
//!
//! `rule = "table"` instead takes `[[feedback.entries]]` items with `context`,
//! `state`, `reward` (0 or 1) and `probs` over the feedback alphabet.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ContextModel, Environment, FeedbackModel, IdentifiabilityParams, LayeredMdp, RewardTable};
use crate::error::{IglError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub actions: usize,
    pub feedback_symbols: usize,
    pub layers: Vec<Vec<String>>,
    pub contexts: Vec<ContextSpec>,
    #[serde(default)]
    pub transitions: BTreeMap<String, Vec<Vec<f64>>>,
    pub rewards: BTreeMap<String, RewardSpec>,
    pub feedback: FeedbackSpec,
    pub identifiability: IdentifiabilitySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    pub name: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardSpec {
    Shared(Vec<f64>),
    PerContext(BTreeMap<String, Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeedbackSpec {
    ContextFlip {
        #[serde(default)]
        flip: Vec<String>,
    },
    Table {
        entries: Vec<ChannelEntry>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub context: String,
    pub state: String,
    pub reward: u8,
    pub probs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifiabilitySpec {
    pub m: f64,
    pub theta: f64,
    pub c: f64,
}

impl EnvSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IglError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IglError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| IglError::InvalidConfig(e.to_string()))
    }

    pub fn build(&self) -> Result<Environment> {
        let bad = |msg: String| IglError::InvalidConfig(msg);
        let sizes: Vec<usize> = self.layers.iter().map(Vec::len).collect();
        let labels: Vec<String> = self.layers.iter().flatten().cloned().collect();
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(bad(format!("state label {l:?} appears twice")));
            }
        }
        let horizon = self.layers.len();
        if horizon == 0 {
            return Err(bad("at least one layer is required".into()));
        }
        let non_terminal: Vec<&String> = self.layers[..horizon - 1].iter().flatten().collect();
        for key in self.transitions.keys() {
            if !non_terminal.contains(&key) {
                return Err(bad(format!(
                    "transitions given for {key:?}, which is not a non-terminal state"
                )));
            }
        }
        let mut rows = Vec::with_capacity(non_terminal.len() * self.actions);
        for s in &non_terminal {
            let table = self
                .transitions
                .get(*s)
                .ok_or_else(|| bad(format!("missing transitions for state {s:?}")))?;
            if table.len() != self.actions {
                return Err(bad(format!(
                    "state {s:?} lists {} transition rows for {} actions",
                    table.len(),
                    self.actions
                )));
            }
            rows.extend(table.iter().cloned());
        }
        let mdp = LayeredMdp::new(&sizes, self.actions, rows, Some(labels))?;

        let contexts = ContextModel::new(
            self.contexts.iter().map(|c| c.name.clone()).collect(),
            self.contexts.iter().map(|c| c.weight).collect(),
        )?;
        let terminal = &self.layers[horizon - 1];
        for key in self.rewards.keys() {
            if !terminal.contains(key) {
                return Err(bad(format!("rewards given for non-terminal state {key:?}")));
            }
        }
        let mut reward_rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(terminal.len());
        for s in terminal {
            let spec = self
                .rewards
                .get(s)
                .ok_or_else(|| bad(format!("missing rewards for terminal state {s:?}")))?;
            let per_context = match spec {
                RewardSpec::Shared(row) => vec![row.clone(); contexts.len()],
                RewardSpec::PerContext(map) => {
                    for key in map.keys() {
                        if contexts.index_of(key).is_none() {
                            return Err(bad(format!("unknown context {key:?} in rewards for {s:?}")));
                        }
                    }
                    contexts
                        .labels()
                        .iter()
                        .map(|x| {
                            map.get(x)
                                .cloned()
                                .ok_or_else(|| bad(format!("rewards for {s:?} miss context {x:?}")))
                        })
                        .collect::<Result<Vec<_>>>()?
                }
            };
            if per_context.iter().any(|r| r.len() != self.actions) {
                return Err(bad(format!("reward rows for {s:?} must have {} entries", self.actions)));
            }
            reward_rows.push(per_context);
        }
        let reward = RewardTable::from_fn(contexts.len(), terminal.len(), self.actions, |x, s, a| {
            reward_rows[s][x][a]
        })?;

        let ny = self.feedback_symbols;
        let feedback = match &self.feedback {
            FeedbackSpec::ContextFlip { flip } => {
                if ny != 2 {
                    return Err(bad("the context-flip rule needs exactly 2 feedback symbols".into()));
                }
                let mut flipped = vec![false; contexts.len()];
                for name in flip {
                    let x = contexts
                        .index_of(name)
                        .ok_or_else(|| bad(format!("unknown context {name:?} in feedback.flip")))?;
                    flipped[x] = true;
                }
                FeedbackModel::new(
                    reward,
                    2,
                    |x, _, r| {
                        let mut d = vec![0.0; 2];
                        d[usize::from(r ^ flipped[x])] = 1.0;
                        d
                    },
                    None,
                )?
            }
            FeedbackSpec::Table { entries } => {
                let nt = terminal.len();
                let mut table: Vec<Option<Vec<f64>>> = vec![None; contexts.len() * nt * 2];
                for e in entries {
                    let x = contexts
                        .index_of(&e.context)
                        .ok_or_else(|| bad(format!("unknown context {:?} in feedback table", e.context)))?;
                    let s = terminal
                        .iter()
                        .position(|t| *t == e.state)
                        .ok_or_else(|| bad(format!("unknown terminal state {:?} in feedback table", e.state)))?;
                    if e.reward > 1 {
                        return Err(bad(format!("feedback table reward must be 0 or 1, got {}", e.reward)));
                    }
                    let slot = &mut table[(x * nt + s) * 2 + usize::from(e.reward)];
                    if slot.is_some() {
                        return Err(bad(format!(
                            "duplicate feedback entry for ({}, {}, {})",
                            e.context, e.state, e.reward
                        )));
                    }
                    *slot = Some(e.probs.clone());
                }
                if let Some(i) = table.iter().position(Option::is_none) {
                    let (xs, r) = (i / 2, i % 2);
                    return Err(bad(format!(
                        "feedback table misses ({}, {}, {r})",
                        contexts.labels()[xs / nt],
                        terminal[xs % nt]
                    )));
                }
                FeedbackModel::new(
                    reward,
                    ny,
                    |x, s, r| table[(x * nt + s) * 2 + usize::from(r)].clone().unwrap(),
                    None,
                )?
            }
        };
        let id = self.identifiability;
        Environment::new(
            self.name.clone().unwrap_or_else(|| "custom".into()),
            mdp,
            contexts,
            feedback,
            IdentifiabilityParams {
                m: id.m,
                c: id.c,
                theta: id.theta,
            },
        )
    }

    /// Describes an existing environment, with the feedback channel as an explicit table.
    pub fn from_environment(env: &Environment) -> Self {
        let mdp = env.mdp();
        let layers = (0..mdp.horizon())
            .map(|h| mdp.layer(h).map(|s| mdp.label(s).to_string()).collect())
            .collect();
        let contexts: Vec<ContextSpec> = env
            .contexts()
            .labels()
            .iter()
            .zip(env.contexts().probs())
            .map(|(name, &weight)| ContextSpec {
                name: name.clone(),
                weight,
            })
            .collect();
        let k = mdp.num_actions();
        let transitions = (0..mdp.horizon() - 1)
            .flat_map(|h| mdp.layer(h))
            .map(|s| {
                let rows = (0..k).map(|a| mdp.successors(s, a).to_vec()).collect();
                (mdp.label(s).to_string(), rows)
            })
            .collect();
        let nx = env.contexts().len();
        let rewards = mdp
            .terminal_states()
            .map(|s| {
                let first = env.reward_row(0, s).to_vec();
                let spec = if (1..nx).all(|x| env.reward_row(x, s) == first.as_slice()) {
                    RewardSpec::Shared(first)
                } else {
                    RewardSpec::PerContext(
                        (0..nx)
                            .map(|x| (contexts[x].name.clone(), env.reward_row(x, s).to_vec()))
                            .collect(),
                    )
                };
                (mdp.label(s).to_string(), spec)
            })
            .collect();
        let mut entries = Vec::new();
        for (x, ctx) in contexts.iter().enumerate() {
            for s in mdp.terminal_states() {
                for r in [false, true] {
                    entries.push(ChannelEntry {
                        context: ctx.name.clone(),
                        state: mdp.label(s).to_string(),
                        reward: u8::from(r),
                        probs: env.channel(x, s, r).to_vec(),
                    });
                }
            }
        }
        let p = env.params();
        EnvSpec {
            name: Some(env.name().to_string()),
            actions: k,
            feedback_symbols: env.feedback().num_symbols(),
            layers,
            contexts,
            transitions,
            rewards,
            feedback: FeedbackSpec::Table { entries },
            identifiability: IdentifiabilitySpec {
                m: p.m,
                theta: p.theta,
                c: p.c,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_synthetic_env;

    const TWO_STEP: &str = r#"
name = "two-step"
actions = 2
feedback_symbols = 2
layers = [["root"], ["left", "right"]]

[[contexts]]
name = "u"
weight = 1.0

[transitions]
root = [[0.5, 0.5], [0.1, 0.9]]

[rewards]
left = [0.9, 0.0]
right = { u = [0.0, 0.0] }

[feedback]
rule = "context-flip"
flip = []

[identifiability]
m = 0.9
theta = 0.9
c = 0.0
"#;

    #[test]
    fn parses_documented_example() {
        let env = EnvSpec::from_toml_str(TWO_STEP).unwrap().build().unwrap();
        assert_eq!(env.mdp().horizon(), 2);
        assert_eq!(env.mdp().num_states(), 3);
        assert_eq!(env.reward(0, 1, 0), 0.9);
        assert_eq!(env.channel(0, 1, true), &[0.0, 1.0]);
    }

    #[test]
    fn synthetic_round_trips_through_toml() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let text = EnvSpec::from_environment(&env).to_toml_string().unwrap();
        let rebuilt = EnvSpec::from_toml_str(&text).unwrap().build().unwrap();
        assert_eq!(rebuilt, env);
    }

    #[test]
    fn missing_pieces_are_config_errors() {
        let no_rewards = TWO_STEP.replace("right = { u = [0.0, 0.0] }", "");
        let err = EnvSpec::from_toml_str(&no_rewards).unwrap().build().unwrap_err();
        assert!(matches!(err, IglError::InvalidConfig(_)), "{err}");

        let unknown_ctx = TWO_STEP.replace("flip = []", "flip = [\"nobody\"]");
        let err = EnvSpec::from_toml_str(&unknown_ctx).unwrap().build().unwrap_err();
        assert!(matches!(err, IglError::InvalidConfig(_)));

        let bad_row = TWO_STEP.replace("[0.1, 0.9]]", "[0.1, 0.8]]");
        let err = EnvSpec::from_toml_str(&bad_row).unwrap().build().unwrap_err();
        assert!(matches!(err, IglError::InvalidModel(_)));

        assert!(EnvSpec::from_toml_str("actions = 2").is_err());
    }
}
