//! Ground-truth layered contextual MDP with a latent terminal reward and a
//! feedback channel.
//!
//! States, actions, contexts and feedback symbols are dense integer indices.
//! States carry a global index; layer `h` owns the contiguous range
//! [`LayeredMdp::layer`]`(h)`. Human-readable labels live in side tables.

mod dp;
pub mod file;
mod synthetic;

use std::ops::Range;

use rand::Rng;

use crate::error::{IglError, Result};
use crate::numeric::{compensated_sum, is_probability_vector};
use crate::rng::sample_index;

pub use dp::{exact_value, max_reach_probability, optimal_value, reach_distribution};
pub use synthetic::{build_synthetic_env, SYNTHETIC_PRESET};

/// Tolerance on transition-row and policy-row normalization.
pub const ROW_TOLERANCE: f64 = 1e-12;
/// Tolerance of the homogeneous-equality and heterogeneous-bound checks.
pub const IDENTIFIABILITY_TOLERANCE: f64 = 1e-9;
/// Tolerance on policy rows, which are usually produced by arithmetic rather than typed in.
pub const POLICY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredMdp {
    offsets: Vec<usize>,
    num_actions: usize,
    /// `rows[s * K + a]` is the successor distribution over layer `h + 1`
    /// (local indices) for every non-terminal state `s`.
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl LayeredMdp {
    /// Builds a layered kernel. `rows` lists, for every non-terminal state in
    /// global order, one successor distribution per action.
    pub fn new(
        layer_sizes: &[usize],
        num_actions: usize,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if layer_sizes.is_empty() {
            return Err(IglError::InvalidModel("horizon must be positive".into()));
        }
        if layer_sizes[0] != 1 {
            return Err(IglError::InvalidModel(format!(
                "start layer must be a singleton, got {} states",
                layer_sizes[0]
            )));
        }
        if let Some(h) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(IglError::InvalidModel(format!("layer {} is empty", h + 1)));
        }
        if num_actions == 0 {
            return Err(IglError::InvalidModel("action count must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(layer_sizes.len() + 1);
        offsets.push(0);
        for &n in layer_sizes {
            offsets.push(offsets.last().unwrap() + n);
        }
        let num_states = *offsets.last().unwrap();
        let horizon = layer_sizes.len();
        let non_terminal = offsets[horizon - 1];
        if rows.len() != non_terminal * num_actions {
            return Err(IglError::InvalidModel(format!(
                "expected {} transition rows ({} non-terminal states x {} actions), got {}",
                non_terminal * num_actions,
                non_terminal,
                num_actions,
                rows.len()
            )));
        }
        for h in 0..horizon - 1 {
            let next = layer_sizes[h + 1];
            for s in offsets[h]..offsets[h + 1] {
                for a in 0..num_actions {
                    let row = &rows[s * num_actions + a];
                    if row.len() != next {
                        return Err(IglError::InvalidModel(format!(
                            "transition row for state {s}, action {a} has {} entries; layer {} has {next} states",
                            row.len(),
                            h + 2
                        )));
                    }
                    if !is_probability_vector(row, ROW_TOLERANCE) {
                        return Err(IglError::InvalidModel(format!(
                            "transition row for state {s}, action {a} is not a probability vector: {row:?}"
                        )));
                    }
                }
            }
        }
        let labels = match labels {
            Some(l) if l.len() == num_states => l,
            Some(l) => {
                return Err(IglError::InvalidModel(format!(
                    "{} state labels for {num_states} states",
                    l.len()
                )))
            }
            None => (0..num_states).map(|s| format!("s{s}")).collect(),
        };
        Ok(LayeredMdp {
            offsets,
            num_actions,
            rows,
            labels,
        })
    }

    /// Same layout with different transition rows (e.g. an estimated kernel).
    pub fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<Self> {
        LayeredMdp::new(&self.layer_sizes(), self.num_actions, rows, Some(self.labels.clone()))
    }

    pub fn horizon(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_states(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Global state range of layer `h` (0-based).
    pub fn layer(&self, h: usize) -> Range<usize> {
        self.offsets[h]..self.offsets[h + 1]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn layer_of(&self, state: usize) -> usize {
        debug_assert!(state < self.num_states());
        self.offsets.partition_point(|&o| o <= state) - 1
    }

    pub fn start_state(&self) -> usize {
        0
    }

    pub fn terminal_states(&self) -> Range<usize> {
        self.layer(self.horizon() - 1)
    }

    pub fn num_terminal(&self) -> usize {
        self.terminal_states().len()
    }

    /// Position of `state` inside the terminal layer.
    pub fn terminal_index(&self, state: usize) -> Option<usize> {
        let t = self.terminal_states();
        t.contains(&state).then(|| state - t.start)
    }

    /// Successor distribution over the next layer, indexed locally.
    pub fn successors(&self, state: usize, action: usize) -> &[f64] {
        &self.rows[state * self.num_actions + action]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn state_by_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Samples the successor of `(state, action)` as a global index.
    pub fn step<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> usize {
        let h = self.layer_of(state);
        self.offsets[h + 1] + sample_index(self.successors(state, action), rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextModel {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl ContextModel {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(IglError::InvalidModel(
                "context labels and weights differ in length".into(),
            ));
        }
        if !is_probability_vector(&probs, ROW_TOLERANCE) {
            return Err(IglError::InvalidModel(format!(
                "context distribution is not a probability vector: {probs:?}"
            )));
        }
        Ok(ContextModel { labels, probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }
}

/// Dense table over (context, terminal state, action); terminal states use
/// their local index inside the terminal layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardTable {
    num_contexts: usize,
    num_terminal: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn from_fn(
        num_contexts: usize,
        num_terminal: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(num_contexts * num_terminal * num_actions);
        for x in 0..num_contexts {
            for s in 0..num_terminal {
                for a in 0..num_actions {
                    let v = f(x, s, a);
                    if !(0.0..=1.0).contains(&v) {
                        return Err(IglError::InvalidModel(format!(
                            "reward {v} at (context {x}, terminal {s}, action {a}) outside [0, 1]"
                        )));
                    }
                    values.push(v);
                }
            }
        }
        Ok(RewardTable {
            num_contexts,
            num_terminal,
            num_actions,
            values,
        })
    }

    pub fn get(&self, context: usize, terminal: usize, action: usize) -> f64 {
        self.values[(context * self.num_terminal + terminal) * self.num_actions + action]
    }

    pub fn row(&self, context: usize, terminal: usize) -> &[f64] {
        let start = (context * self.num_terminal + terminal) * self.num_actions;
        &self.values[start..start + self.num_actions]
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_terminal(&self) -> usize {
        self.num_terminal
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
}

/// A binary map `(context, feedback symbol) -> {0, 1}` for one terminal state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecoderMap {
    num_symbols: usize,
    bits: Vec<bool>,
}

impl DecoderMap {
    pub fn from_fn(num_contexts: usize, num_symbols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(num_contexts * num_symbols);
        for x in 0..num_contexts {
            for y in 0..num_symbols {
                bits.push(f(x, y));
            }
        }
        DecoderMap { num_symbols, bits }
    }

    pub fn get(&self, context: usize, symbol: usize) -> bool {
        self.bits[context * self.num_symbols + symbol]
    }

    pub fn num_contexts(&self) -> usize {
        self.bits.len() / self.num_symbols
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn complement(&self) -> Self {
        DecoderMap {
            num_symbols: self.num_symbols,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

/// Latent reward, decoder and feedback channel. The channel is indexed by
/// `(context, terminal state, realized reward)` only, so feedback is
/// conditionally independent of the trajectory prefix and final action.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackModel {
    reward: RewardTable,
    num_symbols: usize,
    /// `channel[((x * S_H + s) * 2 + r) * Y + y]`
    channel: Vec<f64>,
    decoders: Vec<DecoderMap>,
}

impl FeedbackModel {
    /// `channel(x, s, r)` returns the feedback distribution for terminal state
    /// `s` (local index). When `decoders` is `None` the decoder is derived from
    /// the channel supports, which must then be disjoint between `r = 0` and `r = 1`.
    pub fn new(
        reward: RewardTable,
        num_symbols: usize,
        mut channel: impl FnMut(usize, usize, bool) -> Vec<f64>,
        decoders: Option<Vec<DecoderMap>>,
    ) -> Result<Self> {
        if num_symbols == 0 {
            return Err(IglError::InvalidModel("feedback alphabet is empty".into()));
        }
        let nx = reward.num_contexts();
        let ns = reward.num_terminal();
        let mut table = Vec::with_capacity(nx * ns * 2 * num_symbols);
        for x in 0..nx {
            for s in 0..ns {
                for r in [false, true] {
                    let row = channel(x, s, r);
                    if row.len() != num_symbols || !is_probability_vector(&row, ROW_TOLERANCE) {
                        return Err(IglError::InvalidModel(format!(
                            "feedback distribution for (context {x}, terminal {s}, r = {}) is not a probability vector over {num_symbols} symbols: {row:?}",
                            u8::from(r)
                        )));
                    }
                    table.extend(row);
                }
            }
        }
        let prob = |x: usize, s: usize, r: bool, y: usize| table[((x * ns + s) * 2 + usize::from(r)) * num_symbols + y];
        let decoders = match decoders {
            Some(d) => {
                if d.len() != ns {
                    return Err(IglError::InvalidModel(format!(
                        "{} decoders for {ns} terminal states",
                        d.len()
                    )));
                }
                for (s, map) in d.iter().enumerate() {
                    if map.num_contexts() != nx || map.num_symbols() != num_symbols {
                        return Err(IglError::InvalidModel(format!(
                            "decoder for terminal {s} has the wrong shape"
                        )));
                    }
                    for x in 0..nx {
                        for r in [false, true] {
                            for y in 0..num_symbols {
                                if prob(x, s, r, y) > 0.0 && map.get(x, y) != r {
                                    return Err(IglError::InvalidModel(format!(
                                        "decoder disagrees with the channel at (context {x}, terminal {s}, symbol {y})"
                                    )));
                                }
                            }
                        }
                    }
                }
                d
            }
            None => {
                let mut d = Vec::with_capacity(ns);
                for s in 0..ns {
                    for x in 0..nx {
                        for y in 0..num_symbols {
                            if prob(x, s, false, y) > 0.0 && prob(x, s, true, y) > 0.0 {
                                return Err(IglError::InvalidModel(format!(
                                    "symbol {y} is emitted under both rewards at (context {x}, terminal {s}); no consistent decoder exists"
                                )));
                            }
                        }
                    }
                    d.push(DecoderMap::from_fn(nx, num_symbols, |x, y| prob(x, s, true, y) > 0.0));
                }
                d
            }
        };
        Ok(FeedbackModel {
            reward,
            num_symbols,
            channel: table,
            decoders,
        })
    }

    pub fn reward_table(&self) -> &RewardTable {
        &self.reward
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn channel(&self, context: usize, terminal: usize, reward: bool) -> &[f64] {
        let start = ((context * self.reward.num_terminal() + terminal) * 2 + usize::from(reward)) * self.num_symbols;
        &self.channel[start..start + self.num_symbols]
    }

    pub fn decoder(&self, terminal: usize) -> &DecoderMap {
        &self.decoders[terminal]
    }

    pub fn decoders(&self) -> &[DecoderMap] {
        &self.decoders
    }

    /// `P(y | x, s, a)` after marginalizing the realized reward.
    pub fn symbol_probability(&self, context: usize, terminal: usize, action: usize, symbol: usize) -> f64 {
        let f = self.reward.get(context, terminal, action);
        f * self.channel(context, terminal, true)[symbol] + (1.0 - f) * self.channel(context, terminal, false)[symbol]
    }
}

/// Known identifiability constants `(M, c, θ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentifiabilityParams {
    pub m: f64,
    pub c: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateKind {
    Heterogeneous,
    Homogeneous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub context: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub reward: bool,
    pub feedback: usize,
}

impl Trajectory {
    pub fn terminal_state(&self) -> usize {
        *self.states.last().expect("trajectory has at least one step")
    }

    pub fn terminal_action(&self) -> usize {
        *self.actions.last().expect("trajectory has at least one step")
    }
}

/// Anything that yields an action distribution for `(context, state)`.
pub trait PolicyView {
    fn action_probs(&self, context: usize, state: usize) -> &[f64];
}

/// A context-independent tabular policy.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePolicy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl StatePolicy {
    /// `probs` is laid out row-major: `probs[s * K + a]`.
    pub fn new(num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || !probs.len().is_multiple_of(num_actions) {
            return Err(IglError::InvalidModel(format!(
                "policy table of length {} is not a multiple of {num_actions} actions",
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            if !is_probability_vector(row, POLICY_TOLERANCE) {
                return Err(IglError::InvalidModel(format!(
                    "policy row for state {s} is not a probability vector: {row:?}"
                )));
            }
        }
        Ok(StatePolicy { num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        StatePolicy {
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(IglError::InvalidModel(format!("action {a} out of range for state {s}")));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(StatePolicy { num_actions, probs })
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn set_uniform_row(&mut self, state: usize) {
        let k = self.num_actions;
        self.probs[state * k..(state + 1) * k].fill(1.0 / k as f64);
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
}

impl PolicyView for StatePolicy {
    fn action_probs(&self, _context: usize, state: usize) -> &[f64] {
        self.row(state)
    }
}

/// A policy `X x S -> Δ(A)`, stored as one [`StatePolicy`] per context.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    per_context: Vec<StatePolicy>,
}

impl TabularPolicy {
    pub fn from_contexts(per_context: Vec<StatePolicy>) -> Result<Self> {
        let Some(first) = per_context.first() else {
            return Err(IglError::InvalidModel("policy needs at least one context".into()));
        };
        let shape = (first.num_states(), first.num_actions());
        if per_context.iter().any(|p| (p.num_states(), p.num_actions()) != shape) {
            return Err(IglError::InvalidModel("per-context policies differ in shape".into()));
        }
        Ok(TabularPolicy { per_context })
    }

    pub fn context_independent(policy: StatePolicy, num_contexts: usize) -> Self {
        TabularPolicy {
            per_context: vec![policy; num_contexts],
        }
    }

    pub fn uniform(num_contexts: usize, num_states: usize, num_actions: usize) -> Self {
        Self::context_independent(StatePolicy::uniform(num_states, num_actions), num_contexts)
    }

    pub fn for_context(&self, context: usize) -> &StatePolicy {
        &self.per_context[context]
    }

    pub fn num_contexts(&self) -> usize {
        self.per_context.len()
    }
}

impl PolicyView for TabularPolicy {
    fn action_probs(&self, context: usize, state: usize) -> &[f64] {
        self.per_context[context].row(state)
    }
}

/// The full environment bundle: dynamics, contexts, latent reward and feedback.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    name: String,
    mdp: LayeredMdp,
    contexts: ContextModel,
    feedback: FeedbackModel,
    params: IdentifiabilityParams,
    kinds: Vec<StateKind>,
}

impl Environment {
    /// Assembles an environment and verifies that every (context, terminal
    /// state) pair is either heterogeneous or homogeneous under `params`.
    pub fn new(
        name: impl Into<String>,
        mdp: LayeredMdp,
        contexts: ContextModel,
        feedback: FeedbackModel,
        params: IdentifiabilityParams,
    ) -> Result<Self> {
        let rt = feedback.reward_table();
        if rt.num_contexts() != contexts.len()
            || rt.num_terminal() != mdp.num_terminal()
            || rt.num_actions() != mdp.num_actions()
        {
            return Err(IglError::InvalidModel(format!(
                "reward table shape ({} contexts, {} terminal, {} actions) does not match the environment ({}, {}, {})",
                rt.num_contexts(),
                rt.num_terminal(),
                rt.num_actions(),
                contexts.len(),
                mdp.num_terminal(),
                mdp.num_actions()
            )));
        }
        let k = mdp.num_actions() as f64;
        let IdentifiabilityParams { m, c, theta } = params;
        if !(m > 0.0 && m < k / 2.0) {
            return Err(IglError::Identifiability(format!(
                "M = {m} must lie in (0, K/2) = (0, {})",
                k / 2.0
            )));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(IglError::Identifiability(format!("theta = {theta} must lie in (0, 1)")));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(IglError::Identifiability(format!("c = {c} must lie in [0, 1]")));
        }
        let sigma = theta * (k - m) / m;
        let mut kinds = Vec::with_capacity(contexts.len() * mdp.num_terminal());
        for x in 0..contexts.len() {
            for s in 0..mdp.num_terminal() {
                let row = rt.row(x, s);
                let homogeneous = row.iter().all(|&f| (f - c).abs() <= IDENTIFIABILITY_TOLERANCE);
                let kind = if homogeneous {
                    StateKind::Homogeneous
                } else {
                    let total = compensated_sum(row.iter().copied());
                    let max = row.iter().copied().fold(f64::MIN, f64::max);
                    if total <= m + IDENTIFIABILITY_TOLERANCE && max >= theta - IDENTIFIABILITY_TOLERANCE && sigma > 1.0
                    {
                        StateKind::Heterogeneous
                    } else {
                        return Err(IglError::Identifiability(format!(
                            "terminal state {} under context {} is neither homogeneous (c = {c}) nor heterogeneous (sum {total} vs M = {m}, max {max} vs theta = {theta}, sigma = {sigma})",
                            mdp.label(mdp.terminal_states().start + s),
                            contexts.labels()[x]
                        )));
                    }
                };
                kinds.push(kind);
            }
        }
        Ok(Environment {
            name: name.into(),
            mdp,
            contexts,
            feedback,
            params,
            kinds,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mdp(&self) -> &LayeredMdp {
        &self.mdp
    }

    pub fn contexts(&self) -> &ContextModel {
        &self.contexts
    }

    pub fn feedback(&self) -> &FeedbackModel {
        &self.feedback
    }

    pub fn params(&self) -> IdentifiabilityParams {
        self.params
    }

    pub fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    /// Kind of terminal state `state` (global index) under `context`.
    pub fn kind(&self, context: usize, state: usize) -> StateKind {
        let s = self.terminal(state);
        self.kinds[context * self.mdp.num_terminal() + s]
    }

    /// `f*(x, s, a)` for a terminal state given by its global index.
    pub fn reward(&self, context: usize, state: usize, action: usize) -> f64 {
        self.feedback.reward_table().get(context, self.terminal(state), action)
    }

    pub fn reward_row(&self, context: usize, state: usize) -> &[f64] {
        self.feedback.reward_table().row(context, self.terminal(state))
    }

    /// `φ*(x, y, s)`.
    pub fn decode_true(&self, context: usize, symbol: usize, state: usize) -> bool {
        self.feedback.decoder(self.terminal(state)).get(context, symbol)
    }

    pub fn channel(&self, context: usize, state: usize, reward: bool) -> &[f64] {
        self.feedback.channel(context, self.terminal(state), reward)
    }

    pub fn symbol_probability(&self, context: usize, state: usize, action: usize, symbol: usize) -> f64 {
        self.feedback
            .symbol_probability(context, self.terminal(state), action, symbol)
    }

    fn terminal(&self, state: usize) -> usize {
        self.mdp
            .terminal_index(state)
            .unwrap_or_else(|| panic!("state {state} is not in the terminal layer"))
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.contexts.sample(rng)
    }

    /// Draws the terminal reward and feedback for `(x, s_H, a_H)`.
    pub fn sample_outcome<R: Rng + ?Sized>(
        &self,
        context: usize,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> (bool, usize) {
        let reward = rng.gen::<f64>() < self.reward(context, state, action);
        let feedback = sample_index(self.channel(context, state, reward), rng);
        (reward, feedback)
    }

    /// Runs one episode under `policy` for a given context.
    pub fn rollout<P: PolicyView + ?Sized, R: Rng + ?Sized>(
        &self,
        context: usize,
        policy: &P,
        rng: &mut R,
    ) -> Trajectory {
        let horizon = self.mdp.horizon();
        let mut states = Vec::with_capacity(horizon);
        let mut actions = Vec::with_capacity(horizon);
        let mut s = self.mdp.start_state();
        for h in 0..horizon {
            let a = sample_index(policy.action_probs(context, s), rng);
            states.push(s);
            actions.push(a);
            if h + 1 < horizon {
                s = self.mdp.step(s, a, rng);
            }
        }
        let (reward, feedback) = self.sample_outcome(context, s, *actions.last().unwrap(), rng);
        Trajectory {
            context,
            states,
            actions,
            reward,
            feedback,
        }
    }

    /// Samples a context and runs one episode.
    pub fn sample_episode<P: PolicyView + ?Sized, R: Rng + ?Sized>(&self, policy: &P, rng: &mut R) -> Trajectory {
        let x = self.sample_context(rng);
        self.rollout(x, policy, rng)
    }

    /// Expected value `V(π)` under the latent reward, by dynamic programming.
    pub fn value<P: PolicyView + ?Sized>(&self, policy: &P) -> f64 {
        exact_value(self, policy, |x, s, a| self.reward(x, s, a))
    }
}
