//! Homing policies for terminal states and the reliably-reachable set.
//!
//! For each terminal state a tabular optimistic value-iteration learner is run
//! on the dummy reward `1{s_H = target}`. The learner only interacts with the
//! environment through sampled episodes. The homing policy is the uniform
//! mixture over every policy it executed, with the terminal layer forced to
//! the uniform action distribution so that feedback tuples collected later
//! carry uniformly drawn final actions.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;

use crate::env::{reach_distribution, Environment, LayeredMdp, StatePolicy, Trajectory};
use crate::error::{IglError, Result};
use crate::rng::SeedStream;

#[derive(Clone, Debug, PartialEq)]
pub struct HomingPolicy {
    target: usize,
    members: Vec<StatePolicy>,
}

impl HomingPolicy {
    /// Builds a mixture, forcing every member's terminal rows to uniform.
    pub fn new(mdp: &LayeredMdp, target: usize, mut members: Vec<StatePolicy>) -> Result<Self> {
        if mdp.terminal_index(target).is_none() {
            return Err(IglError::InvalidArgument(format!(
                "homing target {target} is not a terminal state"
            )));
        }
        if members.is_empty() {
            return Err(IglError::InvalidArgument(
                "homing mixture needs at least one member".into(),
            ));
        }
        for m in &mut members {
            for s in mdp.terminal_states() {
                m.set_uniform_row(s);
            }
        }
        Ok(HomingPolicy { target, members })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn members(&self) -> &[StatePolicy] {
        &self.members
    }

    /// Exact probability that the mixture ends at its target: the mean of the
    /// members' reach probabilities.
    pub fn reach_probability(&self, mdp: &LayeredMdp) -> f64 {
        let total: f64 = self
            .members
            .iter()
            .map(|m| reach_distribution(mdp, m, 0)[self.target])
            .sum();
        total / self.members.len() as f64
    }

    /// A single Markov policy whose state-action occupancy equals the
    /// mixture's. Rows of states the mixture never visits are uniform.
    pub fn occupancy_equivalent(&self, mdp: &LayeredMdp) -> StatePolicy {
        let k = mdp.num_actions();
        let n = mdp.num_states();
        let mut state_mass = vec![0.0; n];
        let mut pair_mass = vec![0.0; n * k];
        for m in &self.members {
            let d = reach_distribution(mdp, m, 0);
            for s in 0..n {
                state_mass[s] += d[s];
                for (a, &p) in m.row(s).iter().enumerate() {
                    pair_mass[s * k + a] += d[s] * p;
                }
            }
        }
        let mut probs = Vec::with_capacity(n * k);
        for s in 0..n {
            if state_mass[s] > 0.0 {
                let row = &pair_mass[s * k..(s + 1) * k];
                let z: f64 = row.iter().sum();
                probs.extend(row.iter().map(|v| v / z));
            } else {
                probs.extend(std::iter::repeat_n(1.0 / k as f64, k));
            }
        }
        StatePolicy::new(k, probs).expect("normalized rows")
    }

    /// Picks one member uniformly and runs an episode with it.
    pub fn rollout<R: Rng + ?Sized>(&self, env: &Environment, rng: &mut R) -> Trajectory {
        let member = &self.members[rng.gen_range(0..self.members.len())];
        env.sample_episode(member, rng)
    }
}

/// Episode budget `C * S K H log(SKH/δ) / ε²` for homing-policy learning.
pub fn homing_budget(
    constant: f64,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    delta: f64,
    epsilon: f64,
) -> u64 {
    let skh = (num_states * num_actions * horizon) as f64;
    (constant * skh * (skh / delta).ln() / (epsilon * epsilon)).ceil() as u64
}

/// Optimistic tabular planner over the known layer structure.
struct OptimisticLearner<'a> {
    mdp: &'a LayeredMdp,
    visits: Vec<u64>,
    transitions: Vec<Vec<u64>>,
    log_term: f64,
}

impl<'a> OptimisticLearner<'a> {
    fn new(mdp: &'a LayeredMdp, episodes: usize, delta: f64) -> Self {
        let k = mdp.num_actions();
        let non_terminal = mdp.terminal_states().start;
        let transitions = (0..non_terminal * k)
            .map(|i| vec![0; mdp.layer(mdp.layer_of(i / k) + 1).len()])
            .collect();
        let skhn = (mdp.num_states() * k * mdp.horizon() * episodes.max(1)) as f64;
        OptimisticLearner {
            mdp,
            visits: vec![0; non_terminal * k],
            transitions,
            log_term: (2.0 * skhn / delta).ln(),
        }
    }

    fn bonus(&self, n: u64) -> f64 {
        (2.0 * self.log_term / n.max(1) as f64).sqrt()
    }

    /// Greedy policy against clipped optimistic values; ties go to the lowest action.
    fn plan(&self, target: usize) -> StatePolicy {
        let mdp = self.mdp;
        let k = mdp.num_actions();
        let mut value = vec![0.0; mdp.num_states()];
        value[target] = 1.0;
        let mut greedy = vec![0usize; mdp.num_states()];
        for h in (0..mdp.horizon() - 1).rev() {
            let next = mdp.layer(h + 1);
            for s in mdp.layer(h) {
                let mut best = (0usize, f64::NEG_INFINITY);
                for a in 0..k {
                    let n = self.visits[s * k + a];
                    let q = if n == 0 {
                        1.0
                    } else {
                        let mean: f64 = self.transitions[s * k + a]
                            .iter()
                            .enumerate()
                            .map(|(j, &c)| c as f64 * value[next.start + j])
                            .sum::<f64>()
                            / n as f64;
                        (mean + self.bonus(n)).min(1.0)
                    };
                    if q > best.1 {
                        best = (a, q);
                    }
                }
                value[s] = best.1;
                greedy[s] = best.0;
            }
        }
        StatePolicy::deterministic(&greedy, k).expect("actions in range")
    }

    fn observe(&mut self, trajectory: &Trajectory) {
        let k = self.mdp.num_actions();
        for h in 0..trajectory.states.len() - 1 {
            let (s, a) = (trajectory.states[h], trajectory.actions[h]);
            let next = trajectory.states[h + 1] - self.mdp.layer(h + 1).start;
            self.visits[s * k + a] += 1;
            self.transitions[s * k + a][next] += 1;
        }
    }
}

/// Learns a homing policy for `target` from `episodes` interactions.
pub fn learn_homing_policy<R: Rng + ?Sized>(
    env: &Environment,
    target: usize,
    episodes: usize,
    delta: f64,
    rng: &mut R,
) -> Result<HomingPolicy> {
    let mdp = env.mdp();
    if mdp.terminal_index(target).is_none() {
        return Err(IglError::InvalidArgument(format!(
            "homing target {target} is not a terminal state"
        )));
    }
    if episodes == 0 {
        return Err(IglError::InvalidArgument(
            "homing budget must be at least one episode".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(IglError::InvalidArgument(format!("delta = {delta} must lie in (0, 1)")));
    }
    let mut learner = OptimisticLearner::new(mdp, episodes, delta);
    let mut members = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut policy = learner.plan(target);
        for s in mdp.terminal_states() {
            policy.set_uniform_row(s);
        }
        let trajectory = env.sample_episode(&policy, rng);
        learner.observe(&trajectory);
        members.push(policy);
    }
    HomingPolicy::new(mdp, target, members)
}

/// One homing policy per terminal state, learned in parallel on independent streams.
pub fn learn_all_homing_policies(
    env: &Environment,
    episodes: usize,
    delta: f64,
    seeds: &SeedStream,
) -> Result<Vec<HomingPolicy>> {
    env.mdp()
        .terminal_states()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|s| {
            let mut rng = seeds.child_index(s as u64).rng();
            learn_homing_policy(env, s, episodes, delta, &mut rng)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct VisitationStats {
    pub state: usize,
    /// Empirical frequency of ending at `state`.
    pub p_hat: f64,
    pub samples: usize,
    pub beta: f64,
}

/// Hoeffding width `sqrt(log(SKH/δ) / (2N))`.
pub fn concentration_width(num_states: usize, num_actions: usize, horizon: usize, delta: f64, samples: usize) -> f64 {
    let skh = (num_states * num_actions * horizon) as f64;
    ((skh / delta).ln() / (2.0 * samples as f64)).sqrt()
}

/// Runs the homing mixture for `samples` episodes and counts arrivals at its target.
pub fn estimate_visitation<R: Rng + ?Sized>(
    homing: &HomingPolicy,
    env: &Environment,
    samples: usize,
    delta: f64,
    rng: &mut R,
) -> Result<VisitationStats> {
    if samples == 0 {
        return Err(IglError::InvalidArgument(
            "visitation estimate needs at least one episode".into(),
        ));
    }
    let hits = (0..samples)
        .filter(|_| homing.rollout(env, rng).terminal_state() == homing.target())
        .count();
    let mdp = env.mdp();
    Ok(VisitationStats {
        state: homing.target(),
        p_hat: hits as f64 / samples as f64,
        samples,
        beta: concentration_width(mdp.num_states(), mdp.num_actions(), mdp.horizon(), delta, samples),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reachability {
    /// `p̂ ≥ τ + β`: the homing policy (hence the optimum) reaches the state w.p. at least τ.
    AboveThreshold,
    /// `p̂ ≤ τ − (β + ε)`: the best achievable reach probability is at most τ.
    BelowThreshold,
    Indeterminate,
}

pub fn classify_reachability(stats: &VisitationStats, tau: f64, epsilon: f64) -> Result<Reachability> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(IglError::InvalidArgument(format!("tau = {tau} must lie in (0, 1)")));
    }
    Ok(if stats.p_hat >= tau + stats.beta {
        Reachability::AboveThreshold
    } else if stats.p_hat <= tau - (stats.beta + epsilon) {
        Reachability::BelowThreshold
    } else {
        Reachability::Indeterminate
    })
}

/// Terminal states whose empirical visitation is at least `4ε`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachableSet {
    states: BTreeSet<usize>,
    epsilon_bits: u64,
}

impl ReachableSet {
    pub fn from_states(states: impl IntoIterator<Item = usize>, epsilon: f64) -> Self {
        ReachableSet {
            states: states.into_iter().collect(),
            epsilon_bits: epsilon.to_bits(),
        }
    }

    pub fn contains(&self, state: usize) -> bool {
        self.states.contains(&state)
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.states.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        f64::from_bits(self.epsilon_bits)
    }
}

pub fn build_reachable_set(stats: &[VisitationStats], epsilon: f64) -> Result<ReachableSet> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(IglError::InvalidArgument(format!(
            "epsilon = {epsilon} must lie in (0, 1/4)"
        )));
    }
    Ok(ReachableSet::from_states(
        stats.iter().filter(|st| st.p_hat >= 4.0 * epsilon).map(|st| st.state),
        epsilon,
    ))
}
