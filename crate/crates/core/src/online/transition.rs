//! Visit counters, the Laplace-smoothed kernel estimate and its log-loss regret.

use crate::env::{LayeredMdp, Trajectory};
use crate::error::{IglError, Result};

/// `N(s, a)` and `N(s, a, s')` for every non-terminal pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionCounts {
    num_actions: usize,
    pairs: Vec<u64>,
    /// `triples[s * K + a][j]` counts moves to the `j`-th state of the next layer.
    triples: Vec<Vec<u64>>,
}

impl TransitionCounts {
    pub fn new(mdp: &LayeredMdp) -> Self {
        let k = mdp.num_actions();
        let non_terminal = mdp.terminal_states().start;
        let triples = (0..non_terminal * k)
            .map(|i| vec![0; mdp.layer(mdp.layer_of(i / k) + 1).len()])
            .collect();
        TransitionCounts {
            num_actions: k,
            pairs: vec![0; non_terminal * k],
            triples,
        }
    }

    /// Adds the `H - 1` transitions of one episode.
    pub fn update(&mut self, mdp: &LayeredMdp, trajectory: &Trajectory) {
        let k = self.num_actions;
        for h in 0..trajectory.states.len() - 1 {
            let (s, a) = (trajectory.states[h], trajectory.actions[h]);
            let j = trajectory.states[h + 1] - mdp.layer(h + 1).start;
            self.pairs[s * k + a] += 1;
            self.triples[s * k + a][j] += 1;
        }
    }

    pub fn pair(&self, state: usize, action: usize) -> u64 {
        self.pairs[state * self.num_actions + action]
    }

    pub fn successors(&self, state: usize, action: usize) -> &[u64] {
        &self.triples[state * self.num_actions + action]
    }

    pub fn total(&self) -> u64 {
        self.pairs.iter().sum()
    }

    /// `P̂(s'|s,a) = (N(s,a,s') + 1) / (N(s,a) + |S_{h+1}|)`, as a kernel on
    /// the same layer structure.
    pub fn estimate(&self, mdp: &LayeredMdp) -> LayeredMdp {
        let rows = self
            .triples
            .iter()
            .zip(&self.pairs)
            .map(|(succ, &n)| laplace_row(succ, n))
            .collect();
        mdp.with_rows(rows).expect("smoothed rows are stochastic")
    }
}

fn laplace_row(successors: &[u64], total: u64) -> Vec<f64> {
    let denom = (total + successors.len() as u64) as f64;
    successors.iter().map(|&c| (c + 1) as f64 / denom).collect()
}

/// Sequential predictive product `Π_b P̂_b(z_b)` of the Laplace estimator on
/// one outcome stream, and the closed form `(S'-1)! Π n_j! / (S'+B-1)!`.
pub fn sequential_product_identity(outcomes: &[usize], num_successors: usize) -> (f64, f64) {
    let mut counts = vec![0u64; num_successors];
    let mut sequential = 1.0;
    for (b, &z) in outcomes.iter().enumerate() {
        sequential *= (counts[z] + 1) as f64 / (b + num_successors) as f64;
        counts[z] += 1;
    }
    // interleave numerator and denominator factors to stay in range
    let mut numerator: Vec<u64> = (1..num_successors as u64).collect();
    for &n in &counts {
        numerator.extend(1..=n);
    }
    let denominator: Vec<u64> = (1..(num_successors + outcomes.len()) as u64).collect();
    debug_assert_eq!(numerator.len(), denominator.len());
    let closed = numerator
        .iter()
        .zip(&denominator)
        .map(|(&a, &b)| a as f64 / b as f64)
        .product();
    (sequential, closed)
}

/// `S² K ln(TH + S)`.
pub fn logloss_regret_bound(num_states: usize, num_actions: usize, episodes: usize, horizon: usize) -> f64 {
    let s = num_states as f64;
    s * s * num_actions as f64 * ((episodes * horizon) as f64 + s).ln()
}

/// Cumulative `Σ_t Σ_h [-ln P̂_t(s_{h+1}) + ln P(s_{h+1})]`, where `P̂_t` is
/// the estimate before episode `t` is counted.
pub fn logloss_regret(truth: &LayeredMdp, trajectories: &[Trajectory]) -> Result<f64> {
    let mut counts = TransitionCounts::new(truth);
    let mut regret = 0.0;
    for t in trajectories {
        for h in 0..t.states.len() - 1 {
            let (s, a) = (t.states[h], t.actions[h]);
            let j = t.states[h + 1] - truth.layer(h + 1).start;
            let p = truth.successors(s, a)[j];
            if p <= 0.0 {
                return Err(IglError::Inconsistent(format!(
                    "observed a transition {s} -> {} that has zero probability under action {a}",
                    t.states[h + 1]
                )));
            }
            let succ = counts.successors(s, a);
            let p_hat = (succ[j] + 1) as f64 / (counts.pair(s, a) + succ.len() as u64) as f64;
            regret += p.ln() - p_hat.ln();
        }
        counts.update(truth, t);
    }
    Ok(regret)
}
