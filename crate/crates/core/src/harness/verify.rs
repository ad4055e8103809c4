//! Brute-force oracles that check the library against closed forms.

use rand::Rng;
use serde::Serialize;

use crate::decoder::{decode, true_posterior, IdentifiabilityConstants};
use crate::env::{Environment, LayeredMdp, Trajectory};
use crate::error::{IglError, Result};
use crate::numeric::linf_distance;
use crate::online::{logloss_regret, logloss_regret_bound, sequential_product_identity};
use crate::rng::SeedStream;

/// Empirical `P[a | x, y, s]` from uniform-action play at a terminal state.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalPosterior {
    pub state: usize,
    num_symbols: usize,
    num_actions: usize,
    /// `counts[(x * ny + y) * K + a]`.
    counts: Vec<u64>,
}

impl EmpiricalPosterior {
    pub fn count(&self, context: usize, symbol: usize) -> u64 {
        self.row(context, symbol).iter().sum()
    }

    fn row(&self, context: usize, symbol: usize) -> &[u64] {
        let i = (context * self.num_symbols + symbol) * self.num_actions;
        &self.counts[i..i + self.num_actions]
    }

    /// Action frequencies, or `None` for an unobserved `(x, y)`.
    pub fn frequencies(&self, context: usize, symbol: usize) -> Option<Vec<f64>> {
        let n = self.count(context, symbol);
        (n > 0).then(|| self.row(context, symbol).iter().map(|&c| c as f64 / n as f64).collect())
    }

    /// Largest `ℓ∞` gap to the true posterior over observed `(x, y)`.
    pub fn max_gap(&self, env: &Environment) -> Result<f64> {
        let mut gap: f64 = 0.0;
        for x in 0..env.contexts().len() {
            for y in 0..self.num_symbols {
                if let Some(freq) = self.frequencies(x, y) {
                    gap = gap.max(linf_distance(&freq, &true_posterior(env, x, y, self.state)?));
                }
            }
        }
        Ok(gap)
    }
}

/// Plays `samples` rounds of `x ~ D`, uniform `a` and `(r, y)` at terminal state `state`.
pub fn monte_carlo_posterior<R: Rng + ?Sized>(
    env: &Environment,
    state: usize,
    samples: usize,
    rng: &mut R,
) -> Result<EmpiricalPosterior> {
    if samples == 0 {
        return Err(IglError::InvalidArgument(
            "Monte Carlo posterior needs at least one sample".into(),
        ));
    }
    if env.mdp().terminal_index(state).is_none() {
        return Err(IglError::InvalidArgument(format!("state {state} is not terminal")));
    }
    let (k, ny) = (env.num_actions(), env.feedback().num_symbols());
    let mut counts = vec![0u64; env.contexts().len() * ny * k];
    for _ in 0..samples {
        let x = env.sample_context(rng);
        let a = rng.gen_range(0..k);
        let (_, y) = env.sample_outcome(x, state, a, rng);
        counts[(x * ny + y) * k + a] += 1;
    }
    Ok(EmpiricalPosterior {
        state,
        num_symbols: ny,
        num_actions: k,
        counts,
    })
}

/// A random layered kernel with a single start state and Dirichlet(1) rows.
pub fn random_layered_mdp<R: Rng + ?Sized>(
    layer_sizes: &[usize],
    num_actions: usize,
    rng: &mut R,
) -> Result<LayeredMdp> {
    let mut rows = Vec::new();
    for h in 0..layer_sizes.len().saturating_sub(1) {
        for _ in 0..layer_sizes[h] * num_actions {
            let raw: Vec<f64> = (0..layer_sizes[h + 1])
                .map(|_| -rng.gen::<f64>().max(1e-300).ln())
                .collect();
            let z: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|v| v / z).collect();
            // the last entry absorbs the rounding remainder
            let last = row.len() - 1;
            let rest: f64 = row[..last].iter().sum();
            row[last] = 1.0 - rest;
            rows.push(row);
        }
    }
    LayeredMdp::new(layer_sizes, num_actions, rows, None)
}

/// Random layer sizes with a singleton first layer and at most `max_states` states.
pub fn random_layer_sizes<R: Rng + ?Sized>(horizon: usize, max_states: usize, rng: &mut R) -> Vec<usize> {
    let mut sizes = vec![1];
    for h in 1..horizon {
        let left = max_states
            .saturating_sub(sizes.iter().sum::<usize>())
            .saturating_sub(horizon - 1 - h);
        sizes.push(rng.gen_range(1..=left.clamp(1, 3)));
    }
    sizes
}

/// One episode of uniformly random actions on a bare kernel.
pub fn random_walk<R: Rng + ?Sized>(mdp: &LayeredMdp, rng: &mut R) -> Trajectory {
    let mut states = vec![mdp.start_state()];
    let mut actions = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let a = rng.gen_range(0..mdp.num_actions());
        actions.push(a);
        if h + 1 < mdp.horizon() {
            states.push(mdp.step(states[h], a, rng));
        }
    }
    Trajectory {
        context: 0,
        states,
        actions,
        reward: false,
        feedback: 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub limit: f64,
    pub cases: usize,
}

impl std::fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (limit {:.3e}) over {} cases",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.limit,
            self.cases
        )
    }
}

/// Relative error between the sequential Laplace product and its closed form
/// on random sequences with at most 5 outcomes and length at most 50.
pub fn verify_dirichlet(sequences: usize, seeds: &SeedStream) -> SuiteOutcome {
    let mut rng = seeds.rng();
    let mut worst: f64 = 0.0;
    for _ in 0..sequences {
        let k = rng.gen_range(1..=5);
        let b = rng.gen_range(0..=50);
        let seq: Vec<usize> = (0..b).map(|_| rng.gen_range(0..k)).collect();
        let (x, y) = sequential_product_identity(&seq, k);
        worst = worst.max(((x - y) / y).abs());
    }
    SuiteOutcome {
        name: "dirichlet-identity",
        passed: worst <= 1e-12,
        worst,
        limit: 1e-12,
        cases: sequences,
    }
}

/// Largest `|J(v,a) - J(v',a)| - L‖v - v'‖∞` over random simplex pairs. Half
/// the pairs are local perturbations, which probe the ramp's slopes.
pub fn verify_lipschitz(constants: &IdentifiabilityConstants, pairs: usize, seeds: &SeedStream) -> SuiteOutcome {
    let mut rng = seeds.rng();
    let k = constants.num_actions;
    let simplex = |rng: &mut crate::rng::IglRng| {
        let raw: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / z).collect::<Vec<_>>()
    };
    let mut worst = f64::NEG_INFINITY;
    for i in 0..pairs {
        let v = simplex(&mut rng);
        let w = if i % 2 == 0 {
            simplex(&mut rng)
        } else {
            let scale = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let bumped: Vec<f64> = v.iter().map(|p| (p + scale * rng.gen::<f64>()).max(0.0)).collect();
            let z: f64 = bumped.iter().sum();
            bumped.into_iter().map(|p| p / z).collect()
        };
        let dist = linf_distance(&v, &w);
        for a in 0..k {
            let excess = (decode(&v, a, constants) - decode(&w, a, constants)).abs() - constants.lipschitz * dist;
            worst = worst.max(excess);
        }
    }
    SuiteOutcome {
        name: "lipschitz",
        passed: worst <= 1e-9,
        worst,
        limit: 1e-9,
        cases: pairs,
    }
}

/// Monte Carlo posterior gap at every terminal state of `env`.
pub fn verify_posterior(env: &Environment, samples: usize, seeds: &SeedStream) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    for s in env.mdp().terminal_states() {
        let mut rng = seeds.child_index(s as u64).rng();
        worst = worst.max(monte_carlo_posterior(env, s, samples, &mut rng)?.max_gap(env)?);
    }
    Ok(SuiteOutcome {
        name: "posterior-monte-carlo",
        passed: worst <= 0.01,
        worst,
        limit: 0.01,
        cases: env.mdp().num_terminal(),
    })
}

/// Ratio of measured log-loss regret to `S²K ln(TH + S)` on random kernels
/// with at most 8 states, 4 actions and horizon 4.
pub fn verify_logloss(instances: usize, episodes: usize, seeds: &SeedStream) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mut rng = seeds.child_index(i as u64).rng();
        let horizon = rng.gen_range(2..=4);
        let sizes = random_layer_sizes(horizon, 8, &mut rng);
        let k = rng.gen_range(1..=4);
        let mdp = random_layered_mdp(&sizes, k, &mut rng)?;
        let stream: Vec<Trajectory> = (0..episodes).map(|_| random_walk(&mdp, &mut rng)).collect();
        let bound = logloss_regret_bound(mdp.num_states(), k, episodes, horizon);
        worst = worst.max(logloss_regret(&mdp, &stream)? / bound);
    }
    Ok(SuiteOutcome {
        name: "logloss-bound",
        passed: worst <= 1.0,
        worst,
        limit: 1.0,
        cases: instances,
    })
}
