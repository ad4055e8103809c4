use super::{Environment, LayeredMdp, PolicyView, StatePolicy, TabularPolicy};

/// Probability of visiting each state (global index) when `policy` runs under `context`.
pub fn reach_distribution<P: PolicyView + ?Sized>(mdp: &LayeredMdp, policy: &P, context: usize) -> Vec<f64> {
    let mut dist = vec![0.0; mdp.num_states()];
    dist[mdp.start_state()] = 1.0;
    for h in 0..mdp.horizon() - 1 {
        let next = mdp.layer(h + 1);
        for s in mdp.layer(h) {
            let mass = dist[s];
            if mass == 0.0 {
                continue;
            }
            for (a, &pa) in policy.action_probs(context, s).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (j, &p) in mdp.successors(s, a).iter().enumerate() {
                    dist[next.start + j] += mass * pa * p;
                }
            }
        }
    }
    dist
}

/// `E[R(x, s_H, a_H)]` under `policy`, over contexts and trajectories.
///
/// `reward(x, s, a)` receives the global index of the terminal state.
pub fn exact_value<P, F>(env: &Environment, policy: &P, reward: F) -> f64
where
    P: PolicyView + ?Sized,
    F: Fn(usize, usize, usize) -> f64,
{
    let mdp = env.mdp();
    env.contexts()
        .probs()
        .iter()
        .enumerate()
        .map(|(x, &px)| {
            let dist = reach_distribution(mdp, policy, x);
            let inner: f64 = mdp
                .terminal_states()
                .map(|s| {
                    dist[s]
                        * policy
                            .action_probs(x, s)
                            .iter()
                            .enumerate()
                            .map(|(a, &pa)| pa * reward(x, s, a))
                            .sum::<f64>()
                })
                .sum();
            px * inner
        })
        .sum()
}

/// Largest probability with which any policy ends in terminal state `target`.
pub fn max_reach_probability(mdp: &LayeredMdp, target: usize) -> f64 {
    let mut value = vec![0.0; mdp.num_states()];
    value[target] = 1.0;
    for h in (0..mdp.horizon() - 1).rev() {
        let next = mdp.layer(h + 1);
        for s in mdp.layer(h) {
            value[s] = (0..mdp.num_actions())
                .map(|a| {
                    mdp.successors(s, a)
                        .iter()
                        .enumerate()
                        .map(|(j, &p)| p * value[next.start + j])
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    value[mdp.start_state()]
}

/// `V*` and a deterministic maximizer, by backward induction per context.
/// Ties resolve to the lowest action index.
pub fn optimal_value(env: &Environment) -> (f64, TabularPolicy) {
    let mdp = env.mdp();
    let k = mdp.num_actions();
    let mut total = 0.0;
    let mut per_context = Vec::with_capacity(env.contexts().len());
    for (x, &px) in env.contexts().probs().iter().enumerate() {
        let mut value = vec![0.0; mdp.num_states()];
        let mut choice = vec![0usize; mdp.num_states()];
        for h in (0..mdp.horizon()).rev() {
            for s in mdp.layer(h) {
                let q = |a: usize| {
                    if h + 1 == mdp.horizon() {
                        env.reward(x, s, a)
                    } else {
                        let next = mdp.layer(h + 1);
                        mdp.successors(s, a)
                            .iter()
                            .enumerate()
                            .map(|(j, &p)| p * value[next.start + j])
                            .sum()
                    }
                };
                let (best_a, best_q) =
                    (0..k).map(|a| (a, q(a))).fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (a, v)| if v > acc.1 { (a, v) } else { acc },
                    );
                value[s] = best_q;
                choice[s] = best_a;
            }
        }
        total += px * value[mdp.start_state()];
        per_context.push(StatePolicy::deterministic(&choice, k).expect("actions in range"));
    }
    let policy = TabularPolicy::from_contexts(per_context).expect("consistent shapes");
    (total, policy)
}
