use super::{ContextModel, DecoderMap, Environment, FeedbackModel, IdentifiabilityParams, LayeredMdp, RewardTable};
use crate::error::{IglError, Result};
use crate::numeric::compensated_sum;

/// Name of the built-in three-layer benchmark.
pub const SYNTHETIC_PRESET: &str = "synthetic-v1";

const NUM_ACTIONS: usize = 5;

/// The three-layer good/bad benchmark.
///
/// Layers `{s1g}`, `{s2g, s2b}`, `{s3g, s3b}`; five actions. From a good state
/// action `a1` stays good with probability `1 - p`, every other action turns
/// bad with probability `1 - p`; bad states stay bad. At `s3g`, `a1` pays with
/// probability `1 - p_reward` and the rest with `p_reward`; `s3b` never pays.
/// Context `True` (weight 0.7) reports `y = r`, context `False` (0.3) reports
/// `y = 1 - r`.
pub fn build_synthetic_env(p: f64, p_reward: f64) -> Result<Environment> {
    for (name, v) in [("p", p), ("p_reward", p_reward)] {
        if !(v > 0.0 && v < 0.5) {
            return Err(IglError::InvalidConfig(format!("{name} = {v} must lie in (0, 0.5)")));
        }
    }
    let good = |a: usize| {
        if a == 0 {
            vec![1.0 - p, p]
        } else {
            vec![p, 1.0 - p]
        }
    };
    let mut rows = Vec::with_capacity(3 * NUM_ACTIONS);
    // s1g, then s2g, s2b
    rows.extend((0..NUM_ACTIONS).map(good));
    rows.extend((0..NUM_ACTIONS).map(good));
    rows.extend((0..NUM_ACTIONS).map(|_| vec![0.0, 1.0]));
    let labels = ["s1g", "s2g", "s2b", "s3g", "s3b"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mdp = LayeredMdp::new(&[1, 2, 2], NUM_ACTIONS, rows, Some(labels))?;

    let contexts = ContextModel::new(vec!["True".into(), "False".into()], vec![0.7, 0.3])?;
    let good_row: Vec<f64> = (0..NUM_ACTIONS)
        .map(|a| if a == 0 { 1.0 - p_reward } else { p_reward })
        .collect();
    let reward = RewardTable::from_fn(2, 2, NUM_ACTIONS, |_, s, a| if s == 0 { good_row[a] } else { 0.0 })?;
    let flips = |x: usize| x == 1;
    let feedback = FeedbackModel::new(
        reward,
        2,
        |x, _, r| {
            let y = usize::from(r ^ flips(x));
            let mut dist = vec![0.0; 2];
            dist[y] = 1.0;
            dist
        },
        Some(vec![DecoderMap::from_fn(2, 2, |x, y| (y == 1) ^ flips(x)); 2]),
    )?;
    let params = IdentifiabilityParams {
        m: compensated_sum(good_row.iter().copied()),
        c: 0.0,
        theta: good_row[0],
    };
    Environment::new(SYNTHETIC_PRESET, mdp, contexts, feedback, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{StateKind, StatePolicy};
    use crate::rng::SeedStream;

    #[test]
    fn default_parameters_give_published_constants() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let params = env.params();
        assert_eq!(params.m, 1.3);
        assert_eq!(params.theta, 0.9);
        assert_eq!(params.c, 0.0);
        let k = 5.0;
        let sigma = params.theta * (k - params.m) / params.m;
        assert!((sigma - 0.9 * 3.7 / 1.3).abs() < 1e-12);
        assert!(sigma > 1.0);
        let s3g = env.mdp().state_by_label("s3g").unwrap();
        let s3b = env.mdp().state_by_label("s3b").unwrap();
        for x in 0..2 {
            assert_eq!(env.kind(x, s3g), StateKind::Heterogeneous);
            assert_eq!(env.kind(x, s3b), StateKind::Homogeneous);
        }
    }

    #[test]
    fn false_context_flips_feedback() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let s3g = env.mdp().state_by_label("s3g").unwrap();
        assert_eq!(env.channel(1, s3g, true), &[1.0, 0.0]);
        assert_eq!(env.channel(0, s3g, true), &[0.0, 1.0]);
        assert!(!env.decode_true(1, 1, s3g));
        assert!(env.decode_true(0, 1, s3g));
    }

    #[test]
    fn rejects_parameters_outside_open_half_interval() {
        for (p, pr) in [(0.0, 0.1), (0.5, 0.1), (0.1, 0.5), (0.1, -0.2)] {
            assert!(matches!(build_synthetic_env(p, pr), Err(IglError::InvalidConfig(_))));
        }
    }

    #[test]
    fn large_reward_noise_breaks_identifiability() {
        // p_reward = 0.4: sigma = 0.6 * 2.8 / 2.2 < 1
        assert!(matches!(
            build_synthetic_env(0.1, 0.4),
            Err(IglError::Identifiability(_))
        ));
    }

    #[test]
    fn always_a1_reaches_good_terminal_with_probability_0_81() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let policy = StatePolicy::deterministic(&[0; 5], 5).unwrap();
        let s3g = env.mdp().state_by_label("s3g").unwrap();
        let n = 100_000;
        let mut hits = 0;
        for seed in 0..n {
            let mut rng = SeedStream::new(seed).rng();
            let t = env.rollout(0, &policy, &mut rng);
            if t.terminal_state() == s3g {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.81).abs() <= 0.005, "frequency {freq}");
    }

    #[test]
    fn bad_terminal_never_pays() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let s3b = env.mdp().state_by_label("s3b").unwrap();
        let mut rng = SeedStream::new(4).rng();
        for _ in 0..1000 {
            let (r, _) = env.sample_outcome(0, s3b, 2, &mut rng);
            assert!(!r);
        }
    }
}
