//! Inverse-kinematics posteriors, the finite hypothesis class and its ERM fit.

use rayon::prelude::*;

use super::dataset::TupleDataset;
use super::lipschitz::{decode, IdentifiabilityConstants};
use crate::env::{DecoderMap, Environment, RewardTable};
use crate::error::{IglError, Result};
use crate::numeric::{compensated_sum, linf_distance, squared_distance};

/// Largest `|X| * |Y|` for which the default class enumerates every decoder.
pub const FULL_DECODER_ENUMERATION_LIMIT: usize = 8;

/// Posterior of the final action given `φ`, for a reward row `f(x, s, ·)`.
///
/// `φ = 1` needs `Σ f > 0` and `φ = 0` needs `Σ f < K`; otherwise the
/// conditioning event has probability zero.
pub fn posterior_vector(f_row: &[f64], phi: bool) -> Result<Vec<f64>> {
    let k = f_row.len() as f64;
    let q = compensated_sum(f_row.iter().copied());
    if phi {
        if q <= 0.0 {
            return Err(IglError::UndefinedPosterior(
                "decoder reports reward 1 where the reward mass is 0".into(),
            ));
        }
        Ok(f_row.iter().map(|f| f / q).collect())
    } else {
        if q >= k {
            return Err(IglError::UndefinedPosterior(
                "decoder reports reward 0 where every action always pays".into(),
            ));
        }
        Ok(f_row.iter().map(|f| (1.0 - f) / (k - q)).collect())
    }
}

/// `h*(x, y, s)` for a terminal state given by its global index.
pub fn true_posterior(env: &Environment, context: usize, symbol: usize, state: usize) -> Result<Vec<f64>> {
    posterior_vector(env.reward_row(context, state), env.decode_true(context, symbol, state))
}

/// `P(y | x, s)` when the final action is uniform.
pub fn symbol_marginal(env: &Environment, context: usize, state: usize, symbol: usize) -> f64 {
    let k = env.num_actions();
    (0..k)
        .map(|a| env.symbol_probability(context, state, a, symbol))
        .sum::<f64>()
        / k as f64
}

/// `f̲*(x, s, a) = E_{y|x,s,a}[J(h*(x, y, s), a)]` over every terminal state.
pub fn lower_bound_reward(env: &Environment, constants: &IdentifiabilityConstants) -> Result<RewardTable> {
    let mdp = env.mdp();
    let ny = env.feedback().num_symbols();
    let mut values = Vec::new();
    for x in 0..env.contexts().len() {
        for s in mdp.terminal_states() {
            for a in 0..env.num_actions() {
                let mut total = 0.0;
                for y in 0..ny {
                    let p = env.symbol_probability(x, s, a, y);
                    if p > 0.0 {
                        total += p * decode(&true_posterior(env, x, y, s)?, a, constants);
                    }
                }
                values.push(total.clamp(0.0, 1.0));
            }
        }
    }
    let nt = mdp.num_terminal();
    let k = env.num_actions();
    RewardTable::from_fn(env.contexts().len(), nt, k, |x, s, a| values[(x * nt + s) * k + a])
}

/// One element of `𝓗_s`: the posterior induced by a reward candidate and a
/// decoder candidate, tabulated over `(x, y)`. Entries are `None` where the
/// pair conditions on a zero-probability event.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorHypothesis {
    state: usize,
    reward_index: usize,
    decoder_index: usize,
    num_symbols: usize,
    table: Vec<Option<Vec<f64>>>,
}

impl PosteriorHypothesis {
    fn build(
        state: usize,
        terminal: usize,
        reward_index: usize,
        reward: &RewardTable,
        decoder_index: usize,
        decoder: &DecoderMap,
    ) -> Self {
        let ny = decoder.num_symbols();
        let mut table = Vec::with_capacity(decoder.num_contexts() * ny);
        for x in 0..decoder.num_contexts() {
            for y in 0..ny {
                table.push(posterior_vector(reward.row(x, terminal), decoder.get(x, y)).ok());
            }
        }
        PosteriorHypothesis {
            state,
            reward_index,
            decoder_index,
            num_symbols: ny,
            table,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn reward_index(&self) -> usize {
        self.reward_index
    }

    pub fn decoder_index(&self) -> usize {
        self.decoder_index
    }

    pub fn posterior(&self, context: usize, symbol: usize) -> Option<&[f64]> {
        self.table[context * self.num_symbols + symbol].as_deref()
    }

    pub fn predict(&self, context: usize, symbol: usize) -> Result<&[f64]> {
        self.posterior(context, symbol).ok_or_else(|| {
            IglError::UndefinedPosterior(format!(
                "hypothesis ({}, {}) at state {} is undefined on (context {context}, symbol {symbol})",
                self.reward_index, self.decoder_index, self.state
            ))
        })
    }
}

/// Finite reward class `𝓕` shared by all states and decoder candidates `Φ_s`
/// per terminal state.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteHypothesisClass {
    first_terminal: usize,
    rewards: Vec<RewardTable>,
    decoders: Vec<Vec<DecoderMap>>,
}

impl FiniteHypothesisClass {
    /// `decoders[t]` lists the candidates for the `t`-th terminal state.
    pub fn new(env: &Environment, rewards: Vec<RewardTable>, decoders: Vec<Vec<DecoderMap>>) -> Result<Self> {
        let mdp = env.mdp();
        let nx = env.contexts().len();
        let ny = env.feedback().num_symbols();
        if rewards.is_empty() {
            return Err(IglError::InvalidConfig("reward class is empty".into()));
        }
        for (i, f) in rewards.iter().enumerate() {
            if f.num_contexts() != nx || f.num_terminal() != mdp.num_terminal() || f.num_actions() != env.num_actions()
            {
                return Err(IglError::InvalidConfig(format!(
                    "reward candidate {i} has the wrong shape"
                )));
            }
        }
        if decoders.len() != mdp.num_terminal() {
            return Err(IglError::InvalidConfig(format!(
                "{} decoder lists for {} terminal states",
                decoders.len(),
                mdp.num_terminal()
            )));
        }
        for (t, list) in decoders.iter().enumerate() {
            if list.is_empty() {
                return Err(IglError::InvalidConfig(format!(
                    "no decoder candidates for terminal {t}"
                )));
            }
            if list.iter().any(|d| d.num_contexts() != nx || d.num_symbols() != ny) {
                return Err(IglError::InvalidConfig(format!(
                    "decoder candidate for terminal {t} has the wrong shape"
                )));
            }
        }
        Ok(FiniteHypothesisClass {
            first_terminal: mdp.terminal_states().start,
            rewards,
            decoders,
        })
    }

    /// `𝓕 = {f*, f̲*}` and their action-transposed variants `(a_1 a_j)`;
    /// `Φ_s` is every binary map on `X × Y` when that is small, otherwise
    /// `φ*`, its complement, a context-rotated `φ*` and the two constants.
    /// `f*` and `φ*` are always at index 0.
    pub fn default_for(env: &Environment) -> Result<Self> {
        let constants = IdentifiabilityConstants::try_from((env.num_actions(), env.params()))?;
        let truth = env.feedback().reward_table().clone();
        let lower = lower_bound_reward(env, &constants)?;
        let k = env.num_actions();
        let mut rewards = vec![truth.clone(), lower.clone()];
        for j in 1..k {
            for base in [&truth, &lower] {
                rewards.push(transpose_actions(base, 0, j));
            }
        }
        let nx = env.contexts().len();
        let ny = env.feedback().num_symbols();
        let decoders = env
            .feedback()
            .decoders()
            .iter()
            .map(|phi| decoder_candidates(phi, nx, ny))
            .collect();
        Self::new(env, rewards, decoders)
    }

    pub fn rewards(&self) -> &[RewardTable] {
        &self.rewards
    }

    pub fn decoders(&self, state: usize) -> &[DecoderMap] {
        &self.decoders[state - self.first_terminal]
    }

    /// `|𝓗_s| = |𝓕| · |Φ_s|`.
    pub fn len_for(&self, state: usize) -> usize {
        self.rewards.len() * self.decoders(state).len()
    }

    /// Hypothesis number `index = f_index · |Φ_s| + φ_index`.
    pub fn hypothesis(&self, state: usize, index: usize) -> PosteriorHypothesis {
        let phis = self.decoders(state);
        let (fi, pi) = (index / phis.len(), index % phis.len());
        PosteriorHypothesis::build(state, state - self.first_terminal, fi, &self.rewards[fi], pi, &phis[pi])
    }
}

fn transpose_actions(table: &RewardTable, i: usize, j: usize) -> RewardTable {
    let swap = |a: usize| {
        if a == i {
            j
        } else if a == j {
            i
        } else {
            a
        }
    };
    RewardTable::from_fn(
        table.num_contexts(),
        table.num_terminal(),
        table.num_actions(),
        |x, s, a| table.get(x, s, swap(a)),
    )
    .expect("permutation keeps values in range")
}

fn decoder_candidates(truth: &DecoderMap, nx: usize, ny: usize) -> Vec<DecoderMap> {
    let cells = nx * ny;
    let mut out = vec![truth.clone()];
    if cells <= FULL_DECODER_ENUMERATION_LIMIT {
        for code in 0u32..(1 << cells) {
            let d = DecoderMap::from_fn(nx, ny, |x, y| code >> (x * ny + y) & 1 == 1);
            if d != *truth {
                out.push(d);
            }
        }
    } else {
        let extra = [
            truth.complement(),
            DecoderMap::from_fn(nx, ny, |x, y| truth.get((x + 1) % nx, y)),
            DecoderMap::from_fn(nx, ny, |_, _| false),
            DecoderMap::from_fn(nx, ny, |_, _| true),
        ];
        for d in extra {
            if !out.contains(&d) {
                out.push(d);
            }
        }
    }
    out
}

/// Reward candidates that agree with `f*` except at `state`, where each
/// `(high, low)` level pair pays `high` for `best_action` and `low` otherwise.
pub fn two_level_rewards(
    env: &Environment,
    state: usize,
    best_action: usize,
    levels: &[(f64, f64)],
) -> Result<Vec<RewardTable>> {
    let mdp = env.mdp();
    let target = mdp
        .terminal_index(state)
        .ok_or_else(|| IglError::InvalidArgument(format!("state {state} is not terminal")))?;
    let truth = env.feedback().reward_table();
    levels
        .iter()
        .map(|&(high, low)| {
            RewardTable::from_fn(
                truth.num_contexts(),
                truth.num_terminal(),
                truth.num_actions(),
                |x, s, a| {
                    if s != target {
                        truth.get(x, s, a)
                    } else if a == best_action {
                        high
                    } else {
                        low
                    }
                },
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErmFit {
    pub hypothesis: PosteriorHypothesis,
    pub index: usize,
    /// Mean squared loss on the dataset.
    pub empirical_risk: f64,
    /// Candidates defined on every observed `(x, y)`.
    pub feasible: usize,
}

/// Squared-loss ERM over `𝓗_s`. Candidates undefined on an observed `(x, y)`
/// are skipped; ties go to the lowest index.
pub fn erm_fit(dataset: &TupleDataset, class: &FiniteHypothesisClass) -> Result<ErmFit> {
    let state = dataset.state();
    if dataset.is_empty() {
        return Err(IglError::InvalidArgument(format!("empty dataset for state {state}")));
    }
    let nx = class.rewards[0].num_contexts();
    let k = class.rewards[0].num_actions();
    let ny = class.decoders(state)[0].num_symbols();
    // counts[(x * ny + y) * k + a]
    let mut counts = vec![0u64; nx * ny * k];
    for r in dataset.records() {
        counts[(r.context * ny + r.feedback) * k + r.action] += 1;
    }
    let n = dataset.len() as f64;
    let mut best: Option<(usize, f64)> = None;
    let mut feasible = 0;
    'candidates: for index in 0..class.len_for(state) {
        let h = class.hypothesis(state, index);
        let mut loss = 0.0;
        for cell in 0..nx * ny {
            let row = &counts[cell * k..(cell + 1) * k];
            let total: u64 = row.iter().sum();
            if total == 0 {
                continue;
            }
            let Some(v) = h.posterior(cell / ny, cell % ny) else {
                continue 'candidates;
            };
            let norm: f64 = v.iter().map(|p| p * p).sum();
            let cross: f64 = v.iter().zip(row).map(|(p, &c)| p * c as f64).sum();
            loss += total as f64 * (norm + 1.0) - 2.0 * cross;
        }
        feasible += 1;
        let risk = loss / n;
        if best.is_none_or(|(_, b)| risk < b) {
            best = Some((index, risk));
        }
    }
    let (index, empirical_risk) = best.ok_or_else(|| {
        IglError::Inconsistent(format!(
            "no hypothesis for state {state} is defined on every observed (context, feedback) pair"
        ))
    })?;
    Ok(ErmFit {
        hypothesis: class.hypothesis(state, index),
        index,
        empirical_risk,
        feasible,
    })
}

/// Independent ERM fits, one per dataset.
pub fn erm_fit_all(datasets: &[TupleDataset], class: &FiniteHypothesisClass) -> Result<Vec<ErmFit>> {
    datasets.par_iter().map(|d| erm_fit(d, class)).collect()
}

/// Exact `E‖ĥ(x, y) - h*(x, y, s)‖²` under `x ~ D`, uniform `a` and `y | x, s, a`.
/// Undefined predictions on a positive-probability pair cost 2, the largest
/// squared distance between two distributions.
pub fn posterior_risk(hypothesis: &PosteriorHypothesis, env: &Environment) -> Result<f64> {
    let s = hypothesis.state();
    let mut risk = 0.0;
    for (x, &px) in env.contexts().probs().iter().enumerate() {
        for y in 0..env.feedback().num_symbols() {
            let py = symbol_marginal(env, x, s, y);
            if py == 0.0 {
                continue;
            }
            let truth = true_posterior(env, x, y, s)?;
            let loss = match hypothesis.posterior(x, y) {
                Some(v) => squared_distance(v, &truth),
                None => 2.0,
            };
            risk += px * py * loss;
        }
    }
    Ok(risk)
}

/// Largest `ℓ∞` gap to `h*` over positive-probability `(x, y)`; infinite
/// when the hypothesis is undefined on one of them.
pub fn posterior_gap(hypothesis: &PosteriorHypothesis, env: &Environment) -> Result<f64> {
    let s = hypothesis.state();
    let mut gap: f64 = 0.0;
    for x in 0..env.contexts().len() {
        for y in 0..env.feedback().num_symbols() {
            if symbol_marginal(env, x, s, y) == 0.0 {
                continue;
            }
            let truth = true_posterior(env, x, y, s)?;
            match hypothesis.posterior(x, y) {
                Some(v) => gap = gap.max(linf_distance(v, &truth)),
                None => return Ok(f64::INFINITY),
            }
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::dataset::TupleRecord;
    use crate::decoder::derive_constants;
    use crate::env::{build_synthetic_env, StateKind};
    use crate::rng::{sample_index, SeedStream};
    use rand::Rng;

    const S3G: usize = 3;
    const S3B: usize = 4;

    fn uniform_dataset(env: &Environment, state: usize, n: usize, seed: u64) -> TupleDataset {
        let mut rng = SeedStream::new(seed).rng();
        let k = env.num_actions();
        let records = (0..n)
            .map(|_| {
                let x = env.sample_context(&mut rng);
                let a = rng.gen_range(0..k);
                let (_, y) = env.sample_outcome(x, state, a, &mut rng);
                TupleRecord {
                    context: x,
                    state,
                    action: a,
                    feedback: y,
                }
            })
            .collect();
        TupleDataset::from_records(state, n, records).unwrap()
    }

    #[test]
    fn synthetic_posteriors() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        // context True reports y = r
        let h1 = true_posterior(&env, 0, 1, S3G).unwrap();
        let expected = [0.6923, 0.0769, 0.0769, 0.0769, 0.0769];
        for (h, e) in h1.iter().zip(expected) {
            assert!((h - e).abs() < 1e-4);
        }
        assert_eq!(h1[0], 0.9 / 1.3);
        let h0 = true_posterior(&env, 0, 0, S3G).unwrap();
        let expected = [0.0270, 0.2432, 0.2432, 0.2432, 0.2432];
        for (h, e) in h0.iter().zip(expected) {
            assert!((h - e).abs() < 1e-4);
        }
        // context False flips the symbol
        assert_eq!(true_posterior(&env, 1, 0, S3G).unwrap(), h1);
        for v in [h0, h1] {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_posterior_is_uniform() {
        for phi in [false, true] {
            let v = posterior_vector(&[0.4; 5], phi).unwrap();
            for p in v {
                assert!((p - 0.2).abs() < 1e-15);
            }
        }
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        assert_eq!(env.kind(0, S3B), StateKind::Homogeneous);
        assert_eq!(true_posterior(&env, 0, 0, S3B).unwrap(), vec![0.2; 5]);
    }

    #[test]
    fn zero_probability_conditioning_is_an_error() {
        assert!(matches!(
            posterior_vector(&[0.0; 4], true),
            Err(IglError::UndefinedPosterior(_))
        ));
        assert!(matches!(
            posterior_vector(&[1.0; 4], false),
            Err(IglError::UndefinedPosterior(_))
        ));
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        assert!(true_posterior(&env, 0, 1, S3B).is_err());
    }

    #[test]
    fn lower_bound_reward_on_synthetic() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let k = derive_constants(5, 1.3, 0.0, 0.9).unwrap();
        let lower = lower_bound_reward(&env, &k).unwrap();
        for x in 0..2 {
            assert_eq!(lower.row(x, 0), &[0.9, 0.0, 0.0, 0.0, 0.0]);
            assert_eq!(lower.row(x, 1), &[0.0; 5]);
        }
    }

    #[test]
    fn default_class_shape_and_row_stochasticity() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let class = FiniteHypothesisClass::default_for(&env).unwrap();
        assert_eq!(class.rewards().len(), 10);
        assert_eq!(class.decoders(S3G).len(), 16);
        assert_eq!(class.len_for(S3G), 160);
        for s in [S3G, S3B] {
            for i in 0..class.len_for(s) {
                let h = class.hypothesis(s, i);
                assert_eq!(h.reward_index() * 16 + h.decoder_index(), i);
                for x in 0..2 {
                    for y in 0..2 {
                        if let Some(v) = h.posterior(x, y) {
                            assert!(v.iter().all(|&p| p >= 0.0));
                            assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                        }
                    }
                }
            }
        }
        // index 0 is the truth
        assert_eq!(posterior_gap(&class.hypothesis(S3G, 0), &env).unwrap(), 0.0);
        assert_eq!(posterior_risk(&class.hypothesis(S3G, 0), &env).unwrap(), 0.0);
    }

    #[test]
    fn singleton_class_returns_its_element() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let wrong = two_level_rewards(&env, S3G, 2, &[(0.8, 0.05)]).unwrap();
        let phi = env.feedback().decoder(0).clone();
        let class = FiniteHypothesisClass::new(&env, wrong, vec![vec![phi.clone()], vec![phi]]).unwrap();
        let data = uniform_dataset(&env, S3G, 50, 1);
        let fit = erm_fit(&data, &class).unwrap();
        assert_eq!(fit.index, 0);
        assert_eq!(fit.feasible, 1);
    }

    #[test]
    fn separated_truth_is_always_selected() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let phi = env.feedback().decoder(0).clone();
        // the complement decoder moves every posterior entry by far more than 0.3 in L2
        let class = FiniteHypothesisClass::new(
            &env,
            vec![env.feedback().reward_table().clone()],
            vec![vec![phi.complement(), phi.clone()], vec![phi]],
        )
        .unwrap();
        let mut rival = class.hypothesis(S3G, 0);
        let truth = class.hypothesis(S3G, 1);
        for x in 0..2 {
            for y in 0..2 {
                let d = squared_distance(rival.posterior(x, y).unwrap(), truth.posterior(x, y).unwrap()).sqrt();
                assert!(d >= 0.3, "{d}");
            }
        }
        for seed in 0..100 {
            let data = uniform_dataset(&env, S3G, 200, seed);
            let fit = erm_fit(&data, &class).unwrap();
            assert_eq!(fit.index, 1, "seed {seed}");
            rival = fit.hypothesis;
        }
        assert_eq!(rival, truth);
    }

    #[test]
    fn erm_matches_direct_loss() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let class = FiniteHypothesisClass::default_for(&env).unwrap();
        let data = uniform_dataset(&env, S3G, 300, 4);
        let fit = erm_fit(&data, &class).unwrap();
        let direct = |h: &PosteriorHypothesis| -> Option<f64> {
            let mut total = 0.0;
            for r in data.records() {
                let v = h.posterior(r.context, r.feedback)?;
                let mut e = vec![0.0; 5];
                e[r.action] = 1.0;
                total += squared_distance(v, &e);
            }
            Some(total / data.len() as f64)
        };
        assert!((direct(&fit.hypothesis).unwrap() - fit.empirical_risk).abs() < 1e-9);
        for i in 0..class.len_for(S3G) {
            if let Some(r) = direct(&class.hypothesis(S3G, i)) {
                assert!(r >= fit.empirical_risk - 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_candidates_are_skipped_at_the_homogeneous_state() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let class = FiniteHypothesisClass::default_for(&env).unwrap();
        let data = uniform_dataset(&env, S3B, 500, 2);
        let fit = erm_fit(&data, &class).unwrap();
        assert!(fit.feasible < class.len_for(S3B));
        assert_eq!(posterior_gap(&fit.hypothesis, &env).unwrap(), 0.0);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let class = FiniteHypothesisClass::default_for(&env).unwrap();
        let data = TupleDataset::from_records(S3G, 10, vec![]).unwrap();
        assert!(erm_fit(&data, &class).is_err());
    }

    #[test]
    fn empirical_posterior_matches_closed_form() {
        let env = build_synthetic_env(0.1, 0.1).unwrap();
        let mut rng = SeedStream::new(8).rng();
        let mut counts = [0u64; 2 * 2 * 5];
        for _ in 0..200_000 {
            let x = sample_index(env.contexts().probs(), &mut rng);
            let a = rng.gen_range(0..5);
            let (_, y) = env.sample_outcome(x, S3G, a, &mut rng);
            counts[(x * 2 + y) * 5 + a] += 1;
        }
        for x in 0..2 {
            for y in 0..2 {
                let row = &counts[(x * 2 + y) * 5..(x * 2 + y + 1) * 5];
                let n: u64 = row.iter().sum();
                let freq: Vec<f64> = row.iter().map(|&c| c as f64 / n as f64).collect();
                let truth = true_posterior(&env, x, y, S3G).unwrap();
                assert!(linf_distance(&freq, &truth) < 0.02);
            }
        }
    }
}
