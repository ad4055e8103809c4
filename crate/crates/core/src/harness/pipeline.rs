//! Both stages end to end for one seed.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ResolvedConfig};
use crate::decoder::{
    collect_tuples, erm_fit_all, lower_bound_reward, posterior_gap, posterior_risk, FiniteHypothesisClass,
    IdentifiabilityConstants, TupleDataset,
};
use crate::env::{optimal_value, Environment};
use crate::error::{IglError, Result};
use crate::online::OracleKind;
use crate::online::{
    compute_theory_params, run_online_loop, EpisodeMetrics, ProxyDecoder, RegressionOracle, AGGREGATION_ETA,
    OGD_LEARNING_RATE,
};
use crate::reachability::{build_reachable_set, estimate_visitation, learn_all_homing_policies, VisitationStats};
use crate::rng::SeedStream;

/// Width of the trailing window summarized in [`Summary`].
pub const FINAL_WINDOW: usize = 2000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PhaseEpisodes {
    pub homing: u64,
    pub visitation: u64,
    pub collection: u64,
    pub online: u64,
}

impl PhaseEpisodes {
    pub fn total(&self) -> u64 {
        self.homing + self.visitation + self.collection + self.online
    }
}

/// The ERM choice for one reachable state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectedHypothesis {
    pub state: usize,
    pub label: String,
    pub index: usize,
    pub reward_index: usize,
    pub decoder_index: usize,
    pub empirical_risk: f64,
    /// Exact held-out risk against the true posterior.
    pub posterior_risk: f64,
    pub posterior_gap: f64,
    pub records: usize,
    pub collection_episodes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub optimal_value: f64,
    pub online_episodes: usize,
    pub final_window: usize,
    pub final_mean_true_reward: f64,
    /// Over unfiltered episodes of the window; `NaN` when all were filtered.
    pub final_mean_decoded_reward: f64,
    pub final_mean_policy_value: f64,
    pub cumulative_regret: f64,
    pub total_episodes: u64,
}

impl Summary {
    fn from_metrics(seed: u64, optimal_value: f64, metrics: &[EpisodeMetrics], total_episodes: u64) -> Self {
        let window = &metrics[metrics.len().saturating_sub(FINAL_WINDOW)..];
        let mean = |it: &mut dyn Iterator<Item = f64>| {
            let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        };
        Summary {
            seed,
            optimal_value,
            online_episodes: metrics.len(),
            final_window: window.len(),
            final_mean_true_reward: mean(&mut window.iter().map(|m| f64::from(u8::from(m.true_reward)))),
            final_mean_decoded_reward: mean(&mut window.iter().filter_map(|m| m.decoded_reward)),
            final_mean_policy_value: mean(&mut window.iter().map(|m| m.policy_value)),
            cumulative_regret: metrics.last().map_or(0.0, |m| m.cumulative_regret),
            total_episodes,
        }
    }
}

/// Everything one seeded run produced. Partial when a phase failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ResolvedConfig,
    pub seed: u64,
    pub phases: PhaseEpisodes,
    pub visitation: Vec<VisitationStats>,
    pub reachable: Vec<usize>,
    pub hypotheses: Vec<SelectedHypothesis>,
    /// Whether the class contains the lower-bound reward `f̲*`.
    pub lower_bound_realizable: Option<bool>,
    pub gamma_theory: Option<f64>,
    #[serde(skip)]
    pub metrics: Vec<EpisodeMetrics>,
    pub summary: Summary,
}

impl RunReport {
    fn new(config: ResolvedConfig, seed: u64) -> Self {
        RunReport {
            config,
            seed,
            phases: PhaseEpisodes::default(),
            visitation: Vec::new(),
            reachable: Vec::new(),
            hypotheses: Vec::new(),
            lower_bound_realizable: None,
            gamma_theory: None,
            metrics: Vec::new(),
            summary: Summary::default(),
        }
    }
}

/// A phase error together with what the run produced before it.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct PipelineFailure {
    #[source]
    pub error: IglError,
    pub partial: Box<RunReport>,
}

/// Result of the decoder stage: the proxy decoder and the class it was fit over.
pub struct DecoderStage {
    pub decoder: ProxyDecoder,
    pub class: FiniteHypothesisClass,
    pub datasets: Vec<TupleDataset>,
}

type Staged<T> = std::result::Result<T, PipelineFailure>;

fn fail(report: &mut RunReport, phase: &'static str, error: IglError) -> PipelineFailure {
    report.summary.seed = report.seed;
    report.summary.total_episodes = report.phases.total();
    PipelineFailure {
        error: error.in_phase(phase),
        partial: Box::new(std::mem::replace(
            report,
            RunReport::new(report.config.clone(), report.seed),
        )),
    }
}

/// Homing, visitation, reachable set, tuple collection and ERM.
pub fn run_decoder_stage(
    env: &Environment,
    config: &ResolvedConfig,
    seeds: &SeedStream,
    report: &mut RunReport,
) -> Staged<DecoderStage> {
    let mdp = env.mdp();
    let terminal = mdp.num_terminal() as u64;
    let constants = IdentifiabilityConstants::try_from((env.num_actions(), env.params()))
        .map_err(|e| fail(report, "decoder", e))?;
    let class = FiniteHypothesisClass::default_for(env).map_err(|e| fail(report, "decoder", e))?;
    if let Ok(lower) = lower_bound_reward(env, &constants) {
        report.lower_bound_realizable = Some(class.rewards().contains(&lower));
        if report.lower_bound_realizable == Some(false) {
            log::warn!("the reward class does not contain the lower-bound reward");
        }
    }

    let homing = learn_all_homing_policies(env, config.homing_episodes, config.delta, &seeds.child("homing"))
        .map_err(|e| fail(report, "homing", e))?;
    report.phases.homing = terminal * config.homing_episodes as u64;

    let visit_seeds = seeds.child("visitation");
    let visitation: Result<Vec<VisitationStats>> = homing
        .par_iter()
        .map(|h| {
            let mut rng = visit_seeds.child_index(h.target() as u64).rng();
            estimate_visitation(h, env, config.visitation_episodes, config.delta, &mut rng)
        })
        .collect();
    report.visitation = visitation.map_err(|e| fail(report, "visitation", e))?;
    report.phases.visitation = terminal * config.visitation_episodes as u64;

    let reachable =
        build_reachable_set(&report.visitation, config.epsilon).map_err(|e| fail(report, "reachable", e))?;
    report.reachable = reachable.states().collect();
    if reachable.is_empty() {
        log::warn!("no terminal state is reliably reachable; the online oracle will never be updated");
    }

    let mut rng = seeds.child("collection").rng();
    let datasets = collect_tuples(&reachable, &homing, env, config.n0, config.delta, &mut rng)
        .map_err(|e| fail(report, "collection", e))?;
    report.phases.collection = datasets.iter().map(TupleDataset::episodes).sum();

    let fits = erm_fit_all(&datasets, &class).map_err(|e| fail(report, "erm", e))?;
    let mut hypotheses = Vec::with_capacity(fits.len());
    for (fit, data) in fits.iter().zip(&datasets) {
        let h = &fit.hypothesis;
        let diagnostics = posterior_risk(h, env).and_then(|r| Ok((r, posterior_gap(h, env)?)));
        let (risk, gap) = diagnostics.map_err(|e| fail(report, "erm", e))?;
        hypotheses.push(SelectedHypothesis {
            state: h.state(),
            label: mdp.label(h.state()).to_string(),
            index: fit.index,
            reward_index: h.reward_index(),
            decoder_index: h.decoder_index(),
            empirical_risk: fit.empirical_risk,
            posterior_risk: risk,
            posterior_gap: gap,
            records: data.len(),
            collection_episodes: data.episodes(),
        });
    }
    report.hypotheses = hypotheses;
    let decoder = ProxyDecoder::new(constants, reachable, fits.into_iter().map(|f| f.hypothesis))
        .map_err(|e| fail(report, "erm", e))?;
    Ok(DecoderStage {
        decoder,
        class,
        datasets,
    })
}

/// Only the decoder stage, for inspecting the fitted posteriors.
pub fn run_decoder_only(env: &Environment, config: &ResolvedConfig, seed: u64) -> Staged<(RunReport, DecoderStage)> {
    let mut report = RunReport::new(config.clone(), seed);
    let stage = run_decoder_stage(env, config, &SeedStream::new(seed), &mut report)?;
    report.summary.seed = seed;
    report.summary.total_episodes = report.phases.total();
    Ok((report, stage))
}

/// Runs the decoder stage and then the online loop for one seed.
pub fn run_full_pipeline(config: &ExperimentConfig, seed: u64) -> Staged<RunReport> {
    let early = |error: IglError| PipelineFailure {
        error: error.in_phase("config"),
        partial: Box::new(RunReport::new(placeholder_config(config), seed)),
    };
    let env = config.build_env().map_err(early)?;
    let resolved = config.resolve(&env).map_err(early)?;
    run_resolved(&env, &resolved, seed)
}

/// [`run_full_pipeline`] for an already built environment and resolved config.
pub fn run_resolved(env: &Environment, config: &ResolvedConfig, seed: u64) -> Staged<RunReport> {
    let seeds = SeedStream::new(seed);
    let mut report = RunReport::new(config.clone(), seed);
    let stage = run_decoder_stage(env, config, &seeds, &mut report)?;

    let mdp = env.mdp();
    let online_episodes = match config.online_episodes {
        Some(n) => n,
        None => {
            let total = config.total_episodes.expect("resolved configs set one of the budgets");
            let used = report.phases.total();
            if used >= total {
                let e = IglError::InvalidConfig(format!(
                    "exploration used {used} of the {total} episode budget, leaving none for the online phase"
                ));
                return Err(fail(&mut report, "online", e));
            }
            (total - used) as usize
        }
    };
    let candidates = stage.class.rewards().to_vec();
    let regret_bound = 2.0 * (candidates.len() as f64).ln();
    let theory = compute_theory_params(
        config.horizon_episodes().max(online_episodes as f64),
        mdp.num_states() as f64,
        env.num_actions() as f64,
        mdp.horizon() as f64,
        stage.decoder.constants().lipschitz,
        regret_bound.max(f64::MIN_POSITIVE),
    );
    report.gamma_theory = Some(theory.gamma);
    let first_terminal = mdp.terminal_states().start;
    let mut oracle = match config.oracle {
        OracleKind::Aggregation => RegressionOracle::aggregation(first_terminal, candidates, AGGREGATION_ETA)
            .map_err(|e| fail(&mut report, "online", e))?,
        OracleKind::Ogd => RegressionOracle::ogd(
            first_terminal,
            env.contexts().len(),
            mdp.num_terminal(),
            env.num_actions(),
            OGD_LEARNING_RATE,
        ),
    };
    let (v_star, _) = optimal_value(env);
    let mut rng = seeds.child("online").rng();
    let mut metrics = Vec::with_capacity(online_episodes);
    let outcome = run_online_loop(
        env,
        &stage.decoder,
        &mut oracle,
        config.schedule(theory.gamma),
        online_episodes,
        &mut rng,
        &mut metrics,
    );
    report.phases.online = metrics.len() as u64;
    report.summary = Summary::from_metrics(seed, v_star, &metrics, report.phases.total());
    report.metrics = metrics;
    match outcome {
        Ok(_) => Ok(report),
        Err(e) => Err(fail(&mut report, "online", e)),
    }
}

fn placeholder_config(config: &ExperimentConfig) -> ResolvedConfig {
    ResolvedConfig {
        env: config.env.preset.clone().unwrap_or_default(),
        seeds: config.seeds.clone(),
        epsilon: config.decoder.epsilon,
        delta: config.decoder.delta.unwrap_or(f64::NAN),
        homing_episodes: config.decoder.homing_episodes.unwrap_or(0),
        visitation_episodes: config.decoder.visitation_episodes.unwrap_or(0),
        n0: config.decoder.n0,
        total_episodes: config.total_episodes,
        online_episodes: config.online.episodes,
        gamma: super::config::GammaChoice::Schedule,
        oracle: config.online.oracle,
    }
}

/// One pipeline per seed, in parallel. Results come back in seed order.
pub fn run_seeds(config: &ExperimentConfig) -> Result<Vec<Staged<RunReport>>> {
    let env = config.build_env()?;
    let resolved = config.resolve(&env)?;
    Ok(resolved
        .seeds
        .par_iter()
        .map(|&seed| run_resolved(&env, &resolved, seed))
        .collect())
}
