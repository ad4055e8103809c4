//! Configuration, the seeded end-to-end pipeline, run artifacts and the
//! verification oracles.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod verify;

pub use config::{DecoderConfig, EnvSource, ExperimentConfig, GammaChoice, GammaMode, OnlineConfig, ResolvedConfig};
pub use pipeline::{
    run_decoder_only, run_decoder_stage, run_full_pipeline, run_resolved, run_seeds, DecoderStage, PhaseEpisodes,
    PipelineFailure, RunReport, SelectedHypothesis, Summary, FINAL_WINDOW,
};
pub use report::{emit_metrics, read_metrics, write_metrics, FILTERED_SENTINEL};
pub use verify::{
    monte_carlo_posterior, random_layer_sizes, random_layered_mdp, random_walk, verify_dirichlet, verify_lipschitz,
    verify_logloss, verify_posterior, EmpiricalPosterior, SuiteOutcome,
};
