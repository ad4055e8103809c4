//! Interaction-grounded learning for layered contextual episodic MDPs whose
//! reward is latent and only observed through a feedback signal.
//!
//! The pipeline has two stages. The decoder stage learns homing policies for
//! every terminal state ([`reachability`]), keeps the reliably reachable ones,
//! collects uniform-action feedback tuples there and fits an inverse-kinematics
//! posterior by ERM over a finite hypothesis class ([`decoder`]). The online
//! stage ([`online`]) turns decoded feedback into proxy rewards for a
//! square-loss regression oracle and plans with a log-barrier regularized
//! occupancy measure under a Laplace-smoothed transition estimate.
//! [`harness`] composes both stages into seeded, reproducible experiments.

pub mod decoder;
pub mod env;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod online;
pub mod reachability;
pub mod rng;

pub use decoder::{
    decode, derive_constants, FiniteHypothesisClass, IdentifiabilityConstants, PosteriorHypothesis, TupleDataset,
};
pub use env::{
    build_synthetic_env, exact_value, optimal_value, Environment, LayeredMdp, PolicyView, StatePolicy, TabularPolicy,
    Trajectory,
};
pub use error::{IglError, Result};
pub use harness::{ExperimentConfig, RunReport};
pub use online::{OccupancyMeasure, RegressionOracle, TransitionCounts};
pub use reachability::{HomingPolicy, ReachableSet, VisitationStats};
pub use rng::SeedStream;
