//! Online policy learning from decoded feedback.
//!
//! Each episode predicts rewards with a square-loss regression oracle, plans
//! a barrier-regularized occupancy measure under the Laplace-smoothed kernel
//! estimate, acts with the induced policy and feeds the decoded proxy reward
//! back to the oracle when the episode ends in a reachable state.

mod occupancy;
mod oracle;
mod run;
mod theory;
mod transition;

pub use occupancy::{
    solve_occupancy, OccupancyMeasure, CONTINUATION_FACTOR, FLOW_TOLERANCE, MAX_NEWTON_ITERATIONS,
    NEWTON_DECREMENT_TOLERANCE,
};
pub use oracle::{OracleKind, RegressionOracle, AGGREGATION_ETA, OGD_LEARNING_RATE};
pub use run::{run_online_loop, EpisodeMetrics, GammaSchedule, ProxyDecoder};
pub use theory::{compute_theory_params, TheoryParams};
pub use transition::{logloss_regret, logloss_regret_bound, sequential_product_identity, TransitionCounts};
