//! Inverse-kinematics reward decoding.
//!
//! Uniform-action feedback tuples are collected at each reliably reachable
//! terminal state, a posterior `ĥ_s(x, y) ∈ Δ_K` over the final action is fit
//! by squared-loss ERM, and [`decode`] turns a posterior into a proxy reward.

mod dataset;
mod hypothesis;
mod lipschitz;

pub use dataset::{
    collect_tuples, collection_cap, load_tuples, read_tuples, save_tuples, write_tuples, TupleDataset, TupleRecord,
};
pub use hypothesis::{
    erm_fit, erm_fit_all, lower_bound_reward, posterior_gap, posterior_risk, posterior_vector, symbol_marginal,
    true_posterior, two_level_rewards, ErmFit, FiniteHypothesisClass, PosteriorHypothesis,
    FULL_DECODER_ENUMERATION_LIMIT,
};
pub use lipschitz::{decode, derive_constants, distance_from_uniform, ramp, IdentifiabilityConstants};
