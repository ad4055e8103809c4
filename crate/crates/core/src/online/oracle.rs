//! Online square-loss regression over terminal `(x, s, a)` triples.

use crate::env::RewardTable;
use crate::error::{IglError, Result};

/// Learning rate of exponentially weighted aggregation. With squared loss on
/// `[0, 1]` this gives regret at most `2 ln |F|`.
pub const AGGREGATION_ETA: f64 = 0.5;
/// Step size of the tabular gradient variant.
pub const OGD_LEARNING_RATE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Aggregation,
    Ogd,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegressionOracle {
    /// Weighted mean over a finite class; weights are kept in log space.
    Aggregation {
        first_terminal: usize,
        eta: f64,
        candidates: Vec<RewardTable>,
        log_weights: Vec<f64>,
    },
    /// One free parameter per `(x, s, a)`, initialized at 0.
    Ogd {
        first_terminal: usize,
        num_terminal: usize,
        num_actions: usize,
        learning_rate: f64,
        params: Vec<f64>,
    },
}

impl RegressionOracle {
    pub fn aggregation(first_terminal: usize, candidates: Vec<RewardTable>, eta: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(IglError::InvalidArgument(
                "aggregation needs at least one candidate".into(),
            ));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(IglError::InvalidArgument(format!("eta = {eta} must be non-negative")));
        }
        let n = candidates.len();
        Ok(RegressionOracle::Aggregation {
            first_terminal,
            eta,
            candidates,
            log_weights: vec![-(n as f64).ln(); n],
        })
    }

    pub fn ogd(
        first_terminal: usize,
        num_contexts: usize,
        num_terminal: usize,
        num_actions: usize,
        learning_rate: f64,
    ) -> Self {
        RegressionOracle::Ogd {
            first_terminal,
            num_terminal,
            num_actions,
            learning_rate,
            params: vec![0.0; num_contexts * num_terminal * num_actions],
        }
    }

    /// Normalized aggregation weights, or `None` for the gradient variant.
    pub fn weights(&self) -> Option<Vec<f64>> {
        match self {
            RegressionOracle::Aggregation { log_weights, .. } => {
                let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let raw: Vec<f64> = log_weights.iter().map(|w| (w - top).exp()).collect();
                let z: f64 = raw.iter().sum();
                Some(raw.into_iter().map(|w| w / z).collect())
            }
            RegressionOracle::Ogd { .. } => None,
        }
    }

    /// `f̂(x, s, a)` clipped to `[0, 1]`; `state` is a global index.
    pub fn predict(&self, context: usize, state: usize, action: usize) -> f64 {
        match self {
            RegressionOracle::Aggregation {
                first_terminal,
                candidates,
                ..
            } => {
                let w = self.weights().expect("aggregation");
                let t = state - first_terminal;
                candidates
                    .iter()
                    .zip(&w)
                    .map(|(f, w)| w * f.get(context, t, action))
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            }
            RegressionOracle::Ogd { .. } => self.param(context, state, action).clamp(0.0, 1.0),
        }
    }

    /// Predictions for every terminal state and action of one context,
    /// laid out as `[t * K + a]`.
    pub fn predict_context(&self, context: usize, num_terminal: usize, num_actions: usize) -> Vec<f64> {
        match self {
            RegressionOracle::Aggregation { candidates, .. } => {
                let w = self.weights().expect("aggregation");
                let mut out = vec![0.0; num_terminal * num_actions];
                for (f, w) in candidates.iter().zip(&w) {
                    for t in 0..num_terminal {
                        for (a, v) in f.row(context, t).iter().enumerate() {
                            out[t * num_actions + a] += w * v;
                        }
                    }
                }
                out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
                out
            }
            RegressionOracle::Ogd { first_terminal, .. } => (0..num_terminal)
                .flat_map(|t| (0..num_actions).map(move |a| (t, a)))
                .map(|(t, a)| self.predict(context, first_terminal + t, a))
                .collect(),
        }
    }

    fn param(&self, context: usize, state: usize, action: usize) -> f64 {
        match self {
            RegressionOracle::Ogd {
                first_terminal,
                num_terminal,
                num_actions,
                params,
                ..
            } => params[(context * num_terminal + state - first_terminal) * num_actions + action],
            RegressionOracle::Aggregation { .. } => unreachable!(),
        }
    }

    /// One round with target `r̃ ∈ [0, 1]`.
    pub fn update(&mut self, context: usize, state: usize, action: usize, target: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&target) {
            return Err(IglError::InvalidArgument(format!(
                "regression target {target} is outside [0, 1]"
            )));
        }
        match self {
            RegressionOracle::Aggregation {
                first_terminal,
                eta,
                candidates,
                log_weights,
            } => {
                let t = state - *first_terminal;
                for (lw, f) in log_weights.iter_mut().zip(candidates.iter()) {
                    let err = f.get(context, t, action) - target;
                    *lw -= *eta * err * err;
                }
                // renormalize so the log weights stay bounded
                let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = top + log_weights.iter().map(|w| (w - top).exp()).sum::<f64>().ln();
                log_weights.iter_mut().for_each(|w| *w -= lse);
            }
            RegressionOracle::Ogd {
                first_terminal,
                num_terminal,
                num_actions,
                learning_rate,
                params,
            } => {
                let i = (context * *num_terminal + state - *first_terminal) * *num_actions + action;
                params[i] -= *learning_rate * 2.0 * (params[i] - target);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use rand::Rng;

    fn constant(v: f64) -> RewardTable {
        RewardTable::from_fn(1, 1, 2, |_, _, _| v).unwrap()
    }

    #[test]
    fn mean_of_experts() {
        let o = RegressionOracle::aggregation(0, vec![constant(0.0), constant(1.0)], 0.5).unwrap();
        assert!((o.predict(0, 0, 1) - 0.5).abs() < 1e-15);
        let single = RegressionOracle::aggregation(0, vec![constant(0.3)], 0.5).unwrap();
        assert!((single.predict(0, 0, 0) - 0.3).abs() < 1e-15);
        assert_eq!(single.predict_context(0, 1, 2).len(), 2);
    }

    #[test]
    fn weight_ratio_after_one_update() {
        let mut o = RegressionOracle::aggregation(0, vec![constant(0.0), constant(1.0)], 0.5).unwrap();
        o.update(0, 0, 0, 0.0).unwrap();
        let w = o.weights().unwrap();
        assert!((w[0] / w[1] - 0.5f64.exp()).abs() < 1e-12);
        let mut frozen = RegressionOracle::aggregation(0, vec![constant(0.0), constant(1.0)], 0.0).unwrap();
        let before = frozen.clone();
        frozen.update(0, 0, 0, 1.0).unwrap();
        assert_eq!(frozen.weights(), before.weights());
    }

    #[test]
    fn repeated_updates_concentrate_on_the_best_candidate() {
        // per-step loss gap 0.16
        let mut o = RegressionOracle::aggregation(0, vec![constant(0.1), constant(0.5), constant(0.9)], 0.5).unwrap();
        for _ in 0..1000 {
            o.update(0, 0, 0, 0.5).unwrap();
        }
        assert!(o.weights().unwrap()[1] >= 0.99);
    }

    #[test]
    fn out_of_range_target_is_rejected() {
        let mut o = RegressionOracle::aggregation(0, vec![constant(0.0)], 0.5).unwrap();
        assert!(o.update(0, 0, 0, 1.5).is_err());
        let mut g = RegressionOracle::ogd(0, 1, 1, 2, 0.05);
        assert!(g.update(0, 0, 0, -0.1).is_err());
    }

    #[test]
    fn ogd_step() {
        let mut g = RegressionOracle::ogd(3, 1, 2, 2, 0.05);
        assert_eq!(g.predict(0, 4, 1), 0.0);
        g.update(0, 4, 1, 1.0).unwrap();
        assert!((g.predict(0, 4, 1) - 0.1).abs() < 1e-15);
        assert_eq!(g.predict(0, 3, 1), 0.0);
        assert_eq!(g.weights(), None);
    }

    #[test]
    fn aggregation_regret_bound() {
        let mut rng = SeedStream::new(12).rng();
        for trial in 0..20 {
            let n = rng.gen_range(1..=16);
            let class: Vec<RewardTable> = (0..n)
                .map(|_| RewardTable::from_fn(2, 2, 3, |_, _, _| rng.gen::<f64>()).unwrap())
                .collect();
            let mut o = RegressionOracle::aggregation(5, class.clone(), AGGREGATION_ETA).unwrap();
            let mut learner = 0.0;
            let mut experts = vec![0.0; n];
            for _ in 0..2000 {
                let (x, t, a) = (rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..3));
                let y: f64 = if trial % 2 == 0 {
                    rng.gen()
                } else {
                    f64::from(rng.gen_bool(0.5))
                };
                let p = o.predict(x, 5 + t, a);
                learner += (p - y) * (p - y);
                for (e, f) in experts.iter_mut().zip(&class) {
                    *e += (f.get(x, t, a) - y).powi(2);
                }
                o.update(x, 5 + t, a, y).unwrap();
            }
            let best = experts.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(
                learner - best <= 2.0 * (n as f64).ln() + 1e-6,
                "{} vs {}",
                learner - best,
                2.0 * (n as f64).ln()
            );
        }
    }
}
