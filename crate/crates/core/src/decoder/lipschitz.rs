//! Identifiability constants, the ramp function and the Lipschitz reward decoder `J`.

use crate::env::IdentifiabilityParams;
use crate::error::{IglError, Result};

/// `(M, c, θ)` together with the derived separation `κ`, ramp width `ξ` and
/// Lipschitz constant `L` of `J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentifiabilityConstants {
    pub num_actions: usize,
    pub m: f64,
    pub c: f64,
    pub theta: f64,
    pub kappa: f64,
    pub xi: f64,
    pub lipschitz: f64,
}

impl IdentifiabilityConstants {
    /// `σ = θ(K - M) / M`.
    pub fn sigma(&self) -> f64 {
        let k = self.num_actions as f64;
        self.theta * (k - self.m) / self.m
    }

    /// The posterior level `θ / M` at which the ramp saturates.
    pub fn threshold(&self) -> f64 {
        self.theta / self.m
    }
}

pub fn derive_constants(num_actions: usize, m: f64, c: f64, theta: f64) -> Result<IdentifiabilityConstants> {
    if num_actions < 2 {
        return Err(IglError::InvalidArgument(format!(
            "need at least two actions, got {num_actions}"
        )));
    }
    let k = num_actions as f64;
    if !(m > 0.0 && m < k / 2.0) {
        return Err(IglError::Identifiability(format!(
            "M = {m} must lie in (0, K/2) = (0, {})",
            k / 2.0
        )));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(IglError::Identifiability(format!("theta = {theta} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(IglError::Identifiability(format!("c = {c} must lie in [0, 1]")));
    }
    let sigma = theta * (k - m) / m;
    if sigma <= 1.0 {
        return Err(IglError::Identifiability(format!("sigma = {sigma} must exceed 1")));
    }
    let kappa = (k * theta - m) / (k * (k - m));
    let xi = 0.5 * (theta / m - 1.0 / (k - m));
    if kappa <= 0.0 || xi <= 0.0 {
        return Err(IglError::Identifiability(format!(
            "kappa = {kappa} and xi = {xi} must be positive"
        )));
    }
    Ok(IdentifiabilityConstants {
        num_actions,
        m,
        c,
        theta,
        kappa,
        xi,
        lipschitz: 4.0 / kappa + 1.0 / xi,
    })
}

impl TryFrom<(usize, IdentifiabilityParams)> for IdentifiabilityConstants {
    type Error = IglError;

    fn try_from((k, p): (usize, IdentifiabilityParams)) -> Result<Self> {
        derive_constants(k, p.m, p.c, p.theta)
    }
}

/// `G(α, β, λ)`: 0 below `β`, 1 from `β + λ` on, linear in between.
pub fn ramp(alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(IglError::InvalidArgument(format!(
            "ramp width {lambda} must be positive"
        )));
    }
    Ok(ramp_between(alpha, beta, beta + lambda, lambda))
}

// The saturation point is passed explicitly so that a posterior sitting exactly
// on θ/M maps to 1 without going through `(θ/M - ξ) + ξ`.
fn ramp_between(alpha: f64, lower: f64, upper: f64, width: f64) -> f64 {
    if alpha >= upper {
        1.0
    } else if alpha >= lower {
        ((alpha - lower) / width).min(1.0)
    } else {
        0.0
    }
}

/// `Δ(v) = ‖v - 1/K‖_∞`.
pub fn distance_from_uniform(v: &[f64]) -> f64 {
    let u = 1.0 / v.len() as f64;
    v.iter().map(|p| (p - u).abs()).fold(0.0, f64::max)
}

/// The decoder `J(v, a)`: `c` near uniform, the ramp on `v_a` far from
/// uniform, and a linear bridge for `Δ(v) ∈ (κ/2, κ)`.
pub fn decode(v: &[f64], action: usize, constants: &IdentifiabilityConstants) -> f64 {
    debug_assert_eq!(v.len(), constants.num_actions);
    let IdentifiabilityConstants { c, kappa, xi, .. } = *constants;
    let delta = distance_from_uniform(v);
    if delta <= kappa / 2.0 {
        return c;
    }
    let upper = constants.threshold();
    let g = ramp_between(v[action], upper - xi, upper, xi);
    if delta >= kappa {
        g
    } else {
        (2.0 * c * (kappa - delta) + (2.0 * delta - kappa) * g) / kappa
    }
}
