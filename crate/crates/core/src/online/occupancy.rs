//! Log-barrier regularized occupancy-measure planning.
//!
//! Maximizes `Σ q(s,a) f(s,a) + (1/γ) Σ ln q(s,a)` over occupancy measures of
//! a layered kernel. The solver minimizes the scaled objective
//! `-γ f·q - Σ ln q` by equality-constrained Newton steps, raising the
//! weight from 1 to `γ` by factors of [`CONTINUATION_FACTOR`] and warm
//! starting each stage from the previous one.

use nalgebra::{DMatrix, DVector};

use crate::env::{reach_distribution, LayeredMdp, StatePolicy};
use crate::error::{IglError, Result};

pub const NEWTON_DECREMENT_TOLERANCE: f64 = 1e-10;
/// Iteration cap per continuation stage.
pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const CONTINUATION_FACTOR: f64 = 10.0;
/// Largest accepted constraint violation at termination.
pub const FLOW_TOLERANCE: f64 = 1e-10;

const ARMIJO: f64 = 0.25;
const BACKTRACK: f64 = 0.5;

/// `q(s, a)` for every state (global index) and action.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMeasure {
    num_actions: usize,
    values: Vec<f64>,
    /// Newton iterations over all stages; 0 for measures built from a policy.
    pub iterations: usize,
}

impl OccupancyMeasure {
    /// Occupancy of a Markov policy under `mdp`.
    pub fn of_policy(mdp: &LayeredMdp, policy: &StatePolicy) -> Self {
        let k = mdp.num_actions();
        let reach = reach_distribution(mdp, policy, 0);
        let mut values = Vec::with_capacity(mdp.num_states() * k);
        for (s, &mass) in reach.iter().enumerate() {
            values.extend(policy.row(s).iter().map(|p| mass * p));
        }
        OccupancyMeasure {
            num_actions: k,
            values,
            iterations: 0,
        }
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `‖A q - b‖_∞` over the start and flow-conservation constraints.
    pub fn flow_residual(&self, mdp: &LayeredMdp) -> f64 {
        let a = constraint_matrix(mdp);
        let q = DVector::from_column_slice(&self.values);
        let mut r = &a * q;
        r[mdp.start_state()] -= 1.0;
        r.amax()
    }

    /// `Σ q f + (1/γ) Σ ln q`, with `reward` over the terminal layer as `[t * K + a]`.
    pub fn objective(&self, mdp: &LayeredMdp, reward: &[f64], gamma: f64) -> f64 {
        let f = full_reward(mdp, reward);
        let linear: f64 = self.values.iter().zip(&f).map(|(q, f)| q * f).sum();
        let barrier: f64 = self.values.iter().map(|q| q.ln()).sum();
        linear + barrier / gamma
    }

    /// Euclidean norm of the objective gradient projected onto the tangent
    /// space of the constraints. Zero at the maximizer.
    pub fn projected_gradient(&self, mdp: &LayeredMdp, reward: &[f64], gamma: f64) -> f64 {
        let a = constraint_matrix(mdp);
        let f = full_reward(mdp, reward);
        let grad = DVector::from_iterator(
            self.values.len(),
            self.values.iter().zip(&f).map(|(q, f)| f + 1.0 / (gamma * q)),
        );
        let gram = &a * a.transpose();
        let coeff = gram
            .cholesky()
            .expect("constraint rows are independent")
            .solve(&(&a * &grad));
        (grad - a.transpose() * coeff).norm()
    }

    /// `π(a|s) = q(s,a) / Σ_a' q(s,a')`.
    pub fn extract_policy(&self) -> Result<StatePolicy> {
        let k = self.num_actions;
        let mut probs = Vec::with_capacity(self.values.len());
        for (s, row) in self.values.chunks(k).enumerate() {
            let z: f64 = row.iter().sum();
            if z.is_nan() || z <= 0.0 || row.iter().any(|&q| q <= 0.0) {
                return Err(IglError::Numerical {
                    message: format!("occupancy row of state {s} is not strictly positive"),
                    residual: z,
                });
            }
            probs.extend(row.iter().map(|q| q / z));
        }
        StatePolicy::new(k, probs)
    }
}

fn full_reward(mdp: &LayeredMdp, reward: &[f64]) -> Vec<f64> {
    let k = mdp.num_actions();
    let mut f = vec![0.0; mdp.num_states() * k];
    let offset = mdp.terminal_states().start * k;
    f[offset..].copy_from_slice(reward);
    f
}

/// One row per state: its outflow minus the inflow from the previous layer.
fn constraint_matrix(mdp: &LayeredMdp) -> DMatrix<f64> {
    let k = mdp.num_actions();
    let n = mdp.num_states();
    let mut a = DMatrix::zeros(n, n * k);
    for s in 0..n {
        for j in 0..k {
            a[(s, s * k + j)] = 1.0;
        }
    }
    for h in 0..mdp.horizon() - 1 {
        let next = mdp.layer(h + 1);
        for s in mdp.layer(h) {
            for act in 0..k {
                for (j, &p) in mdp.successors(s, act).iter().enumerate() {
                    a[(next.start + j, s * k + act)] -= p;
                }
            }
        }
    }
    a
}

/// The unique maximizer of the barrier-regularized objective over occupancy
/// measures of `mdp`. `reward` covers the terminal layer as `[t * K + a]`.
pub fn solve_occupancy(mdp: &LayeredMdp, reward: &[f64], gamma: f64) -> Result<OccupancyMeasure> {
    let k = mdp.num_actions();
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(IglError::InvalidArgument(format!(
            "gamma = {gamma} must be positive and finite"
        )));
    }
    if reward.len() != mdp.num_terminal() * k {
        return Err(IglError::InvalidArgument(format!(
            "reward has {} entries, expected {}",
            reward.len(),
            mdp.num_terminal() * k
        )));
    }
    let a = constraint_matrix(mdp);
    let mut b = DVector::zeros(mdp.num_states());
    b[mdp.start_state()] = 1.0;
    let f = DVector::from_vec(full_reward(mdp, reward));
    let start = OccupancyMeasure::of_policy(mdp, &StatePolicy::uniform(mdp.num_states(), k));
    let mut q = DVector::from_vec(start.values);

    let mut nu = DVector::zeros(mdp.num_states());
    let mut weight = gamma.min(1.0);
    let mut iterations = 0;
    loop {
        iterations += newton(&a, &b, &f, weight, &mut q, &mut nu)?;
        if weight >= gamma {
            break;
        }
        let next = (weight * CONTINUATION_FACTOR).min(gamma);
        // multipliers scale roughly with the weight
        nu *= next / weight;
        weight = next;
    }
    Ok(OccupancyMeasure {
        num_actions: k,
        values: q.as_slice().to_vec(),
        iterations,
    })
}

fn scaled_objective(f: &DVector<f64>, weight: f64, q: &DVector<f64>) -> f64 {
    -weight * f.dot(q) - q.iter().map(|v| v.ln()).sum::<f64>()
}

/// Minimizes `-w f·q - Σ ln q` subject to `A q = b` from a strictly positive
/// start. Returns the iteration count.
///
/// The gradient is shifted by the running multiplier estimate `Aᵀν`, which
/// leaves the Newton step unchanged but keeps the Schur right-hand side small
/// near the optimum. The infeasibility correction is solved separately so
/// that a tiny flow residual is not lost next to a large gradient.
fn newton(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    f: &DVector<f64>,
    weight: f64,
    q: &mut DVector<f64>,
    nu: &mut DVector<f64>,
) -> Result<usize> {
    let mut decrement = f64::INFINITY;
    for it in 0..MAX_NEWTON_ITERATIONS {
        let grad = q.map(|v| -1.0 / v) - f * weight;
        let shifted = &grad + a.transpose() * &*nu;
        let hinv = q.map(|v| v * v);
        let residual = b - a * &*q;
        let ah = a * DMatrix::from_diagonal(&hinv);
        let schur = (&ah * a.transpose()).cholesky().ok_or_else(|| IglError::Numerical {
            message: "KKT Schur complement is not positive definite".into(),
            residual: residual.amax(),
        })?;
        // (A H⁻¹ Aᵀ) w = -A H⁻¹ g̃
        let w = schur.solve(&-(&ah * &shifted));
        let optimality = hinv.component_mul(&(-&shifted - a.transpose() * &w));
        let feasibility = ah.transpose() * schur.solve(&residual);
        decrement = optimality.component_div(q).norm();
        if !decrement.is_finite() {
            break;
        }
        if decrement <= NEWTON_DECREMENT_TOLERANCE && residual.amax() <= FLOW_TOLERANCE {
            return Ok(it);
        }
        *nu += &w;
        let step = optimality + feasibility;
        let mut t = 1.0;
        while (0..q.len()).any(|i| q[i] + t * step[i] <= 0.0) {
            t *= BACKTRACK;
        }
        if decrement > 0.25 {
            let base = scaled_objective(f, weight, q);
            let slope = grad.dot(&step);
            while t > 1e-12 && scaled_objective(f, weight, &(&*q + &step * t)) > base + ARMIJO * t * slope {
                t *= BACKTRACK;
            }
        }
        q.axpy(t, &step, 1.0);
    }
    Err(IglError::Numerical {
        message: format!(
            "occupancy Newton solve did not converge within {MAX_NEWTON_ITERATIONS} iterations at weight {weight}"
        ),
        residual: decrement,
    })
}
