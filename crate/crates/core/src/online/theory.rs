//! Closed-form parameter choices that balance the regret terms.

/// `(γ, N₀, ε)` for a run of `T` episodes.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TheoryParams {
    pub gamma: f64,
    pub n0: f64,
    pub epsilon: f64,
}

/// `γ = min{√(TSKH/Reg), √(T/(SKH³)), T^¼ S^¼ K^½ L^-½ H^¾}`,
/// `N₀ = max{L√(TKH)/S, γ^⅔ T^⅓ S^-⅔ K^⅔ L^{4/3}}`,
/// `ε = max{√(N₀/T), (SKH/T)^⅓}`.
pub fn compute_theory_params(
    episodes: f64,
    num_states: f64,
    num_actions: f64,
    horizon: f64,
    lipschitz: f64,
    regret_bound: f64,
) -> TheoryParams {
    let (t, s, k, h, l) = (episodes, num_states, num_actions, horizon, lipschitz);
    let gamma = [
        (t * s * k * h / regret_bound).sqrt(),
        (t / (s * k * h.powi(3))).sqrt(),
        t.powf(0.25) * s.powf(0.25) * k.sqrt() / l.sqrt() * h.powf(0.75),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let n0 = f64::max(
        l * (t * k * h).sqrt() / s,
        gamma.powf(2.0 / 3.0) * t.powf(1.0 / 3.0) * s.powf(-2.0 / 3.0) * k.powf(2.0 / 3.0) * l.powf(4.0 / 3.0),
    );
    let epsilon = f64::max((n0 / t).sqrt(), (s * k * h / t).cbrt());
    TheoryParams { gamma, n0, epsilon }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_triple_is_frozen() {
        let p = compute_theory_params(4e4, 5.0, 5.0, 3.0, 27.864, 4f64.ln());
        assert!((p.gamma - FROZEN.0).abs() < 1e-9 * FROZEN.0, "{p:?}");
        assert!((p.n0 - FROZEN.1).abs() < 1e-9 * FROZEN.1, "{p:?}");
        assert!((p.epsilon - FROZEN.2).abs() < 1e-9 * FROZEN.2, "{p:?}");
    }

    // T = 4e4, S = K = 5, H = 3, L = 27.864, Reg = ln 4
    const FROZEN: (f64, f64, f64) = (7.69800358919501, 11263.24035284954, 0.5306420722306501);

    #[test]
    fn n0_is_monotone_in_t() {
        for &s in &[2.0, 5.0, 20.0] {
            for &k in &[2.0, 5.0] {
                for &h in &[1.0, 3.0, 6.0] {
                    for &l in &[1.0, 27.864, 500.0] {
                        let mut t = 10.0;
                        while t < 1e9 {
                            let a = compute_theory_params(t, s, k, h, l, 2.0);
                            let b = compute_theory_params(2.0 * t, s, k, h, l, 2.0);
                            assert!(b.n0 >= a.n0);
                            t *= 3.0;
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_vanishes_as_l_grows() {
        let p = compute_theory_params(4e4, 5.0, 5.0, 3.0, 1e30, 1.0);
        assert!(p.gamma < 1e-10);
    }
}
