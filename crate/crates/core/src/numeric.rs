//! Small numeric helpers shared across modules.

/// Compensated (Neumaier) summation.
///
/// Used wherever a sum feeds an exact threshold comparison, e.g. the reward
/// mass `Q` of a terminal state against the identifiability constant `M`.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Checks that `row` is a probability vector up to `tol` on the total mass.
pub fn is_probability_vector(row: &[f64], tol: f64) -> bool {
    !row.is_empty()
        && row.iter().all(|p| p.is_finite() && *p >= 0.0)
        && (compensated_sum(row.iter().copied()) - 1.0).abs() <= tol
}
