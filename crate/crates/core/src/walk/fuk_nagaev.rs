//! Fuk–Nagaev type bounds for the running maximum `M(n) = max_{k≤n} |S(k)|`.

use crate::error::{Error, Result};
use crate::increments::StepDistribution;

/// `2d · e^{x/(√d y)} · (√d n / (x y))^{x/(√d y)}`, a bound on
/// `P(M(n) > x, max_k |X(k)| ≤ y)`.
pub fn fuk_nagaev_bound(n: usize, x_level: f64, y_level: f64, d: usize) -> Result<f64> {
    if !(x_level > 0.0 && y_level > 0.0) || d == 0 {
        return Err(Error::invalid(format!(
            "levels must be positive (x = {x_level}, y = {y_level}, d = {d})"
        )));
    }
    let sd = (d as f64).sqrt();
    let e = x_level / (sd * y_level);
    let log = (2.0 * d as f64).ln() + e + e * (sd * n as f64 / (x_level * y_level)).ln();
    Ok(log.exp())
}

/// The bound above plus `n · P(|X| > y)`, a bound on `P(M(n) > x)`.
pub fn fuk_nagaev_bound_with_tail(
    dist: &StepDistribution,
    n: usize,
    x_level: f64,
    y_level: f64,
) -> Result<f64> {
    let base = fuk_nagaev_bound(n, x_level, y_level, dist.dim())?;
    Ok(base + n as f64 * dist.tail_probability(y_level))
}
