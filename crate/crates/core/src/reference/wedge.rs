//! Full eigen-series for Brownian motion killed on leaving a planar wedge.
//!
//! In the wedge `{0 < θ < α}` every angular eigenfunction is known,
//! `m_j(θ) = sin(jπθ/α)`, so the killed heat kernel can be summed directly:
//!
//! `p_t(x, z) = 2/(α t) · e^{-(r²+ρ²)/2t} · Σ_j sin(jπθ/α) sin(jπφ/α) I_{jπ/α}(rρ/t)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::reference::bessel::bessel_i_scaled;

/// Killed transition density between polar points `(r, θ)` and `(ρ, φ)`,
/// with respect to Lebesgue measure in the plane.
pub fn wedge_killed_density(
    alpha: f64,
    t: f64,
    r: f64,
    theta: f64,
    rho: f64,
    phi: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0 * PI) || !(t > 0.0) || !(r > 0.0) || !(rho > 0.0) {
        return Err(Error::invalid("need α ∈ (0, 2π), t > 0 and positive radii"));
    }
    if !(theta > 0.0 && theta < alpha) || !(phi > 0.0 && phi < alpha) {
        return Ok(0.0);
    }
    let z = r * rho / t;
    let k = PI / alpha;
    let mut sum = 0.0;
    let mut j = 1.0;
    loop {
        let term = (j * k * theta).sin() * (j * k * phi).sin() * bessel_i_scaled(j * k, z);
        sum += term;
        // Terms decay super-geometrically once the order exceeds the argument.
        if j * k > z + 10.0 && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
        if j > 10_000.0 {
            break;
        }
        j += 1.0;
    }
    Ok(2.0 / (alpha * t) * (-(r - rho).powi(2) / (2.0 * t)).exp() * sum)
}
