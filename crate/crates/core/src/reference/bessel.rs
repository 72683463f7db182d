//! Modified Bessel function of the first kind, evaluated in log space.
//!
//! The positive power series is used while `z ≤ 25 + ν²/2`; beyond that the
//! large-argument Hankel expansion converges to full precision long before
//! its terms start to grow.

use statrs::function::gamma::ln_gamma;

fn series_threshold(nu: f64) -> f64 {
    25.0 + 0.5 * nu * nu
}

/// `ln I_ν(z)` for `ν > -1`, `z > 0`.
pub fn ln_bessel_i(nu: f64, z: f64) -> f64 {
    debug_assert!(nu > -1.0 && z > 0.0);
    if z <= series_threshold(nu) {
        ln_series(nu, z)
    } else {
        z + ln_hankel_scaled(nu, z)
    }
}

/// `e^{-z} I_ν(z)`.
pub fn bessel_i_scaled(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    (ln_bessel_i(nu, z) - z).exp()
}

pub fn bessel_i(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    ln_bessel_i(nu, z).exp()
}

fn ln_series(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let lead = nu * (0.5 * z).ln() - ln_gamma(nu + 1.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        term *= q / ((k + 1.0) * (k + nu + 1.0));
        sum += term;
        k += 1.0;
        if term < 1e-17 * sum && k > q.sqrt() {
            break;
        }
    }
    lead + sum.ln()
}

/// `ln(e^{-z} I_ν(z))` from `1/√(2πz) Σ (-1)^k a_k(ν) z^{-k}`.
fn ln_hankel_scaled(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * z).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn half_integer_closed_forms() {
        for &z in &[
            1e-3, 0.1, 0.5, 1.0, 3.0, 10.0, 24.0, 25.5, 30.0, 60.0, 200.0, 600.0,
        ] {
            let c = (2.0 / (PI * z)).sqrt();
            // e^{-z} sinh z and e^{-z} cosh z, stable for large z.
            let sh = 0.5 * (1.0 - (-2.0 * z).exp());
            let ch = 0.5 * (1.0 + (-2.0 * z).exp());
            let half = if z < 1e-2 {
                c * z.sinh() * (-z).exp()
            } else {
                c * sh
            };
            assert!(rel(bessel_i_scaled(0.5, z), half) < 1e-13, "I_1/2({z})");
            if z > 0.05 {
                let three_half = c * (ch - sh / z);
                assert!(
                    rel(bessel_i_scaled(1.5, z), three_half) < 1e-12,
                    "I_3/2({z})"
                );
            }
        }
    }

    #[test]
    fn integer_order_values() {
        // I_0(1), I_1(1), I_0(30) scaled
        assert!(rel(bessel_i(0.0, 1.0), 1.266_065_877_752_008_4) < 1e-14);
        assert!(rel(bessel_i(1.0, 1.0), 0.565_159_103_992_485) < 1e-14);
        assert!(rel(bessel_i_scaled(0.0, 30.0), 0.073_145_946_482_237_3) < 1e-12);
    }

    #[test]
    fn continuity_at_switch() {
        for &nu in &[0.0, 0.5, 1.5, 2.0, 4.5, 10.5] {
            let z = series_threshold(nu);
            let a = ln_series(nu, z);
            let b = z + ln_hankel_scaled(nu, z);
            assert!(
                (a - b).abs() < 1e-12 * a.abs().max(1.0),
                "nu={nu}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn recurrence() {
        // I_{ν-1} - I_{ν+1} = (2ν/z) I_ν
        for &(nu, z) in &[(1.5, 0.7), (2.5, 12.0), (3.0, 40.0), (7.5, 90.0)] {
            let lhs = bessel_i_scaled(nu - 1.0, z) - bessel_i_scaled(nu + 1.0, z);
            let rhs = 2.0 * nu / z * bessel_i_scaled(nu, z);
            assert!(rel(lhs, rhs) < 1e-11);
        }
    }
}
