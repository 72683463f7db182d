//! Limit objects: the entrance law of the `u`-transformed Brownian motion,
//! its Bessel radial part, grid Brownian meanders and the bridge weight.

pub mod bessel;
pub mod diffusion;
pub mod identity;
pub mod wedge;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::cone::{ConeSpec, RadialLaw};
use crate::error::{Error, Result};
use crate::exec;
use crate::point::norm;
use crate::rng;

pub use diffusion::{
    sample_bm_meander, sample_bm_meander_with, sample_h_bm, sample_h_bm_with, DiffusionEnsemble,
    GridOptions,
};
pub use identity::{htransform_limit_identity_check, htransform_limit_identity_from};

/// Density of `|B(t)|` under the entrance law, for Bessel dimension `k`.
pub fn entrance_density_k(k: f64, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    if r <= 0.0 {
        return Ok(if r == 0.0 && k == 1.0 {
            (2.0 / (std::f64::consts::PI * t)).sqrt()
        } else {
            0.0
        });
    }
    let ln = (k - 1.0) * r.ln()
        - r * r / (2.0 * t)
        - 0.5 * k * t.ln()
        - (0.5 * k - 1.0) * std::f64::consts::LN_2
        - ln_gamma(0.5 * k);
    Ok(ln.exp())
}

/// `r^{k-1} e^{-r²/2t} / (t^{k/2} 2^{k/2-1} Γ(k/2))` with `k = 2p + d`.
pub fn entrance_law_density(cone: &ConeSpec, t: f64, r: f64) -> Result<f64> {
    entrance_density_k(cone.radial_law().degrees, t, r)
}

/// Distribution function of the entrance law: `P(|B(t)| ≤ r)`.
pub fn entrance_law_cdf(cone: &ConeSpec, t: f64, r: f64) -> Result<f64> {
    chi_cdf(cone.radial_law().degrees, t, r)
}

/// `P(|Z| ≤ r)` for `Z` standard Gaussian in dimension `k`, scaled by `√t`.
pub fn chi_cdf(k: f64, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    Ok(if r <= 0.0 {
        0.0
    } else {
        gamma_lr(0.5 * k, r * r / (2.0 * t))
    })
}

/// Transition density `q_h(r1, r2)` of the Bessel process with `law`.
pub fn radial_transition_density(law: &RadialLaw, h: f64, r1: f64, r2: f64) -> Result<f64> {
    if !(h > 0.0) || r1 < 0.0 || r2 < 0.0 {
        return Err(Error::invalid(format!(
            "need h > 0 and nonnegative radii (h = {h}, r1 = {r1}, r2 = {r2})"
        )));
    }
    if r1 == 0.0 {
        return entrance_density_k(law.degrees, h, r2);
    }
    if r2 == 0.0 {
        return Ok(0.0);
    }
    let a = law.index;
    let z = r1 * r2 / h;
    let ln = a * (r2 / r1).ln() + (r2 / h).ln() - (r1 - r2).powi(2) / (2.0 * h)
        + bessel::ln_bessel_i(a, z)
        - z;
    Ok(ln.exp())
}

/// `P(R_h ≤ r2 | R_0 = r1)`: `R_h²/h` is noncentral chi-square with
/// `δ` degrees of freedom and noncentrality `r1²/h`, a Poisson mixture of
/// central chi-square laws.
pub fn radial_transition_cdf(law: &RadialLaw, h: f64, r1: f64, r2: f64) -> Result<f64> {
    if !(h > 0.0) || r1 < 0.0 {
        return Err(Error::invalid("need h > 0 and r1 ≥ 0"));
    }
    if r2 <= 0.0 {
        return Ok(0.0);
    }
    let half_lambda = r1 * r1 / (2.0 * h);
    let x = r2 * r2 / (2.0 * h);
    let k = 0.5 * law.degrees;
    if half_lambda == 0.0 {
        return Ok(gamma_lr(k, x));
    }
    let mode = half_lambda.floor() as i64;
    let spread = (10.0 * half_lambda.sqrt()).ceil() as i64 + 40;
    let lo = (mode - spread).max(0);
    let hi = mode + spread;
    let mut total = 0.0;
    for j in lo..=hi {
        let jf = j as f64;
        let lw = -half_lambda + jf * half_lambda.ln() - ln_gamma(jf + 1.0);
        total += lw.exp() * gamma_lr(k + jf, x);
    }
    Ok(total.clamp(0.0, 1.0))
}

/// One exact Bessel transition over time `h` from radius `r`.
pub fn sample_bessel_step<R: Rng + ?Sized>(law: &RadialLaw, h: f64, r: f64, rng: &mut R) -> f64 {
    let half_lambda = r * r / (2.0 * h);
    let extra = if half_lambda > 0.0 {
        Poisson::new(half_lambda).unwrap().sample(rng)
    } else {
        0.0
    };
    let g = Gamma::new(0.5 * law.degrees + extra, 1.0)
        .unwrap()
        .sample(rng);
    (2.0 * h * g).sqrt()
}

/// Radial paths of the Bessel process at the given increasing times.
/// Path `i` is drawn from stream `(seed, i)`.
pub fn sample_bessel(
    law: &RadialLaw,
    r0: f64,
    times: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if r0 < 0.0 {
        return Err(Error::invalid("start radius must be nonnegative"));
    }
    if r0 == 0.0 && law.degrees < 2.0 {
        return Err(Error::invalid(format!(
            "entrance from 0 needs dimension at least 2, got {}",
            law.degrees
        )));
    }
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "times must be nonnegative and strictly increasing",
        ));
    }
    Ok(exec::map_indexed(count, |i| {
        let mut rng = rng::stream(seed, i as u64);
        let mut r = r0;
        let mut t = 0.0;
        times
            .iter()
            .map(|&s| {
                if s > t {
                    r = sample_bessel_step(law, s - t, r, &mut rng);
                    t = s;
                }
                r
            })
            .collect()
    }))
}

/// `u(w) e^{-|w|²/2(1-t)} t^{-p/2} (1-t)^{-p/2-d/2}`, unnormalised.
pub fn bridge_weight(cone: &ConeSpec, t: f64, w: &[f64]) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("t must lie in (0, 1), got {t}")));
    }
    let u = cone.u_value(w)?;
    if !(u > 0.0) {
        return Ok(0.0);
    }
    let p = cone.exponent();
    let d = cone.dimension() as f64;
    let r = norm(w);
    let ln = u.ln()
        - r * r / (2.0 * (1.0 - t))
        - 0.5 * p * t.ln()
        - (0.5 * p + 0.5 * d) * (1.0 - t).ln();
    Ok(ln.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceObject {
    Meander,
    HBm,
    Bessel,
    EntranceDensity,
    Kernel,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeKind;

    #[test]
    fn entrance_examples() {
        let half = ConeSpec::half_line();
        assert_eq!(entrance_law_density(&half, 1.0, 0.0).unwrap(), 0.0);
        let v = entrance_law_density(&half, 1.0, 1.0).unwrap();
        assert!((v - 0.483_941_449_038_286_7).abs() < 1e-12);
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        for &t in &[0.1, 0.5, 2.0, 7.0] {
            for &r in &[0.05, 0.4, 1.0, 2.5] {
                let a = entrance_law_density(&q, t, r).unwrap();
                let b = entrance_law_density(&q, 1.0, r / t.sqrt()).unwrap() / t.sqrt();
                assert!((a - b).abs() < 1e-12 * b.max(1e-300));
            }
        }
        assert!(entrance_law_density(&q, 0.0, 1.0).is_err());
    }

    #[test]
    fn three_dimensional_kernel() {
        let law = RadialLaw::new(3.0).unwrap();
        let q = radial_transition_density(&law, 1.0, 1.0, 1.0).unwrap();
        // (r2/h) e^{-(r1²+r2²)/2h} (r2/r1)^{1/2} √(2h/(π r1 r2)) sinh(r1 r2/h)
        let closed = (-1.0f64).exp() * (2.0 / std::f64::consts::PI).sqrt() * 1.0f64.sinh();
        assert!((q - closed).abs() < 1e-12 * closed);
    }

    #[test]
    fn transition_cdf_limits() {
        let law = RadialLaw::new(4.0).unwrap();
        assert_eq!(radial_transition_cdf(&law, 1.0, 2.0, 0.0).unwrap(), 0.0);
        assert!((radial_transition_cdf(&law, 0.3, 2.0, 50.0).unwrap() - 1.0).abs() < 1e-12);
        let a = radial_transition_cdf(&law, 1.0, 0.0, 1.3).unwrap();
        assert!((a - chi_cdf(4.0, 1.0, 1.3).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn bessel_paths_are_seeded() {
        let law = RadialLaw::new(3.0).unwrap();
        let a = sample_bessel(&law, 0.0, &[0.25, 0.5, 1.0], 50, 9).unwrap();
        let b = sample_bessel(&law, 0.0, &[0.25, 0.5, 1.0], 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(sample_bessel(&RadialLaw::new(1.5).unwrap(), 0.0, &[1.0], 1, 0).is_err());
    }

    #[test]
    fn bridge_weight_examples() {
        let half = ConeSpec::half_line();
        let ratio =
            bridge_weight(&half, 0.5, &[1.0]).unwrap() / bridge_weight(&half, 0.5, &[2.0]).unwrap();
        assert!((ratio - 0.5 * 3f64.exp()).abs() < 1e-12);
        assert!((ratio - 10.0428).abs() < 1e-4);
        assert_eq!(bridge_weight(&half, 0.5, &[0.0]).unwrap(), 0.0);
        assert!(bridge_weight(&half, 1.0, &[1.0]).is_err());
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let a = bridge_weight(&q, 0.3, &[0.4, 1.7]).unwrap();
        let b = bridge_weight(&q, 0.3, &[1.7, 0.4]).unwrap();
        assert!((a - b).abs() < 1e-15 * a);
    }
}
