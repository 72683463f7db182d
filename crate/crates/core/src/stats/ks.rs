//! Kolmogorov–Smirnov statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `c(α) = √(-½ ln(α/2))`, the asymptotic Kolmogorov critical value.
pub fn ks_critical(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// Kolmogorov survival function `P(K > λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn effective_scale(n: f64) -> f64 {
    let s = n.sqrt();
    s + 0.12 + 0.11 / s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Rejection threshold for the statistic at the requested level.
    pub threshold: f64,
    /// Sample size, or the effective size for weighted and two-sample tests.
    pub n_effective: f64,
}

impl KsResult {
    pub fn rejects(&self) -> bool {
        self.statistic > self.threshold
    }
}

/// One-sample test of `samples` against a continuous distribution function.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::invalid("KS test needs at least one sample"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("KS samples contain NaN"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let scale = effective_scale(n);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(scale * d),
        threshold: ks_critical(alpha) / scale,
        n_effective: n,
    })
}

/// One-sample test of a weighted sample; the size is `(Σw)² / Σw²`.
pub fn ks_one_sample_weighted(
    samples: &[f64],
    weights: &[f64],
    cdf: impl Fn(f64) -> f64,
    alpha: f64,
) -> Result<KsResult> {
    let (xs, ws, n_eff) = weighted_sorted(samples, weights)?;
    let mut acc = 0.0;
    let mut d = 0.0f64;
    for (x, w) in xs.iter().zip(&ws) {
        let f = cdf(*x);
        d = d.max(f - acc);
        acc += w;
        d = d.max(acc - f);
    }
    let scale = effective_scale(n_eff);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(scale * d),
        threshold: ks_critical(alpha) / scale,
        n_effective: n_eff,
    })
}

/// Sorted values with normalised weights and the effective sample size.
fn weighted_sorted(samples: &[f64], weights: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if samples.is_empty() || samples.len() != weights.len() {
        return Err(Error::invalid(
            "weighted KS needs matching, nonempty inputs",
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("weights are all zero"));
    }
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    Ok((
        idx.iter().map(|&i| samples[i]).collect(),
        idx.iter().map(|&i| weights[i] / total).collect(),
        total * total / sq,
    ))
}

/// Two-sample test with threshold `c(α) √((m+n)/(mn))`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    let wa = vec![1.0; a.len()];
    let wb = vec![1.0; b.len()];
    ks_two_sample_weighted(a, &wa, b, &wb, alpha)
}

/// Two-sample test between weighted empirical laws, with effective sizes.
pub fn ks_two_sample_weighted(
    a: &[f64],
    wa: &[f64],
    b: &[f64],
    wb: &[f64],
    alpha: f64,
) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("two-sample KS needs two nonempty samples"));
    }
    let (xa, pa, na) = weighted_sorted(a, wa)?;
    let (xb, pb, nb) = weighted_sorted(b, wb)?;
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < xa.len() && xa[i] == x {
            fa += pa[i];
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            fb += pb[j];
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(effective_scale(n_eff) * d),
        threshold: ks_critical(alpha) * ((na + nb) / (na * nb)).sqrt(),
        n_effective: n_eff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value_at_one_percent() {
        assert!((ks_critical(0.01) - 1.6276).abs() < 1e-4);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn one_sample_examples() {
        let r = ks_one_sample(&[0.5], |x| x.clamp(0.0, 1.0), 0.01).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-15);
        let n = 99;
        let q: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let r = ks_one_sample(&q, |x| x, 0.01).unwrap();
        assert!(r.statistic <= 1.0 / (n + 1) as f64 + 1e-12);
        let c = vec![0.5; 1000];
        assert!(ks_one_sample(&c, |x| x, 0.01).unwrap().statistic >= 0.5);
        assert!(ks_one_sample(&[], |x| x, 0.01).is_err());
    }

    #[test]
    fn two_sample_examples() {
        let a = [0.1, 0.4, 0.7];
        assert_eq!(ks_two_sample(&a, &a, 0.01).unwrap().statistic, 0.0);
        let r = ks_two_sample(&a, &[2.0, 3.0], 0.01).unwrap();
        assert_eq!(r.statistic, 1.0);
        let th = r.threshold;
        assert!((th - ks_critical(0.01) * (5.0f64 / 6.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weighted_matches_unweighted_for_unit_weights() {
        let xs: Vec<f64> = (0..50)
            .map(|i| ((i * 37) % 50) as f64 / 50.0 + 0.01)
            .collect();
        let a = ks_one_sample(&xs, |x| x, 0.01).unwrap();
        let b = ks_one_sample_weighted(&xs, &vec![2.0; 50], |x| x, 0.01).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert!((b.n_effective - 50.0).abs() < 1e-9);
    }
}
