//! Statistical instruments and the convergence experiments built on them.

pub mod experiments;
pub mod ks;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng;

pub use ks::{
    ks_critical, ks_one_sample, ks_one_sample_weighted, ks_two_sample, ks_two_sample_weighted,
    KsResult,
};

/// One comparison inside a report. Negative controls pass when the
/// statistic exceeds its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub expect_reject: bool,
    pub pass: bool,
    pub sample_sizes: Vec<usize>,
}

impl Check {
    pub fn accept(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        sizes: Vec<usize>,
    ) -> Check {
        Check {
            name: name.into(),
            statistic,
            threshold,
            expect_reject: false,
            pass: statistic <= threshold,
            sample_sizes: sizes,
        }
    }

    pub fn reject(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        sizes: Vec<usize>,
    ) -> Check {
        Check {
            name: name.into(),
            statistic,
            threshold,
            expect_reject: true,
            pass: statistic > threshold,
            sample_sizes: sizes,
        }
    }

    pub fn from_ks(name: impl Into<String>, r: &KsResult, sizes: Vec<usize>) -> Check {
        Check::accept(name, r.statistic, r.threshold, sizes)
    }

    /// `statistic / threshold`, inverted for negative controls, so that
    /// values at most 1 pass.
    pub fn normalised(&self) -> f64 {
        if self.expect_reject {
            if self.statistic > 0.0 {
                self.threshold / self.statistic
            } else {
                f64::INFINITY
            }
        } else if self.threshold > 0.0 {
            self.statistic / self.threshold
        } else if self.statistic == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub experiment: String,
    /// Largest normalised check statistic.
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub sample_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub checks: Vec<Check>,
}

impl TestReport {
    pub fn new(experiment: impl Into<String>, checks: Vec<Check>, seeds: Vec<u64>) -> TestReport {
        let statistic = checks.iter().map(Check::normalised).fold(0.0, f64::max);
        let mut sizes: Vec<usize> = checks.iter().flat_map(|c| c.sample_sizes.clone()).collect();
        sizes.dedup();
        TestReport {
            experiment: experiment.into(),
            statistic,
            threshold: 1.0,
            pass: checks.iter().all(|c| c.pass),
            sample_sizes: sizes,
            seeds,
            metadata: BTreeMap::new(),
            checks,
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> TestReport {
        self.metadata.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `½ Σ |p - q|` over the union of supports.
pub fn tv_distance<K: Ord + Clone>(p: &[(K, f64)], q: &[(K, f64)]) -> Result<f64> {
    let mut m: BTreeMap<K, f64> = BTreeMap::new();
    for (k, v) in p {
        if *v < 0.0 {
            return Err(Error::invalid("negative mass"));
        }
        *m.entry(k.clone()).or_default() += v;
    }
    for (k, v) in q {
        if *v < 0.0 {
            return Err(Error::invalid("negative mass"));
        }
        *m.entry(k.clone()).or_default() -= v;
    }
    Ok(0.5 * m.values().map(|v| v.abs()).sum::<f64>())
}

/// Empirical law of a sample of keys.
pub fn empirical<K: Ord + Clone>(samples: &[K]) -> Vec<(K, f64)> {
    let mut m: BTreeMap<K, usize> = BTreeMap::new();
    for s in samples {
        *m.entry(s.clone()).or_default() += 1;
    }
    let n = samples.len() as f64;
    m.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// Half-width of the 95% confidence interval for the slope.
    pub half_width: f64,
    /// Horizons used (tail half of the grid).
    pub used: Vec<f64>,
}

/// Least-squares slope of `log P` against `log n` on the tail half of the
/// grid. Needs at least 5 horizons spanning 1.5 decades.
pub fn exponent_fit(survivals: &[(f64, f64)]) -> Result<ExponentFit> {
    if survivals.len() < 5 {
        return Err(Error::invalid("exponent fit needs at least 5 horizons"));
    }
    let mut pts = survivals.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span = (pts.last().unwrap().0 / pts[0].0).log10();
    if !(span >= 1.5 - 1e-9) {
        return Err(Error::invalid(format!(
            "horizons span {span:.2} decades; at least 1.5 are needed"
        )));
    }
    let tail = &pts[pts.len() / 2..];
    if tail.iter().any(|(n, p)| !(*p > 0.0) || !(*n > 0.0)) {
        return Err(Error::invalid(
            "survival estimates in the fit range must be positive",
        ));
    }
    let xs: Vec<f64> = tail.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, p)| p.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let std_error = if m > 2.0 {
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let t = if m > 2.0 {
        StudentsT::new(0.0, 1.0, m - 2.0)
            .unwrap()
            .inverse_cdf(0.975)
    } else {
        f64::INFINITY
    };
    Ok(ExponentFit {
        slope,
        intercept,
        std_error,
        half_width: t * std_error,
        used: tail.iter().map(|(n, _)| *n).collect(),
    })
}

/// `count` log-spaced integer horizons from `a` to `b`, deduplicated.
pub fn log_horizons(a: usize, b: usize, count: usize) -> Vec<usize> {
    if count <= 1 || a >= b {
        return vec![a];
    }
    let (la, lb) = ((a as f64).ln(), (b as f64).ln());
    let mut v: Vec<usize> = (0..count)
        .map(|i| {
            (la + (lb - la) * i as f64 / (count - 1) as f64)
                .exp()
                .round() as usize
        })
        .collect();
    v.dedup();
    v
}

/// Parses `a:b:logK` (K log-spaced points per decade), `a:b:K` (K points in
/// total) or `a:b` (4 per decade).
pub fn parse_horizons(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parse(format!("bad horizon grid '{spec}'"));
    let parts: Vec<&str> = spec.trim().split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let a: usize = parts[0].trim().parse().map_err(|_| bad())?;
    let b: usize = parts[1].trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    let decades = (b as f64 / a as f64).log10();
    let per_decade = |k: usize| ((decades * k as f64).round() as usize + 1).max(2);
    let count = match parts.get(2).map(|s| s.trim()) {
        None => per_decade(4),
        Some(p) => match p.strip_prefix("log") {
            Some(k) => per_decade(k.parse().map_err(|_| bad())?),
            None => p.parse().map_err(|_| bad())?,
        },
    };
    if count == 0 {
        return Err(bad());
    }
    Ok(log_horizons(a, b, count))
}

/// Self-normalised weighted mean.
pub fn weighted_mean(values: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        None => values.iter().sum::<f64>() / values.len() as f64,
        Some(w) => {
            let s: f64 = w.iter().sum();
            values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / s
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBand {
    /// `mean(a) - mean(b)`.
    pub difference: f64,
    pub lower: f64,
    pub upper: f64,
    /// Quantile of `|diff* - diff|` at the band level.
    pub threshold: f64,
    pub resamples: usize,
}

impl BootstrapBand {
    pub fn contains_zero(&self) -> bool {
        self.lower <= 0.0 && 0.0 <= self.upper
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 400;

/// Basic bootstrap band for the difference of two (weighted) means from
/// independent samples, at coverage `1 - alpha`.
pub fn bootstrap_difference(
    a: &[f64],
    wa: Option<&[f64]>,
    b: &[f64],
    wb: Option<&[f64]>,
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<BootstrapBand> {
    if a.is_empty() || b.is_empty() || resamples == 0 {
        return Err(Error::invalid("bootstrap needs two nonempty samples"));
    }
    let diff = weighted_mean(a, wa) - weighted_mean(b, wb);
    let resample = |xs: &[f64], ws: Option<&[f64]>, g: &mut rng::StreamRng| -> f64 {
        let n = xs.len();
        let (mut s, mut t) = (0.0, 0.0);
        for _ in 0..n {
            let i = g.random_range(0..n);
            let w = ws.map_or(1.0, |w| w[i]);
            s += w * xs[i];
            t += w;
        }
        s / t
    };
    let mut devs: Vec<f64> = (0..resamples)
        .map(|r| {
            let mut g = rng::stream(seed, r as u64);
            resample(a, wa, &mut g) - resample(b, wb, &mut g) - diff
        })
        .collect();
    devs.sort_by(|x, y| x.total_cmp(y));
    let q = |p: f64| devs[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let lower = diff - q(1.0 - alpha / 2.0);
    let upper = diff - q(alpha / 2.0);
    let mut abs: Vec<f64> = devs.iter().map(|d| d.abs()).collect();
    abs.sort_by(|x, y| x.total_cmp(y));
    let threshold =
        abs[(((1.0 - alpha) * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok(BootstrapBand {
        difference: diff,
        lower,
        upper,
        threshold,
        resamples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub bins: usize,
}

/// Pearson chi-square test of uniformity on `[0, 1]` with equal bins.
pub fn chi_square_uniform(values: &[f64], bins: usize, alpha: f64) -> Result<ChiSquareResult> {
    if values.is_empty() || bins < 2 {
        return Err(Error::invalid(
            "chi-square test needs samples and at least 2 bins",
        ));
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("value {v} outside [0, 1]")));
        }
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = values.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let chi = ChiSquared::new((bins - 1) as f64).unwrap();
    Ok(ChiSquareResult {
        statistic: stat,
        threshold: chi.inverse_cdf(1.0 - alpha),
        p_value: 1.0 - chi.cdf(stat),
        bins,
    })
}

/// Adds independent `U(-s_i/2, s_i/2)` noise to each coordinate, spreading
/// a lattice point uniformly over its cell.
pub fn jitter<R: Rng + ?Sized>(z: &mut [f64], spacing: &[i64], rng: &mut R) {
    for (c, &s) in z.iter_mut().zip(spacing) {
        *c += (rng.random::<f64>() - 0.5) * s as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let p = vec![(1, 0.5), (2, 0.5)];
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_distance(&[(1, 1.0)], &[(2, 1.0)]).unwrap(), 1.0);
        assert!(tv_distance(&[(1, -0.1)], &[(1, 1.0)]).is_err());
    }

    #[test]
    fn exact_power_law_slope() {
        let pts: Vec<(f64, f64)> = log_horizons(10, 1000, 9)
            .into_iter()
            .map(|n| (n as f64, (n as f64).powf(-1.5)))
            .collect();
        let f = exponent_fit(&pts).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(exponent_fit(&pts[..4]).is_err());
        let short: Vec<(f64, f64)> = (1..=6).map(|i| (10.0 * i as f64, 1.0)).collect();
        assert!(exponent_fit(&short).is_err());
    }

    #[test]
    fn report_aggregation() {
        let r = TestReport::new(
            "x",
            vec![
                Check::accept("a", 0.5, 1.0, vec![10]),
                Check::reject("b", 3.0, 1.0, vec![10]),
            ],
            vec![1],
        );
        assert!(r.pass);
        assert!((r.statistic - 0.5).abs() < 1e-15);
        let bad = TestReport::new("y", vec![Check::reject("b", 0.5, 1.0, vec![])], vec![]);
        assert!(!bad.pass && bad.statistic > bad.threshold);
    }

    #[test]
    fn bootstrap_band_covers_equal_means() {
        let a: Vec<f64> = (0..2000).map(|i| (i % 17) as f64).collect();
        let b: Vec<f64> = (0..1500).map(|i| (i % 17) as f64).collect();
        let band = bootstrap_difference(&a, None, &b, None, 400, 0.01, 3).unwrap();
        assert!(band.contains_zero());
        assert!(band.difference.abs() <= band.threshold);
        let c: Vec<f64> = b.iter().map(|v| v + 5.0).collect();
        let far = bootstrap_difference(&a, None, &c, None, 400, 0.01, 3).unwrap();
        assert!(!far.contains_zero());
    }

    #[test]
    fn chi_square_threshold() {
        let u: Vec<f64> = (0..2000).map(|i| (i as f64 + 0.5) / 2000.0).collect();
        let r = chi_square_uniform(&u, 20, 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.threshold - 36.1909).abs() < 1e-3);
    }
}
