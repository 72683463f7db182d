//! Grid Brownian motion killed on leaving the cone.
//!
//! The meander is approximated by Brownian paths on `m` grid steps over
//! `[0, 1]`, started at `ε·x₀` and kept only if every grid point lies in
//! `K`. With `bridge_correction` each grid interval is also killed with the
//! probability that the Brownian bridge between its endpoints leaves the
//! cone, which removes most of the `O(√h)` grid bias. The `u`-transformed
//! motion is the same rejection scheme from a given start, with importance
//! weights `u(x + B(T)) / u(x)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub m: usize,
    pub eps: f64,
    /// Raw attempts allowed per accepted path before giving up.
    pub max_attempts: u64,
    #[serde(default)]
    pub bridge_correction: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            m: 4096,
            eps: 0.01,
            max_attempts: 1_000_000,
            bridge_correction: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffusionEnsemble<T> {
    /// Observed values, in replica order.
    pub values: Vec<T>,
    /// Importance weights; all ones for the meander.
    pub weights: Vec<f64>,
    pub attempts: u64,
    pub cone: ConeSpec,
    pub start: Vec<f64>,
    pub horizon: f64,
    pub grid: GridOptions,
}

impl<T> DiffusionEnsemble<T> {
    pub fn acceptance_rate(&self) -> f64 {
        self.values.len() as f64 / self.attempts.max(1) as f64
    }
}

/// Fills `buf` with `start, B(h), …, B(mh)` and reports survival; stops at
/// the first grid point outside the cone.
#[inline]
fn grid_path<R: Rng + ?Sized>(
    cone: &ConeSpec,
    start: &[f64],
    m: usize,
    h: f64,
    bridge: bool,
    rng: &mut R,
    buf: &mut Vec<f64>,
) -> bool {
    let d = start.len();
    let sd = h.sqrt();
    buf.clear();
    buf.extend_from_slice(start);
    for k in 0..m {
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let v = buf[k * d + i] + sd * z;
            buf.push(v);
        }
        let (prev, next) = buf[k * d..].split_at(d);
        if !cone.contains_unchecked(next) {
            return false;
        }
        if bridge && rng.random::<f64>() >= cone.bridge_survival(prev, next, h) {
            return false;
        }
    }
    true
}

fn run<T, F>(
    cone: &ConeSpec,
    start: &[f64],
    horizon: f64,
    opts: &GridOptions,
    count: usize,
    seed: u64,
    weighted: bool,
    observe: F,
) -> Result<DiffusionEnsemble<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    if opts.m == 0 {
        return Err(Error::invalid("grid needs at least one step"));
    }
    if !cone.contains(start)? {
        return Err(Error::invalid(format!(
            "start {start:?} is not inside {cone}"
        )));
    }
    let h = horizon / opts.m as f64;
    let d = start.len();
    let u0 = cone.u_unchecked(start);
    let draws = exec::map_indexed(count, |r| {
        let mut rng = rng::stream(seed, r as u64);
        let mut buf = Vec::with_capacity((opts.m + 1) * d);
        for attempt in 1..=opts.max_attempts {
            if grid_path(
                cone,
                start,
                opts.m,
                h,
                opts.bridge_correction,
                &mut rng,
                &mut buf,
            ) {
                let w = if weighted {
                    cone.u_unchecked(&buf[opts.m * d..]) / u0
                } else {
                    1.0
                };
                return Ok((observe(&buf), w, attempt));
            }
        }
        Err(opts.max_attempts)
    });
    let mut values = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut attempts = 0u64;
    for (i, d) in draws.into_iter().enumerate() {
        match d {
            Ok((v, w, a)) => {
                values.push(v);
                weights.push(w);
                attempts += a;
            }
            Err(a) => return Err(Error::Underflow {
                accepted: i,
                attempts: attempts + a,
                hint: format!(
                    "no grid path survived in {a} attempts; increase ε or reduce the grid size m"
                ),
            }),
        }
    }
    Ok(DiffusionEnsemble {
        values,
        weights,
        attempts,
        cone: *cone,
        start: start.to_vec(),
        horizon,
        grid: *opts,
    })
}

/// Grid meander on `[0, 1]` started at `ε·x₀`; `observe` sees the flattened
/// grid values `B(0), B(1/m), …, B(1)`.
pub fn sample_bm_meander_with<T, F>(
    cone: &ConeSpec,
    opts: &GridOptions,
    count: usize,
    seed: u64,
    observe: F,
) -> Result<DiffusionEnsemble<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    if !(opts.eps > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    let start: Vec<f64> = cone
        .interior_direction()
        .iter()
        .map(|c| c * opts.eps)
        .collect();
    run(cone, &start, 1.0, opts, count, seed, false, observe)
}

/// Grid meander paths, stored in full.
pub fn sample_bm_meander(
    cone: &ConeSpec,
    opts: &GridOptions,
    count: usize,
    seed: u64,
) -> Result<DiffusionEnsemble<Vec<f64>>> {
    sample_bm_meander_with(cone, opts, count, seed, |p| p.to_vec())
}

/// Surviving grid paths from `x` over `[0, horizon]` with weights
/// `u(x + B(horizon)) / u(x)`.
pub fn sample_h_bm_with<T, F>(
    cone: &ConeSpec,
    x: &[f64],
    horizon: f64,
    opts: &GridOptions,
    count: usize,
    seed: u64,
    observe: F,
) -> Result<DiffusionEnsemble<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    run(cone, x, horizon, opts, count, seed, true, observe)
}

pub fn sample_h_bm(
    cone: &ConeSpec,
    x: &[f64],
    horizon: f64,
    opts: &GridOptions,
    count: usize,
    seed: u64,
) -> Result<DiffusionEnsemble<Vec<f64>>> {
    sample_h_bm_with(cone, x, horizon, opts, count, seed, |p| p.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridOptions {
        GridOptions {
            m: 64,
            eps: 0.1,
            max_attempts: 100_000,
            bridge_correction: false,
        }
    }

    #[test]
    fn meander_paths_stay_inside() {
        let cone = ConeSpec::half_line();
        let e = sample_bm_meander(&cone, &small(), 200, 4).unwrap();
        for p in &e.values {
            assert_eq!(p.len(), 65);
            assert!(p.iter().all(|&v| v > 0.0));
        }
        assert!(e.acceptance_rate() > 0.0 && e.acceptance_rate() < 1.0);
        let again = sample_bm_meander(&cone, &small(), 200, 4).unwrap();
        assert_eq!(e.values, again.values);
    }

    #[test]
    fn finer_grids_accept_less() {
        let cone = ConeSpec::half_line();
        let coarse =
            sample_bm_meander_with(&cone, &GridOptions { m: 16, ..small() }, 4000, 1, |_| ())
                .unwrap();
        let fine =
            sample_bm_meander_with(&cone, &GridOptions { m: 1024, ..small() }, 4000, 1, |_| ())
                .unwrap();
        assert!(fine.acceptance_rate() < coarse.acceptance_rate());
    }

    #[test]
    fn h_bm_weights() {
        let cone = ConeSpec::half_line();
        let e = sample_h_bm_with(&cone, &[0.5], 1.0, &small(), 500, 2, |p| p[p.len() - 1]).unwrap();
        assert!(e.weights.iter().all(|&w| w >= 0.0));
        assert!(e.weights.iter().any(|&w| w > 0.0));
        for (v, w) in e.values.iter().zip(&e.weights) {
            assert!((w - v / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn underflow_is_reported() {
        let cone = ConeSpec::half_line();
        let opts = GridOptions {
            m: 4096,
            eps: 1e-6,
            max_attempts: 3,
            bridge_correction: false,
        };
        assert!(matches!(
            sample_bm_meander_with(&cone, &opts, 5, 0, |_| ()),
            Err(Error::Underflow { .. })
        ));
    }

    #[test]
    fn corrected_grid_matches_exact_meander_marginal() {
        // Meander at t = 1/2 has density ∝ y e^{-y²} (2Φ(y√2) - 1).
        let erf_cdf = |z: f64| 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
        let f = |y: f64| y * (-y * y).exp() * (2.0 * erf_cdf(y * std::f64::consts::SQRT_2) - 1.0);
        let h = 1e-3;
        let mut cum = vec![0.0];
        for i in 0..8000 {
            let y = i as f64 * h;
            let last = *cum.last().unwrap();
            cum.push(last + 0.5 * (f(y) + f(y + h)) * h);
        }
        let total = *cum.last().unwrap();
        let cdf = |r: f64| cum[((r / h) as usize).min(cum.len() - 1)] / total;
        let cone = ConeSpec::half_line();
        let opts = GridOptions {
            m: 256,
            eps: 0.02,
            max_attempts: 1_000_000,
            bridge_correction: true,
        };
        let e = sample_bm_meander_with(&cone, &opts, 4000, 9, |p| p[128]).unwrap();
        let ks = crate::stats::ks_one_sample(&e.values, cdf, 0.01).unwrap();
        assert!(ks.statistic <= ks.threshold, "{ks:?}");
    }
}
