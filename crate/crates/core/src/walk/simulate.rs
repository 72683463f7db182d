use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::increments::StepDistribution;
use crate::point::Point;
use crate::rng;
use crate::walk::path::PathSample;

const CHUNK: usize = 1024;

pub(crate) fn check_start(cone: &ConeSpec, dist: &StepDistribution, x: &[f64]) -> Result<()> {
    if dist.dim() != cone.dimension() {
        return Err(Error::invalid(format!(
            "step law dimension {} differs from cone dimension {}",
            dist.dim(),
            cone.dimension()
        )));
    }
    if !cone.contains(x)? {
        return Err(Error::invalid(format!(
            "start point {x:?} is not inside the open cone {cone}"
        )));
    }
    Ok(())
}

/// Runs the walk into `buf` (cleared first). Stops at the exit unless `full`.
/// Returns the exit index.
#[inline]
pub(crate) fn run_walk<R: Rng + ?Sized>(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &[f64],
    n: usize,
    rng: &mut R,
    buf: &mut Vec<f64>,
    full: bool,
) -> Option<usize> {
    let d = x.len();
    buf.clear();
    let mut cur = x.to_vec();
    let mut step = vec![0.0; d];
    let mut exit = None;
    for k in 1..=n {
        dist.sample_into(rng, &mut step);
        for (c, s) in cur.iter_mut().zip(&step) {
            *c += s;
        }
        buf.extend_from_slice(&cur);
        if exit.is_none() && !cone.contains_unchecked(&cur) {
            exit = Some(k);
            if !full {
                break;
            }
        }
    }
    exit
}

/// Survival indicator only; no allocation per step.
#[inline]
pub(crate) fn survives<R: Rng + ?Sized>(
    cone: &ConeSpec,
    dist: &StepDistribution,
    cur: &mut [f64],
    step: &mut [f64],
    n: usize,
    rng: &mut R,
) -> bool {
    for _ in 0..n {
        dist.sample_into(rng, step);
        for (c, s) in cur.iter_mut().zip(step.iter()) {
            *c += s;
        }
        if !cone.contains_unchecked(cur) {
            return false;
        }
    }
    true
}

/// One trajectory of length `n` started at `x ∈ K`. With `full = false`
/// generation stops at the exit.
pub fn simulate_path<R: Rng + ?Sized>(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    rng: &mut R,
    full: bool,
) -> Result<PathSample> {
    check_start(cone, dist, x)?;
    let mut buf = Vec::with_capacity(n * x.dim());
    let exit = run_walk(cone, dist, x, n, rng, &mut buf, full);
    Ok(PathSample::new(x.clone(), buf, n, exit))
}

/// Replica `r` of an ensemble seeded with `seed`.
pub fn simulate_replica(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    seed: u64,
    r: u64,
    full: bool,
) -> Result<PathSample> {
    simulate_path(cone, dist, x, n, &mut rng::stream(seed, r), full)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurvivalMethod {
    MonteCarlo,
    ExactDp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub n: usize,
    pub x: Point,
    pub probability: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub method: SurvivalMethod,
}

/// Monte Carlo estimate of `P(τ_x > n)` with a binomial standard error.
/// Replica `r` uses stream `(seed, r)`; the estimate does not depend on the
/// number of worker threads.
pub fn survival_probability_mc(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<SurvivalEstimate> {
    check_start(cone, dist, x)?;
    if replicas == 0 {
        return Err(Error::invalid("need at least one replica"));
    }
    let counts = exec::map_indexed(exec::chunks(replicas as usize, CHUNK).len(), |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(replicas as usize);
        let mut cur = vec![0.0; x.dim()];
        let mut step = vec![0.0; x.dim()];
        let mut alive = 0u64;
        for r in start..end {
            let mut rng = rng::stream(seed, r as u64);
            cur.copy_from_slice(x);
            if survives(cone, dist, &mut cur, &mut step, n, &mut rng) {
                alive += 1;
            }
        }
        alive
    });
    let alive: u64 = counts.iter().sum();
    let p = alive as f64 / replicas as f64;
    Ok(SurvivalEstimate {
        n,
        x: x.clone(),
        probability: p,
        std_error: (p * (1.0 - p) / replicas as f64).sqrt(),
        replicas,
        method: SurvivalMethod::MonteCarlo,
    })
}
