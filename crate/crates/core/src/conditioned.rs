//! Samplers for the three conditioned laws: the walk on `{τ_x > n}`, the
//! `V`-transformed walk, and the bridge on `{τ_x > n, x + S(n) = y}`.
//!
//! Samplers hand each path to an observer closure and keep only what it
//! returns, so long horizons never require storing whole ensembles.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::harmonic::HarmonicTable;
use crate::increments::StepDistribution;
use crate::point::{norm, Point};
use crate::rng;
use crate::walk::lattice::{GuidedSampler, LatticeModel, Purpose};
use crate::walk::path::{PathSample, PathView};
use crate::walk::simulate::{check_start, run_walk};

/// Paths advanced together by the guided sampler.
const GUIDED_BATCH: usize = 256;

/// Default lowest acceptable acceptance rate for rejection samplers.
pub const ACCEPTANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ConditionedLaw {
    Meander { n: usize },
    HTransform { n: usize },
    Bridge { n: usize, y: Point },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    /// Raw walks kept when they satisfy the conditioning event.
    Rejection,
    /// Exact sampling from backward tables of the conditioning probability.
    Guided,
    /// Multilevel splitting; approximate.
    Splitting,
    /// Doob transform by a harmonic table.
    HTransform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionedEnsemble<T> {
    pub law: ConditionedLaw,
    pub method: SamplerMethod,
    /// Observed values, one per path, in replica order.
    pub values: Vec<T>,
    /// Raw trials; equals the path count for non-rejection methods.
    pub attempts: u64,
    pub start: Point,
    pub cone: ConeSpec,
    pub steps: String,
    pub seed: u64,
    /// Estimate of the probability of the conditioning event, if available.
    pub event_probability: Option<f64>,
    /// True when the sampler does not draw exactly from the target law.
    pub approximate: bool,
    pub effective_sample_size: Option<f64>,
}

impl<T> ConditionedEnsemble<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.values.len() as f64 / self.attempts.max(1) as f64
    }

    /// Ensemble metadata without the observed values.
    pub fn summary(&self) -> EnsembleSummary {
        EnsembleSummary {
            law: self.law.clone(),
            method: self.method,
            count: self.values.len(),
            attempts: self.attempts,
            acceptance_rate: self.acceptance_rate(),
            start: self.start.clone(),
            cone: self.cone,
            steps: self.steps.clone(),
            seed: self.seed,
            event_probability: self.event_probability,
            approximate: self.approximate,
            effective_sample_size: self.effective_sample_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub law: ConditionedLaw,
    pub method: SamplerMethod,
    pub count: usize,
    pub attempts: u64,
    pub acceptance_rate: f64,
    pub start: Point,
    pub cone: ConeSpec,
    pub steps: String,
    pub seed: u64,
    pub event_probability: Option<f64>,
    pub approximate: bool,
    pub effective_sample_size: Option<f64>,
}

/// Stores the whole path.
pub fn keep_path(p: PathView<'_>) -> PathSample {
    p.to_owned()
}

/// `x + S(n)`.
pub fn endpoint(p: PathView<'_>) -> Vec<f64> {
    p.end().to_vec()
}

fn view<'a>(x: &'a [f64], positions: &'a [f64], n: usize) -> PathView<'a> {
    PathView {
        start: x,
        positions,
        dim: x.len(),
        horizon: n,
        exit_index: None,
    }
}

fn path_in_cone(cone: &ConeSpec, p: &[f64], d: usize) -> bool {
    p.chunks_exact(d).all(|z| cone.contains_unchecked(z))
}

fn base_ensemble<T>(
    law: ConditionedLaw,
    method: SamplerMethod,
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    seed: u64,
    values: Vec<T>,
    attempts: u64,
) -> ConditionedEnsemble<T> {
    ConditionedEnsemble {
        law,
        method,
        values,
        attempts,
        start: x.clone(),
        cone: *cone,
        steps: dist.label().to_string(),
        seed,
        event_probability: None,
        approximate: false,
        effective_sample_size: None,
    }
}

/// Unbiased estimate `(r - 1)/(N - 1)` of the success probability under
/// inverse sampling with `r` successes in `N` trials.
fn inverse_sampling_estimate(successes: usize, attempts: u64) -> Option<f64> {
    if successes >= 2 && attempts >= 2 {
        Some((successes - 1) as f64 / (attempts - 1) as f64)
    } else if successes == 1 && attempts == 1 {
        Some(1.0)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanderOptions {
    pub method: SamplerMethod,
    pub floor: f64,
}

impl Default for MeanderOptions {
    fn default() -> Self {
        MeanderOptions {
            method: SamplerMethod::Rejection,
            floor: ACCEPTANCE_FLOOR,
        }
    }
}

/// Raw-trial cap per accepted path for a given floor.
fn attempt_cap(floor: f64) -> u64 {
    (50.0 / floor).ceil() as u64
}

/// Keeps drawing replica paths until `accept` holds; per-replica streams.
fn rejection_loop<T, A, F>(
    count: usize,
    seed: u64,
    cap: u64,
    draw: A,
    observe: F,
) -> Result<(Vec<T>, u64)>
where
    T: Send,
    A: Fn(&mut rng::StreamRng, &mut Vec<f64>) -> bool + Sync + Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    let draws = exec::map_indexed(count, |r| {
        let mut g = rng::stream(seed, r as u64);
        let mut buf = Vec::new();
        for a in 1..=cap {
            if draw(&mut g, &mut buf) {
                return Ok((observe(&buf), a));
            }
        }
        Err(cap)
    });
    let mut values = Vec::with_capacity(count);
    let mut attempts = 0u64;
    for (i, d) in draws.into_iter().enumerate() {
        match d {
            Ok((v, a)) => {
                values.push(v);
                attempts += a;
            }
            Err(a) => {
                return Err(Error::Underflow {
                    accepted: i,
                    attempts: attempts + a,
                    hint: "acceptance rate is below the floor; reduce n, use the guided \
                           sampler for lattice walks, or enable splitting"
                        .into(),
                })
            }
        }
    }
    Ok((values, attempts))
}

/// `count` paths of the walk conditioned on `{τ_x > n}`.
pub fn sample_meander_with<T, F>(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    count: usize,
    seed: u64,
    opts: &MeanderOptions,
    observe: F,
) -> Result<ConditionedEnsemble<T>>
where
    T: Send,
    F: Fn(PathView<'_>) -> T + Sync + Send,
{
    check_start(cone, dist, x)?;
    let d = x.dim();
    let law = ConditionedLaw::Meander { n };
    match opts.method {
        SamplerMethod::Rejection => {
            let (values, attempts) = rejection_loop(
                count,
                seed,
                attempt_cap(opts.floor),
                |g, buf| run_walk(cone, dist, x, n, g, buf, false).is_none(),
                |buf| observe(view(x, buf, n)),
            )?;
            let mut e = base_ensemble(
                law,
                SamplerMethod::Rejection,
                cone,
                dist,
                x,
                seed,
                values,
                attempts,
            );
            e.event_probability = inverse_sampling_estimate(count, attempts);
            Ok(e)
        }
        SamplerMethod::Guided => {
            let model = LatticeModel::new(cone, dist, x, Purpose::Survival)?;
            let sampler = GuidedSampler::meander(model, n)?;
            let values = guided_draws(&sampler, cone, d, count, seed, None, |buf| {
                observe(view(x, buf, n))
            })?;
            let mut e = base_ensemble(
                law,
                SamplerMethod::Guided,
                cone,
                dist,
                x,
                seed,
                values,
                count as u64,
            );
            e.event_probability = Some(sampler.probability());
            Ok(e)
        }
        other => Err(Error::invalid(format!(
            "{other:?} is not a meander method; use sample_meander_split for splitting"
        ))),
    }
}

pub fn sample_meander(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<ConditionedEnsemble<PathSample>> {
    sample_meander_with(
        cone,
        dist,
        x,
        n,
        count,
        seed,
        &MeanderOptions::default(),
        keep_path,
    )
}

fn guided_draws<T, F>(
    sampler: &GuidedSampler,
    cone: &ConeSpec,
    d: usize,
    count: usize,
    seed: u64,
    end: Option<&[f64]>,
    observe: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    let batches = exec::chunks(count, GUIDED_BATCH);
    let out = exec::map_indexed(batches.len(), |b| -> Result<Vec<T>> {
        let (start, len) = batches[b];
        let mut rngs: Vec<rng::StreamRng> = (start..start + len)
            .map(|r| rng::stream(seed, r as u64))
            .collect();
        let mut bufs = vec![Vec::new(); len];
        sampler.sample_batch(&mut rngs, &mut bufs);
        bufs.iter()
            .map(|buf| {
                let ends_right = match end {
                    Some(y) => buf.len() >= d && buf[buf.len() - d..] == *y,
                    None => true,
                };
                if !path_in_cone(cone, buf, d) || !ends_right {
                    return Err(Error::invalid(
                        "guided sampler produced a path outside the event",
                    ));
                }
                Ok(observe(buf))
            })
            .collect()
    });
    let mut values = Vec::with_capacity(count);
    for o in out {
        values.extend(o?);
    }
    Ok(values)
}

#[derive(Debug)]
struct Segment {
    data: Vec<f64>,
    parent: Option<Arc<Segment>>,
}

fn flatten(seg: &Arc<Segment>, out: &mut Vec<f64>) {
    let mut chain = Vec::new();
    let mut cur = Some(seg);
    while let Some(s) = cur {
        chain.push(s);
        cur = s.parent.as_ref();
    }
    out.clear();
    for s in chain.into_iter().rev() {
        out.extend_from_slice(&s.data);
    }
}

/// Multilevel splitting for `{τ_x > n}`.
///
/// At level `ℓ` every particle picks a uniformly random survivor of level
/// `ℓ-1` as ancestor and extends it to the horizon `levels[ℓ]`, retrying
/// with a fresh ancestor until the extension survives. With a single level
/// this is plain rejection. The finite ancestor pool makes the result
/// approximate.
pub fn sample_meander_split_with<T, F>(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    count: usize,
    levels: &[usize],
    seed: u64,
    max_attempts: u64,
    observe: F,
) -> Result<ConditionedEnsemble<T>>
where
    T: Send,
    F: Fn(PathView<'_>) -> T + Sync + Send,
{
    check_start(cone, dist, x)?;
    if levels.is_empty()
        || levels.windows(2).any(|w| w[1] <= w[0])
        || levels[0] == 0
        || *levels.last().unwrap() != n
    {
        return Err(Error::invalid(
            "levels must be strictly increasing, positive and end at n",
        ));
    }
    if count == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    let d = x.dim();
    // (segment chain, current position, root lineage)
    let mut pool: Vec<(Option<Arc<Segment>>, Vec<f64>, usize)> =
        (0..count).map(|i| (None, x.to_vec(), i)).collect();
    let mut attempts_total = 0u64;
    let mut probability = 1.0;
    let mut prev = 0usize;
    for (li, &level) in levels.iter().enumerate() {
        let len = level - prev;
        let lseed = rng::derive_seed(seed, li as u64);
        let pool_ref = &pool;
        let draws = exec::map_indexed(count, |i| {
            let mut g = rng::stream(lseed, i as u64);
            let mut buf = Vec::with_capacity(len * d);
            for a in 1..=max_attempts {
                let anc = if li == 0 {
                    i
                } else {
                    g.random_range(0..pool_ref.len())
                };
                let (seg, pos, root) = &pool_ref[anc];
                if run_walk(cone, dist, pos, len, &mut g, &mut buf, false).is_none() {
                    let end = buf[buf.len() - d..].to_vec();
                    let s = Arc::new(Segment {
                        data: std::mem::take(&mut buf),
                        parent: seg.clone(),
                    });
                    return Ok(((Some(s), end, *root), a));
                }
            }
            Err(max_attempts)
        });
        let mut next = Vec::with_capacity(count);
        let mut level_attempts = 0u64;
        for dr in draws {
            match dr {
                Ok((p, a)) => {
                    next.push(p);
                    level_attempts += a;
                }
                Err(_) => return Err(Error::Extinction { level }),
            }
        }
        probability *= count as f64 / level_attempts as f64;
        attempts_total += level_attempts;
        pool = next;
        prev = level;
    }
    let mut lineages = vec![0usize; count];
    for (_, _, root) in &pool {
        lineages[*root] += 1;
    }
    let sq: f64 = lineages.iter().map(|&c| (c * c) as f64).sum();
    let values = exec::map_indexed(count, |i| {
        let mut buf = Vec::with_capacity(n * d);
        flatten(pool[i].0.as_ref().unwrap(), &mut buf);
        observe(PathView {
            start: x,
            positions: &buf,
            dim: d,
            horizon: n,
            exit_index: None,
        })
    });
    let mut e = base_ensemble(
        ConditionedLaw::Meander { n },
        SamplerMethod::Splitting,
        cone,
        dist,
        x,
        seed,
        values,
        attempts_total,
    );
    e.event_probability = Some(probability);
    e.approximate = levels.len() > 1;
    e.effective_sample_size = Some((count * count) as f64 / sq);
    Ok(e)
}

/// Paths of the `V`-transformed walk: from `z` the walk moves to `z + w`
/// with probability `P(X = w) V(z + w) / V(z)`.
pub fn sample_htransform_with<T, F>(
    table: &HarmonicTable,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    count: usize,
    seed: u64,
    observe: F,
) -> Result<ConditionedEnsemble<T>>
where
    T: Send,
    F: Fn(PathView<'_>) -> T + Sync + Send,
{
    let cone = table.cone();
    check_start(cone, dist, x)?;
    let start = x
        .to_lattice()
        .ok_or_else(|| Error::invalid("start must be a lattice point"))?;
    let atoms = dist.lattice_atoms()?;
    if atoms.as_slice() != table.atoms() {
        return Err(Error::invalid(
            "harmonic table was built for a different step law",
        ));
    }
    table.kernel_row(&start)?;
    let d = x.dim();
    let kernel = HKernel::new(table);
    let values = exec::try_map_indexed(count, |r| {
        let mut g = rng::stream(seed, r as u64);
        let mut z = start.clone();
        let mut buf = Vec::with_capacity(n * d);
        for _ in 0..n {
            let a = kernel.step(&z, &mut g)?;
            for i in 0..d {
                z[i] += atoms[a].0[i];
                buf.push(z[i] as f64);
            }
        }
        Ok(observe(PathView {
            start: x,
            positions: &buf,
            dim: d,
            horizon: n,
            exit_index: None,
        }))
    })?;
    Ok(base_ensemble(
        ConditionedLaw::HTransform { n },
        SamplerMethod::HTransform,
        cone,
        dist,
        x,
        seed,
        values,
        count as u64,
    ))
}

/// Cumulative transition rows of the `V`-transformed walk, stored densely
/// over the table box; rows outside the interior are empty.
struct HKernel<'a> {
    table: &'a HarmonicTable,
    k: usize,
    cum: Vec<f64>,
}

impl<'a> HKernel<'a> {
    fn new(table: &'a HarmonicTable) -> Self {
        let k = table.atoms().len();
        let cells = table
            .interior_points()
            .map(|z| table.flat(&z).unwrap())
            .max()
            .map_or(0, |m| m + 1);
        let mut cum = vec![f64::NAN; cells * k];
        for z in table.interior_points() {
            let f = table.flat(&z).unwrap();
            if let Ok(row) = table.kernel_row(&z) {
                let mut acc = 0.0;
                for (j, w) in row.iter().enumerate() {
                    acc += w;
                    cum[f * k + j] = acc;
                }
            }
        }
        HKernel { table, k, cum }
    }

    fn step<R: Rng + ?Sized>(&self, z: &[i64], rng: &mut R) -> Result<usize> {
        let row = self
            .table
            .flat(z)
            .map(|f| f * self.k)
            .filter(|&i| i < self.cum.len() && !self.cum[i].is_nan())
            .map(|i| &self.cum[i..i + self.k])
            .ok_or_else(|| Error::WindowExhausted(z.to_vec()))?;
        let total = row[self.k - 1];
        if !(total > 0.0) {
            return Err(Error::invalid(format!("V vanishes at {z:?}")));
        }
        let u = rng.random::<f64>() * total;
        Ok(row.iter().position(|&c| u < c).unwrap_or(self.k - 1))
    }
}

pub fn sample_htransform(
    table: &HarmonicTable,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<ConditionedEnsemble<PathSample>> {
    sample_htransform_with(table, dist, x, n, count, seed, keep_path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeOptions {
    /// `Guided` (exact, default) or `Rejection`.
    pub method: SamplerMethod,
    pub floor: f64,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        BridgeOptions {
            method: SamplerMethod::Guided,
            floor: ACCEPTANCE_FLOOR,
        }
    }
}

/// `count` paths conditioned on `{τ_x > n, x + S(n) = y}`.
pub fn sample_bridge_with<T, F>(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    y: &Point,
    count: usize,
    seed: u64,
    opts: &BridgeOptions,
    observe: F,
) -> Result<ConditionedEnsemble<T>>
where
    T: Send,
    F: Fn(PathView<'_>) -> T + Sync + Send,
{
    check_start(cone, dist, x)?;
    if y.dim() != x.dim() {
        return Err(Error::invalid("end point has the wrong dimension"));
    }
    if !cone.contains_unchecked(y) {
        return Err(Error::Unreachable(format!("{y:?} is not inside the cone")));
    }
    let yl = y
        .to_lattice()
        .ok_or_else(|| Error::Unreachable(format!("{y:?} is not a lattice point")))?;
    let d = x.dim();
    let law = ConditionedLaw::Bridge { n, y: y.clone() };
    let model = LatticeModel::new(cone, dist, x, Purpose::Endpoint)?;
    match opts.method {
        SamplerMethod::Guided => {
            let sampler = GuidedSampler::bridge(model, &yl, n)?;
            let values = guided_draws(&sampler, cone, d, count, seed, Some(y), |buf| {
                observe(view(x, buf, n))
            })?;
            let mut e = base_ensemble(
                law,
                SamplerMethod::Guided,
                cone,
                dist,
                x,
                seed,
                values,
                count as u64,
            );
            e.event_probability = Some(sampler.probability());
            Ok(e)
        }
        SamplerMethod::Rejection => {
            match model.point_probability(&yl, n) {
                Ok(p) if p <= 0.0 => {
                    return Err(Error::Unreachable(format!(
                        "{y:?} is not in D_n(x) for n = {n}"
                    )))
                }
                Ok(_) | Err(Error::WindowOverflow { .. }) => {}
                Err(e) => return Err(e),
            }
            let (values, attempts) = rejection_loop(
                count,
                seed,
                attempt_cap(opts.floor),
                |g, buf| {
                    run_walk(cone, dist, x, n, g, buf, false).is_none()
                        && (n == 0 || buf[buf.len() - d..] == y[..])
                },
                |buf| observe(view(x, buf, n)),
            )?;
            let mut e = base_ensemble(
                law,
                SamplerMethod::Rejection,
                cone,
                dist,
                x,
                seed,
                values,
                attempts,
            );
            e.event_probability = inverse_sampling_estimate(count, attempts);
            Ok(e)
        }
        other => Err(Error::invalid(format!("{other:?} is not a bridge method"))),
    }
}

pub fn sample_bridge(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    y: &Point,
    count: usize,
    seed: u64,
) -> Result<ConditionedEnsemble<PathSample>> {
    sample_bridge_with(
        cone,
        dist,
        x,
        n,
        y,
        count,
        seed,
        &BridgeOptions::default(),
        keep_path,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPlusCheck {
    pub member: bool,
    pub inconclusive: bool,
    /// Always true: the check is an operational stand-in.
    pub heuristic: bool,
    pub steps_used: u64,
}

/// Probes whether surviving paths from `x` reach the deep interior:
/// a point `z` with `|z| ≥ 10` and distance at least `0.1·|z|` from the
/// boundary, within `probe_budget` simulated steps.
pub fn check_kplus(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    probe_budget: u64,
    seed: u64,
) -> Result<KPlusCheck> {
    const R0: f64 = 10.0;
    const GAMMA0: f64 = 0.1;
    check_start(cone, dist, x)?;
    let d = x.dim();
    let mut used = 0u64;
    let mut step = vec![0.0; d];
    let mut r = 0u64;
    let horizon = 400 + (R0 * R0) as u64 * 4;
    while used < probe_budget {
        let mut g = rng::stream(seed, r);
        r += 1;
        let mut z = x.to_vec();
        for _ in 0..horizon {
            if used >= probe_budget {
                break;
            }
            used += 1;
            dist.sample_into(&mut g, &mut step);
            for i in 0..d {
                z[i] += step[i];
            }
            if !cone.contains_unchecked(&z) {
                break;
            }
            let nz = norm(&z);
            if nz >= R0 && cone.dist_to_boundary(&z)? >= GAMMA0 * nz {
                return Ok(KPlusCheck {
                    member: true,
                    inconclusive: false,
                    heuristic: true,
                    steps_used: used,
                });
            }
        }
    }
    Ok(KPlusCheck {
        member: false,
        inconclusive: true,
        heuristic: true,
        steps_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeKind;
    use crate::harmonic::{build_v_exact, HarmonicOptions};
    use std::collections::BTreeMap;

    fn signs(p: &PathSample) -> Vec<i64> {
        let mut prev = p.start[0];
        (1..=p.len())
            .map(|k| {
                let s = p.position(k)[0] - prev;
                prev = p.position(k)[0];
                s as i64
            })
            .collect()
    }

    #[test]
    fn srw_meander_three_steps() {
        let one = Point::new(vec![1.0]);
        for method in [SamplerMethod::Rejection, SamplerMethod::Guided] {
            let e = sample_meander_with(
                &ConeSpec::half_line(),
                &StepDistribution::srw(),
                &one,
                3,
                30_000,
                5,
                &MeanderOptions {
                    method,
                    ..Default::default()
                },
                keep_path,
            )
            .unwrap();
            let mut counts: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
            for p in &e.values {
                assert!(p.survived());
                *counts.entry(signs(p)).or_default() += 1;
            }
            assert_eq!(counts.len(), 3);
            assert!(counts.contains_key(&vec![1, 1, 1]));
            assert!(counts.contains_key(&vec![1, 1, -1]));
            assert!(counts.contains_key(&vec![1, -1, 1]));
            for c in counts.values() {
                assert!((*c as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.015);
            }
            let p = e.event_probability.unwrap();
            assert!((p - 0.375).abs() < 0.01, "{method:?}: {p}");
        }
    }

    #[test]
    fn zero_horizon_accepts_everything() {
        let e = sample_meander(
            &ConeSpec::half_line(),
            &StepDistribution::srw(),
            &Point::new(vec![1.0]),
            0,
            10,
            1,
        )
        .unwrap();
        assert_eq!(e.attempts, 10);
    }

    #[test]
    fn guided_weyl_chamber_paths_stay_ordered() {
        let cone = ConeSpec::new(ConeKind::WeylA(3)).unwrap();
        let e = sample_meander_with(
            &cone,
            &StepDistribution::rademacher(3),
            &Point::new(vec![0.0, 1.0, 2.0]),
            50,
            200,
            3,
            &MeanderOptions {
                method: SamplerMethod::Guided,
                ..Default::default()
            },
            keep_path,
        )
        .unwrap();
        for p in &e.values {
            for k in 1..=50 {
                let z = p.position(k);
                assert!(z[0] < z[1] && z[1] < z[2]);
                let prev = p.position(k - 1);
                assert!((0..3).all(|i| (z[i] - prev[i]).abs() == 1.0));
            }
        }
    }

    #[test]
    fn srw_bridge_four_steps() {
        let one = Point::new(vec![1.0]);
        for method in [SamplerMethod::Guided, SamplerMethod::Rejection] {
            let e = sample_bridge_with(
                &ConeSpec::half_line(),
                &StepDistribution::srw(),
                &one,
                4,
                &one,
                4000,
                8,
                &BridgeOptions {
                    method,
                    ..Default::default()
                },
                keep_path,
            )
            .unwrap();
            let mut counts: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
            for p in &e.values {
                *counts.entry(signs(p)).or_default() += 1;
            }
            let keys: Vec<_> = counts.keys().cloned().collect();
            assert_eq!(keys, vec![vec![1, -1, 1, -1], vec![1, 1, -1, -1]]);
        }
        let err = sample_bridge(
            &ConeSpec::half_line(),
            &StepDistribution::srw(),
            &one,
            4,
            &Point::new(vec![2.0]),
            1,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unreachable(_)));
    }

    #[test]
    fn single_step_bridge() {
        let x = Point::new(vec![1.0, 1.0]);
        let y = Point::new(vec![2.0, 2.0]);
        let cone = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let e = sample_bridge(&cone, &StepDistribution::rademacher(2), &x, 1, &y, 5, 0).unwrap();
        assert!((e.event_probability.unwrap() - 0.25).abs() < 1e-15);
        for p in &e.values {
            assert_eq!(p.position(1), &[2.0, 2.0]);
        }
    }

    #[test]
    fn splitting_single_level_is_rejection() {
        let cone = ConeSpec::half_line();
        let srw = StepDistribution::srw();
        let x = Point::new(vec![1.0]);
        let e = sample_meander_split_with(&cone, &srw, &x, 20, 2000, &[20], 3, 1_000_000, endpoint)
            .unwrap();
        assert!(!e.approximate);
        assert!(e.values.iter().all(|v| v[0] > 0.0));
        let err =
            sample_meander_split_with(&cone, &srw, &x, 10_000, 10, &[10_000], 3, 10, endpoint)
                .unwrap_err();
        assert!(matches!(err, Error::Extinction { level: 10_000 }));
        assert!(
            sample_meander_split_with(&cone, &srw, &x, 20, 5, &[10, 5, 20], 3, 10, endpoint)
                .is_err()
        );
    }

    #[test]
    fn htransform_srw() {
        let srw = StepDistribution::srw();
        let t = build_v_exact(&ConeSpec::half_line(), &srw, &HarmonicOptions::new(40.0)).unwrap();
        let e = sample_htransform(&t, &srw, &Point::new(vec![1.0]), 30, 100, 2).unwrap();
        for p in &e.values {
            assert_eq!(p.position(1), &[2.0]);
            assert!((1..=30).all(|k| p.position(k)[0] > 0.0));
        }
        let far = sample_htransform(&t, &srw, &Point::new(vec![1.0]), 2000, 4, 2);
        assert!(matches!(far, Err(Error::WindowExhausted(_))));
    }

    #[test]
    fn kplus_probe() {
        let half = ConeSpec::half_line();
        let srw = StepDistribution::srw();
        let one = Point::new(vec![1.0]);
        assert!(check_kplus(&half, &srw, &one, 1_000_000, 1).unwrap().member);
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        assert!(
            check_kplus(
                &q,
                &StepDistribution::rademacher(2),
                &Point::new(vec![1.0, 1.0]),
                1_000_000,
                1
            )
            .unwrap()
            .member
        );
        let none = check_kplus(&half, &srw, &one, 0, 1).unwrap();
        assert!(!none.member && none.inconclusive);
    }
}
