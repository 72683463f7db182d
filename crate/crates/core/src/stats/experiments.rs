//! The convergence experiments. Each one samples a conditioned walk,
//! compares scalar functionals with their limits and returns a report
//! together with the raw functional samples.
//!
//! Lattice positions are spread uniformly over their cell before a
//! comparison with a continuous law, otherwise the atoms alone would decide
//! a Kolmogorov–Smirnov test at large sample sizes.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conditioned::{
    sample_bridge_with, sample_htransform_with, sample_meander_split_with, sample_meander_with,
    BridgeOptions, MeanderOptions, SamplerMethod,
};
use crate::cone::{ConeKind, ConeSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::harmonic::HarmonicTable;
use crate::increments::StepDistribution;
use crate::point::{norm, Point};
use crate::reference::{
    bridge_weight, chi_cdf, entrance_law_cdf, radial_transition_cdf, sample_bessel,
    sample_bm_meander_with, GridOptions,
};
use crate::rng;
use crate::stats::{
    bootstrap_difference, chi_square_uniform, exponent_fit, jitter, ks_one_sample, ks_two_sample,
    tv_distance, Check, ExponentFit, TestReport, BOOTSTRAP_RESAMPLES,
};
use crate::walk::lattice::{LatticeModel, Purpose};
use crate::walk::{survival_curve_exact, survival_probability_mc, PathView};

const TAG_JITTER: u64 = 1;
const TAG_REFERENCE: u64 = 2;
const TAG_CONTROL: u64 = 3;
const TAG_BOOTSTRAP: u64 = 4;
const TAG_SECOND: u64 = 5;

/// Largest sample used by the unconditioned negative controls.
const CONTROL_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// A limit-law distribution function tabulated for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// Name of the column the curve describes.
    pub column: String,
    pub label: String,
    pub x: Vec<f64>,
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub report: TestReport,
    pub columns: Vec<Column>,
    #[serde(default)]
    pub curves: Vec<Curve>,
}

impl ExperimentOutput {
    fn new(report: TestReport) -> Self {
        ExperimentOutput {
            report,
            columns: Vec::new(),
            curves: Vec::new(),
        }
    }

    fn chi_curve(mut self, column: &str, k: f64, t: f64) -> Self {
        let x: Vec<f64> = (0..=200)
            .map(|i| i as f64 * 0.03 * (k * t).sqrt())
            .collect();
        let cdf = x
            .iter()
            .map(|&r| chi_cdf(k, t, r).unwrap_or(f64::NAN))
            .collect();
        self.curves.push(Curve {
            column: column.to_string(),
            label: format!("chi({k})"),
            x,
            cdf,
        });
        self
    }

    fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push(Column {
            name: name.to_string(),
            values,
        });
        self
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Coordinatewise gcd of differences between atoms: the spacing of the
/// lattice that holds the walk at a fixed time. `None` for non-lattice laws.
pub fn endpoint_spacing(dist: &StepDistribution) -> Option<Vec<i64>> {
    let atoms = dist.lattice_atoms().ok()?;
    let d = dist.dim();
    Some(
        (0..d)
            .map(|i| {
                atoms
                    .iter()
                    .map(|(a, _)| a[i] - atoms[0].0[i])
                    .fold(0, gcd)
                    .max(1)
            })
            .collect(),
    )
}

/// Coordinatewise gcd of the atoms themselves: the spacing of the values a
/// running maximum can take.
fn step_spacing(dist: &StepDistribution) -> Option<Vec<i64>> {
    let atoms = dist.lattice_atoms().ok()?;
    Some(
        (0..dist.dim())
            .map(|i| atoms.iter().map(|(a, _)| a[i]).fold(0, gcd).max(1))
            .collect(),
    )
}

/// Radii of jittered points, scaled by `1/√n`. Point `i` draws its noise
/// from stream `(seed, i)`.
fn jittered_radii(points: &[Vec<f64>], spacing: Option<&[i64]>, n: usize, seed: u64) -> Vec<f64> {
    let s = (n.max(1) as f64).sqrt();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut z = p.clone();
            if let Some(sp) = spacing {
                jitter(&mut z, sp, &mut rng::stream(seed, i as u64));
            }
            norm(&z) / s
        })
        .collect()
}

/// Scalar lattice values spread over `[v - s/2, v + s/2]`, scaled by `1/√n`.
fn jittered_scalars(values: &[f64], spacing: Option<i64>, n: usize, seed: u64) -> Vec<f64> {
    let s = (n.max(1) as f64).sqrt();
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let noise = match spacing {
                Some(sp) => (rng::stream(seed, i as u64).random::<f64>() - 0.5) * sp as f64,
                None => 0.0,
            };
            (v + noise) / s
        })
        .collect()
}

/// Endpoint radii of `count` unconditioned walks, scaled by `1/√n`.
fn unconditioned_radii(
    dist: &StepDistribution,
    x: &[f64],
    n: usize,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    exec::map_indexed(count, |r| {
        let mut g = rng::stream(seed, r as u64);
        let mut z = x.to_vec();
        let mut step = vec![0.0; x.len()];
        for _ in 0..n {
            dist.sample_into(&mut g, &mut step);
            for (c, s) in z.iter_mut().zip(&step) {
                *c += s;
            }
        }
        z
    })
}

fn index_at(n: usize, t: f64) -> usize {
    ((t * n as f64).round() as usize).min(n)
}

fn base_report(
    name: &str,
    checks: Vec<Check>,
    seed: u64,
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &[f64],
    n: usize,
) -> TestReport {
    TestReport::new(name, checks, vec![seed])
        .with("cone", cone.to_string())
        .with("steps", dist.label())
        .with("start", x)
        .with("n", n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanderTestOptions {
    /// `Guided` (lattice laws only), `Rejection` or `Splitting`.
    pub method: SamplerMethod,
    pub alpha: f64,
    /// Size of the grid-meander reference ensemble; 0 skips the path
    /// functional comparisons.
    pub reference_count: usize,
    pub grid: GridOptions,
    pub negative_control: bool,
}

impl Default for MeanderTestOptions {
    fn default() -> Self {
        MeanderTestOptions {
            method: SamplerMethod::Guided,
            alpha: 0.01,
            reference_count: 0,
            grid: GridOptions::default(),
            negative_control: true,
        }
    }
}

/// Splitting levels `n/2^j`, coarsest first, never below 8 steps.
fn split_levels(n: usize) -> Vec<usize> {
    let mut v = vec![n];
    while *v.last().unwrap() / 2 >= 8 {
        let next = v.last().unwrap() / 2;
        v.push(next);
    }
    v.reverse();
    v
}

/// Walk conditioned on `{τ_x > n}` against the meander: endpoint radius
/// versus `χ(p+d)`, and optionally the max norm and the radius at time 1/2
/// against a grid meander ensemble.
pub fn meander_convergence_test(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    count: usize,
    seed: u64,
    opts: &MeanderTestOptions,
) -> Result<ExperimentOutput> {
    if n == 0 || count < 2 {
        return Err(Error::invalid("need n ≥ 1 and at least 2 samples"));
    }
    let d = x.dim();
    let mid = index_at(n, 0.5);
    let observe = move |v: PathView<'_>| {
        let mut o = v.end().to_vec();
        o.extend_from_slice(v.position(mid));
        o.push(v.max_position_norm(0, v.len()));
        o
    };
    let method = match opts.method {
        SamplerMethod::Guided if !dist.is_lattice() => SamplerMethod::Rejection,
        m => m,
    };
    let ens = match method {
        SamplerMethod::Splitting => {
            let levels = split_levels(n);
            sample_meander_split_with(
                cone,
                dist,
                x,
                n,
                count,
                &levels,
                seed,
                u64::MAX / 4,
                observe,
            )?
        }
        m => {
            let mo = MeanderOptions {
                method: m,
                ..MeanderOptions::default()
            };
            sample_meander_with(cone, dist, x, n, count, seed, &mo, observe)?
        }
    };
    let spacing = endpoint_spacing(dist);
    let sp = spacing.as_deref();
    let jseed = rng::derive_seed(seed, TAG_JITTER);
    let ends: Vec<Vec<f64>> = ens.values.iter().map(|o| o[..d].to_vec()).collect();
    let mids: Vec<Vec<f64>> = ens.values.iter().map(|o| o[d..2 * d].to_vec()).collect();
    let end_r = jittered_radii(&ends, sp, n, jseed);
    let k = cone.exponent() + d as f64;
    let ks = ks_one_sample(
        &end_r,
        |r| chi_cdf(k, 1.0, r).unwrap_or(f64::NAN),
        opts.alpha,
    )?;
    let mut checks = vec![Check::from_ks("endpoint-radius", &ks, vec![count])];
    let mut out_cols = vec![("endpoint_radius", end_r.clone())];

    if opts.reference_count > 0 {
        let m = opts.grid.m;
        let reference = sample_bm_meander_with(
            cone,
            &opts.grid,
            opts.reference_count,
            rng::derive_seed(seed, TAG_REFERENCE),
            |p| {
                let maxn = p.chunks(d).map(norm).fold(0.0, f64::max);
                (maxn, norm(&p[(m / 2) * d..(m / 2 + 1) * d]))
            },
        )?;
        let ref_max: Vec<f64> = reference.values.iter().map(|v| v.0).collect();
        let ref_mid: Vec<f64> = reference.values.iter().map(|v| v.1).collect();
        let raw_max: Vec<f64> = ens.values.iter().map(|o| o[2 * d]).collect();
        let walk_max = if d == 1 {
            jittered_scalars(
                &raw_max,
                step_spacing(dist).map(|s| s[0]),
                n,
                rng::derive_seed(jseed, 1),
            )
        } else {
            jittered_scalars(&raw_max, None, n, 0)
        };
        let walk_mid = jittered_radii(&mids, sp, n, rng::derive_seed(jseed, 2));
        let a = ks_two_sample(&walk_max, &ref_max, opts.alpha)?;
        let b = ks_two_sample(&walk_mid, &ref_mid, opts.alpha)?;
        checks.push(Check::from_ks("max-norm", &a, vec![count, ref_max.len()]));
        checks.push(Check::from_ks("mid-radius", &b, vec![count, ref_mid.len()]));
        out_cols.push(("max_norm", walk_max));
        out_cols.push(("mid_radius", walk_mid));
        out_cols.push(("reference_max_norm", ref_max));
        out_cols.push(("reference_mid_radius", ref_mid));
    }

    if opts.negative_control {
        let c = count.min(CONTROL_LIMIT);
        let free = unconditioned_radii(dist, x, n, c, rng::derive_seed(seed, TAG_CONTROL));
        let r = jittered_radii(&free, sp, n, rng::derive_seed(jseed, 3));
        let ks = ks_one_sample(&r, |v| chi_cdf(k, 1.0, v).unwrap_or(f64::NAN), opts.alpha)?;
        checks.push(Check::reject(
            "control-unconditioned-endpoint",
            ks.statistic,
            ks.threshold,
            vec![c],
        ));
    }

    let report = base_report("meander-convergence", checks, seed, cone, dist, x, n)
        .with("count", count)
        .with("method", method)
        .with("alpha", opts.alpha)
        .with("limit", format!("chi({k})"))
        .with("acceptance_rate", ens.acceptance_rate())
        .with("event_probability", ens.event_probability)
        .with("grid", opts.grid)
        .with("reference_count", opts.reference_count);
    let mut out = ExperimentOutput::new(report).chi_curve("endpoint_radius", k, 1.0);
    for (name, v) in out_cols {
        out = out.column(name, v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HTransformTestOptions {
    pub alpha: f64,
    /// Times at which radii are compared with the Bessel process from 0.
    pub times: Vec<f64>,
    /// Bins of the chi-square test on the radial transition from 1/2 to 1.
    pub kernel_bins: usize,
    pub negative_control: bool,
}

impl Default for HTransformTestOptions {
    fn default() -> Self {
        HTransformTestOptions {
            alpha: 0.01,
            times: vec![0.25, 0.5, 1.0],
            kernel_bins: 20,
            negative_control: true,
        }
    }
}

/// The `V`-transformed walk against the `u`-transformed motion from the
/// vertex: endpoint radius versus `χ(2p+d)`, radii at fixed times versus
/// exact Bessel samples, and the radial transition from time 1/2 to 1
/// through its probability integral transform.
pub fn htransform_convergence_test(
    table: &HarmonicTable,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    count: usize,
    seed: u64,
    opts: &HTransformTestOptions,
) -> Result<ExperimentOutput> {
    if n < 2 || count < 2 {
        return Err(Error::invalid("need n ≥ 2 and at least 2 samples"));
    }
    if opts.times.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::invalid("comparison times must lie in (0, 1]"));
    }
    let cone = *table.cone();
    let mut times = opts.times.clone();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    // Always record 1/2 and 1 for the transition check.
    let mut record = times.clone();
    for t in [0.5, 1.0] {
        if !record.contains(&t) {
            record.push(t);
        }
    }
    let idx: Vec<usize> = record.iter().map(|&t| index_at(n, t)).collect();
    let ens = sample_htransform_with(table, dist, x, n, count, seed, |v| {
        idx.iter()
            .map(|&k| v.position(k).to_vec())
            .collect::<Vec<_>>()
    })?;
    let spacing = endpoint_spacing(dist);
    let sp = spacing.as_deref();
    let jseed = rng::derive_seed(seed, TAG_JITTER);
    let radii: Vec<Vec<f64>> = (0..record.len())
        .map(|j| {
            let pts: Vec<Vec<f64>> = ens.values.iter().map(|o| o[j].clone()).collect();
            jittered_radii(&pts, sp, n, rng::derive_seed(jseed, j as u64))
        })
        .collect();
    let at = |t: f64| record.iter().position(|&s| s == t).unwrap();
    let law = cone.radial_law();
    let mut checks = Vec::new();

    let end = &radii[at(1.0)];
    let ks = ks_one_sample(
        end,
        |r| entrance_law_cdf(&cone, 1.0, r).unwrap_or(f64::NAN),
        opts.alpha,
    )?;
    checks.push(Check::from_ks("endpoint-radius", &ks, vec![count]));

    let bessel = sample_bessel(
        &law,
        0.0,
        &times,
        count,
        rng::derive_seed(seed, TAG_REFERENCE),
    )?;
    for (j, &t) in times.iter().enumerate() {
        let b: Vec<f64> = bessel.iter().map(|p| p[j]).collect();
        let ks = ks_two_sample(&radii[at(t)], &b, opts.alpha)?;
        checks.push(Check::from_ks(
            format!("bessel-marginal-t{t}"),
            &ks,
            vec![count, count],
        ));
    }

    let r_half = &radii[at(0.5)];
    let h = 1.0 - index_at(n, 0.5) as f64 / n as f64;
    let pit: Vec<f64> = r_half
        .iter()
        .zip(end)
        .map(|(&r1, &r2)| radial_transition_cdf(&law, h, r1, r2))
        .collect::<Result<_>>()?;
    let chi = chi_square_uniform(&pit, opts.kernel_bins, opts.alpha)?;
    checks.push(Check::accept(
        "radial-transition",
        chi.statistic,
        chi.threshold,
        vec![count],
    ));

    if opts.negative_control {
        let c = count.min(CONTROL_LIMIT);
        let free = unconditioned_radii(dist, x, n, c, rng::derive_seed(seed, TAG_CONTROL));
        let r = jittered_radii(&free, sp, n, rng::derive_seed(jseed, 99));
        let ks = ks_one_sample(
            &r,
            |v| entrance_law_cdf(&cone, 1.0, v).unwrap_or(f64::NAN),
            opts.alpha,
        )?;
        checks.push(Check::reject(
            "control-unconditioned-endpoint",
            ks.statistic,
            ks.threshold,
            vec![c],
        ));
    }

    let report = base_report("htransform-convergence", checks, seed, &cone, dist, x, n)
        .with("count", count)
        .with("alpha", opts.alpha)
        .with("limit", format!("chi({})", law.degrees))
        .with("times", &times)
        .with("window_radius", table.window_radius())
        .with("table_residual", table.residual());
    Ok(ExperimentOutput::new(report)
        .column("endpoint_radius", end.clone())
        .column("half_time_radius", r_half.clone())
        .column("transition_pit", pit)
        .chi_curve("endpoint_radius", law.degrees, 1.0)
        .chi_curve("half_time_radius", law.degrees, 0.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeTestOptions {
    pub alpha: f64,
    /// Grid meander samples behind the weighted estimates.
    pub reference_count: usize,
    pub grid: GridOptions,
    pub method: SamplerMethod,
    /// Compare the maxima over the two halves when `x = y` and the step law
    /// is symmetric.
    pub reversal: bool,
}

impl Default for BridgeTestOptions {
    fn default() -> Self {
        BridgeTestOptions {
            alpha: 0.01,
            reference_count: 20_000,
            grid: GridOptions::default(),
            method: SamplerMethod::Guided,
            reversal: true,
        }
    }
}

fn is_symmetric(dist: &StepDistribution) -> bool {
    match dist.lattice_atoms() {
        Ok(atoms) => {
            let a: BTreeMap<Vec<i64>, u64> = atoms
                .iter()
                .map(|(z, p)| (z.clone(), p.to_bits()))
                .collect();
            atoms.iter().all(|(z, p)| {
                let neg: Vec<i64> = z.iter().map(|c| -c).collect();
                a.get(&neg) == Some(&p.to_bits())
            })
        }
        Err(_) => false,
    }
}

/// Prefix functionals of the bridge against the meander reweighted by the
/// bridge weight: the radius at time `t` and the max norm over `[0, t]`,
/// each compared through a bootstrap band.
#[allow(clippy::too_many_arguments)]
pub fn bridge_convergence_test(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    y: &Point,
    n: usize,
    t: f64,
    count: usize,
    seed: u64,
    opts: &BridgeTestOptions,
) -> Result<ExperimentOutput> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("t must lie in (0, 1), got {t}")));
    }
    if count < 4 {
        return Err(Error::invalid("need at least 4 bridge samples"));
    }
    let d = x.dim();
    let kt = index_at(n, t);
    let half = index_at(n, 0.5);
    let bo = BridgeOptions {
        method: opts.method,
        ..BridgeOptions::default()
    };
    let ens = sample_bridge_with(cone, dist, x, n, y, count, seed, &bo, |v| {
        let mut o = v.position(kt).to_vec();
        o.push(v.max_position_norm(0, kt));
        o.push(v.max_position_norm(0, half));
        o.push(v.max_position_norm(half, n));
        o
    })?;
    let jseed = rng::derive_seed(seed, TAG_JITTER);
    let spacing = endpoint_spacing(dist);
    let pts: Vec<Vec<f64>> = ens.values.iter().map(|o| o[..d].to_vec()).collect();
    let value_t = jittered_radii(&pts, spacing.as_deref(), n, jseed);
    let max_sp = if d == 1 {
        step_spacing(dist).map(|s| s[0])
    } else {
        None
    };
    let col = |j: usize, tag: u64| {
        let raw: Vec<f64> = ens.values.iter().map(|o| o[d + j]).collect();
        jittered_scalars(&raw, max_sp, n, rng::derive_seed(jseed, tag))
    };
    let max_t = col(0, 1);

    // Meander side: √t·M on [0, t], weighted by h(t, √t·M(1)).
    let st = t.sqrt();
    let reference = sample_bm_meander_with(
        cone,
        &opts.grid,
        opts.reference_count,
        rng::derive_seed(seed, TAG_REFERENCE),
        |p| {
            let end: Vec<f64> = p[p.len() - d..].iter().map(|c| c * st).collect();
            let w = bridge_weight(cone, t, &end).unwrap_or(0.0);
            let maxn = p.chunks(d).map(norm).fold(0.0, f64::max) * st;
            (norm(&end), maxn, w)
        },
    )?;
    let ref_val: Vec<f64> = reference.values.iter().map(|v| v.0).collect();
    let ref_max: Vec<f64> = reference.values.iter().map(|v| v.1).collect();
    let ref_w: Vec<f64> = reference.values.iter().map(|v| v.2).collect();
    if !(ref_w.iter().sum::<f64>() > 0.0) {
        return Err(Error::Underflow {
            accepted: ref_w.len(),
            attempts: reference.attempts,
            hint: "all bridge weights vanish".into(),
        });
    }

    let mut checks = Vec::new();
    let bseed = rng::derive_seed(seed, TAG_BOOTSTRAP);
    for (j, (name, a, b)) in [
        ("value-at-t", &value_t, &ref_val),
        ("max-to-t", &max_t, &ref_max),
    ]
    .into_iter()
    .enumerate()
    {
        let band = bootstrap_difference(
            a,
            None,
            b,
            Some(&ref_w),
            BOOTSTRAP_RESAMPLES,
            opts.alpha,
            rng::derive_seed(bseed, j as u64),
        )?;
        checks.push(Check::accept(
            name,
            band.difference.abs(),
            band.threshold,
            vec![a.len(), b.len()],
        ));
    }

    let mut out_cols = vec![
        ("value_at_t", value_t),
        ("max_to_t", max_t),
        ("reference_value_at_t", ref_val),
        ("reference_max_to_t", ref_max),
        ("reference_weight", ref_w),
    ];
    if opts.reversal && x == y && is_symmetric(dist) {
        let first = col(1, 2);
        let second = col(2, 3);
        let h = count / 2;
        let ks = ks_two_sample(&first[..h], &second[h..], opts.alpha)?;
        checks.push(Check::from_ks("reversal-halves", &ks, vec![h, count - h]));
        out_cols.push(("max_first_half", first));
        out_cols.push(("max_second_half", second));
    }

    let report = base_report("bridge-convergence", checks, seed, cone, dist, x, n)
        .with("end", y.to_vec())
        .with("t", t)
        .with("count", count)
        .with("alpha", opts.alpha)
        .with("method", opts.method)
        .with("grid", opts.grid)
        .with("reference_count", opts.reference_count)
        .with("event_probability", ens.event_probability);
    let mut out = ExperimentOutput::new(report);
    for (name, v) in out_cols {
        out = out.column(name, v);
    }
    Ok(out)
}

/// Largest number of step sequences enumerated by the exact checks.
pub const ENUMERATION_LIMIT: f64 = 2e7;

/// All surviving step sequences of length `n` from `x`, as position lists
/// `x + S(1), …, x + S(n)` with their probabilities.
pub fn enumerate_surviving(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &[i64],
    n: usize,
) -> Result<Vec<(Vec<Vec<i64>>, f64)>> {
    let atoms = dist.lattice_atoms()?;
    if (atoms.len() as f64).powi(n as i32) > ENUMERATION_LIMIT {
        return Err(Error::invalid(format!(
            "{}^{n} sequences exceed the enumeration limit",
            atoms.len()
        )));
    }
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<Vec<i64>>, f64)> = vec![(vec![x.to_vec()], 1.0)];
    while let Some((path, p)) = stack.pop() {
        if path.len() == n + 1 {
            out.push((path[1..].to_vec(), p));
            continue;
        }
        let last = path.last().unwrap();
        for (a, q) in &atoms {
            let z: Vec<i64> = last.iter().zip(a).map(|(c, s)| c + s).collect();
            let zf: Vec<f64> = z.iter().map(|&c| c as f64).collect();
            if cone.contains_unchecked(&zf) {
                let mut next = path.clone();
                next.push(z);
                stack.push((next, p * q));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixIdentity {
    pub tv: f64,
    /// `P(x + S(k) = z | τ_x > n, x + S(n) = y)` by enumeration.
    pub bridge: Vec<(Vec<i64>, f64)>,
    /// The meander prefix law reweighted by the discrete bridge weight.
    pub reweighted: Vec<(Vec<i64>, f64)>,
}

/// Exact finite-`n` identity between the bridge prefix law at step `k`
/// and the meander prefix law reweighted by
/// `h(k, z) = [P_z(S(n-k) = y, τ > n-k) / P_z(τ > n-k)] / [P_x(S(n) = y, τ > n) / P_x(τ > n)]`.
/// The left side is enumerated path by path; the right side uses the
/// dynamic programme.
pub fn bridge_prefix_identity(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &[i64],
    y: &[i64],
    n: usize,
    k: usize,
) -> Result<PrefixIdentity> {
    if k > n {
        return Err(Error::invalid("prefix length exceeds the horizon"));
    }
    let mut bridge: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut mass = 0.0;
    for (path, p) in enumerate_surviving(cone, dist, x, n)? {
        if path.last().map(|e| e.as_slice()) == Some(y) || (n == 0 && x == y) {
            let z = if k == 0 {
                x.to_vec()
            } else {
                path[k - 1].clone()
            };
            *bridge.entry(z).or_default() += p;
            mass += p;
        }
    }
    if !(mass > 0.0) {
        return Err(Error::Unreachable(format!(
            "{y:?} is not in D_n(x) for n = {n}"
        )));
    }
    let bridge: Vec<(Vec<i64>, f64)> = bridge.into_iter().map(|(z, p)| (z, p / mass)).collect();

    let to_point = |z: &[i64]| Point::new(z.iter().map(|&c| c as f64).collect());
    let xp = to_point(x);
    let surv = |z: &Point, m: usize| -> Result<f64> {
        LatticeModel::new(cone, dist, z, Purpose::Endpoint)?
            .endpoint_law(m)
            .map(|law| law.iter().map(|(_, p)| p).sum())
    };
    let hit = |z: &Point, m: usize| {
        LatticeModel::new(cone, dist, z, Purpose::Endpoint)?.point_probability(y, m)
    };
    let px_surv = surv(&xp, n)?;
    let px_hit = hit(&xp, n)?;
    let prefix = LatticeModel::new(cone, dist, &xp, Purpose::Endpoint)?.endpoint_law(k)?;
    let mut reweighted = Vec::new();
    for (z, q) in prefix {
        let zp = to_point(&z);
        let s = surv(&zp, n - k)?;
        if !(s > 0.0) || !(q > 0.0) {
            continue;
        }
        let meander = q * s / px_surv;
        let h = (hit(&zp, n - k)? / s) / (px_hit / px_surv);
        if meander * h > 0.0 {
            reweighted.push((z, meander * h));
        }
    }
    let tv = tv_distance(&bridge, &reweighted)?;
    Ok(PrefixIdentity {
        tv,
        bridge,
        reweighted,
    })
}

/// Total variation between the empirical path law of `count` sampled
/// bridges and the exact law by enumeration.
#[allow(clippy::too_many_arguments)]
pub fn bridge_sample_tv(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    y: &Point,
    n: usize,
    count: usize,
    seed: u64,
    opts: &BridgeOptions,
) -> Result<f64> {
    let ens = sample_bridge_with(cone, dist, x, n, y, count, seed, opts, |v| {
        v.positions.iter().map(|&c| c as i64).collect::<Vec<i64>>()
    })?;
    let xl = x
        .to_lattice()
        .ok_or_else(|| Error::invalid("start must be a lattice point"))?;
    let yl = y
        .to_lattice()
        .ok_or_else(|| Error::invalid("end must be a lattice point"))?;
    let exact: Vec<(Vec<i64>, f64)> = enumerate_surviving(cone, dist, &xl, n)?
        .into_iter()
        .filter(|(p, _)| p.last().map(|e| e.as_slice()) == Some(yl.as_slice()))
        .map(|(p, q)| (p.concat(), q))
        .collect();
    let total: f64 = exact.iter().map(|(_, q)| q).sum();
    let exact: Vec<(Vec<i64>, f64)> = exact.into_iter().map(|(p, q)| (p, q / total)).collect();
    tv_distance(&crate::stats::empirical(&ens.values), &exact)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeierlKind {
    /// `max_k (x_d + S_d(k)) / √n`.
    MaxTop,
    /// `max_k |x_d + S_d(k) - x_1 - S_1(k)| / √n`.
    MaxRange,
}

/// Unscaled value of the functional on one path, including time 0.
fn feierl_raw(v: &PathView<'_>, kind: FeierlKind) -> f64 {
    let d = v.dim;
    (0..=v.len())
        .map(|k| {
            let p = v.position(k);
            match kind {
                FeierlKind::MaxTop => p[d - 1],
                FeierlKind::MaxRange => (p[d - 1] - p[0]).abs(),
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The functional of one bridge path, scaled by `1/√n`.
pub fn feierl_functional(cone: &ConeSpec, v: &PathView<'_>, kind: FeierlKind) -> Result<f64> {
    match cone.kind() {
        ConeKind::WeylA(_) | ConeKind::WeylB(_) => {}
        _ => return Err(Error::invalid(format!("{cone} is not a Weyl chamber"))),
    }
    Ok(feierl_raw(v, kind) / (v.horizon.max(1) as f64).sqrt())
}

/// Universality of the Weyl-chamber bridge functional: two lattice step
/// laws with identity covariance give samples compared by a two-sample
/// Kolmogorov–Smirnov test.
#[allow(clippy::too_many_arguments)]
pub fn feierl_universality_test(
    cone: &ConeSpec,
    a: &StepDistribution,
    b: &StepDistribution,
    x: &Point,
    y: &Point,
    n: usize,
    count: usize,
    seed: u64,
    kind: FeierlKind,
    alpha: f64,
) -> Result<ExperimentOutput> {
    if !matches!(cone.kind(), ConeKind::WeylA(_) | ConeKind::WeylB(_)) {
        return Err(Error::invalid(format!("{cone} is not a Weyl chamber")));
    }
    let d = x.dim();
    let sample = |dist: &StepDistribution, s: u64| -> Result<Vec<f64>> {
        let ens = sample_bridge_with(
            cone,
            dist,
            x,
            n,
            y,
            count,
            s,
            &BridgeOptions::default(),
            |v| feierl_raw(&v, kind),
        )?;
        let sp = step_spacing(dist).map(|sp| match kind {
            FeierlKind::MaxTop => sp[d - 1],
            FeierlKind::MaxRange => gcd(sp[d - 1], sp[0]),
        });
        Ok(jittered_scalars(
            &ens.values,
            sp,
            n,
            rng::derive_seed(s, TAG_JITTER),
        ))
    };
    let sa = sample(a, seed)?;
    let sb = sample(b, rng::derive_seed(seed, TAG_SECOND))?;
    let ks = ks_two_sample(&sa, &sb, alpha)?;
    let name = match kind {
        FeierlKind::MaxTop => "max-top",
        FeierlKind::MaxRange => "max-range",
    };
    let report = TestReport::new(
        "feierl-universality",
        vec![Check::from_ks(name, &ks, vec![count, count])],
        vec![seed],
    )
    .with("cone", cone.to_string())
    .with("steps", [a.label(), b.label()])
    .with("start", x.to_vec())
    .with("end", y.to_vec())
    .with("n", n)
    .with("count", count)
    .with("alpha", alpha);
    Ok(ExperimentOutput::new(report)
        .column(&format!("{name}_{}", a.label()), sa)
        .column(&format!("{name}_{}", b.label()), sb))
}

/// How survival probabilities are obtained for the exponent fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SurvivalSource {
    /// Exact dynamic programme (lattice laws).
    Exact,
    MonteCarlo {
        replicas: u64,
    },
}

/// Survival probabilities on a horizon grid and the fitted decay exponent,
/// checked against `-p/2` within `tolerance`.
pub fn survival_exponent_test(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    horizons: &[usize],
    source: SurvivalSource,
    tolerance: f64,
    seed: u64,
) -> Result<(ExperimentOutput, ExponentFit)> {
    if horizons.is_empty() {
        return Err(Error::invalid("no horizons given"));
    }
    let survivals: Vec<(usize, f64)> = match source {
        SurvivalSource::Exact => {
            let top = *horizons.iter().max().unwrap();
            let curve = survival_curve_exact(cone, dist, x, top)?;
            horizons.iter().map(|&n| (n, curve[n])).collect()
        }
        SurvivalSource::MonteCarlo { replicas } => horizons
            .iter()
            .map(|&n| {
                survival_probability_mc(
                    cone,
                    dist,
                    x,
                    n,
                    replicas,
                    rng::derive_seed(seed, n as u64),
                )
                .map(|e| (n, e.probability))
            })
            .collect::<Result<_>>()?,
    };
    let pts: Vec<(f64, f64)> = survivals.iter().map(|&(n, p)| (n as f64, p)).collect();
    let fit = exponent_fit(&pts)?;
    let target = -cone.exponent() / 2.0;
    let check = Check::accept(
        "slope",
        (fit.slope - target).abs(),
        tolerance,
        vec![horizons.len()],
    );
    let report = base_report(
        "survival-exponent",
        vec![check],
        seed,
        cone,
        dist,
        x,
        *horizons.iter().max().unwrap(),
    )
    .with("source", source)
    .with("slope", fit.slope)
    .with("intercept", fit.intercept)
    .with("slope_ci_half_width", fit.half_width)
    .with("target", target)
    .with("horizons", horizons);
    let out = ExperimentOutput::new(report)
        .column("n", survivals.iter().map(|&(n, _)| n as f64).collect())
        .column("survival", survivals.iter().map(|&(_, p)| p).collect());
    Ok((out, fit))
}
