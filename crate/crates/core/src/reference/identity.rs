//! Agreement of the `u`-transformed motion started near the vertex with the
//! meander reweighted by `u` at its endpoint.

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::point::norm;
use crate::reference::diffusion::{
    sample_bm_meander_with, sample_h_bm_with, DiffusionEnsemble, GridOptions,
};
use crate::rng;
use crate::stats::{bootstrap_difference, Check, TestReport, BOOTSTRAP_RESAMPLES};

/// Endpoint coordinates, endpoint norm and max norm of a flattened grid path.
fn functionals(d: usize, path: &[f64]) -> Vec<f64> {
    let end = &path[path.len() - d..];
    let mut f = end.to_vec();
    f.push(norm(end));
    f.push(path.chunks(d).map(norm).fold(0.0, f64::max));
    f
}

fn names(d: usize) -> Vec<String> {
    let mut v: Vec<String> = (1..=d).map(|i| format!("endpoint-{i}")).collect();
    v.push("endpoint-norm".into());
    v.push("max-norm".into());
    v
}

/// Compares self-normalised estimates of a functional panel under the
/// `u`-transformed motion from `ε·x₀` and under the `u(M(1))`-weighted
/// grid meander, each against a bootstrap band at level `alpha`.
pub fn htransform_limit_identity_check(
    cone: &ConeSpec,
    eps: f64,
    samples: usize,
    seed: u64,
    grid: &GridOptions,
    alpha: f64,
) -> Result<TestReport> {
    let d = cone.dimension();
    let opts = GridOptions { eps, ..*grid };
    let start: Vec<f64> = cone.interior_direction().iter().map(|c| c * eps).collect();
    let h = sample_h_bm_with(
        cone,
        &start,
        1.0,
        &opts,
        samples,
        rng::derive_seed(seed, 1),
        |p| functionals(d, p),
    )?;
    let m = sample_bm_meander_with(cone, &opts, samples, rng::derive_seed(seed, 2), |p| {
        functionals(d, p)
    })?;
    htransform_limit_identity_from(cone, &h, &m, alpha, seed)
}

/// The comparison on given ensembles of functional panels; `m` must be an
/// unweighted meander ensemble of the same cone.
pub fn htransform_limit_identity_from(
    cone: &ConeSpec,
    h: &DiffusionEnsemble<Vec<f64>>,
    m: &DiffusionEnsemble<Vec<f64>>,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    if h.cone != *cone || m.cone != *cone {
        return Err(Error::invalid(format!(
            "ensembles were sampled in {} and {}, expected {cone}",
            h.cone, m.cone
        )));
    }
    let d = cone.dimension();
    let mw: Vec<f64> = m
        .values
        .iter()
        .zip(&m.weights)
        .map(|(f, w)| w * cone.u_unchecked(&f[..d]))
        .collect();
    let mut checks = Vec::new();
    for (j, name) in names(d).into_iter().enumerate() {
        let a: Vec<f64> = h.values.iter().map(|f| f[j]).collect();
        let b: Vec<f64> = m.values.iter().map(|f| f[j]).collect();
        let band = bootstrap_difference(
            &a,
            Some(&h.weights),
            &b,
            Some(&mw),
            BOOTSTRAP_RESAMPLES,
            alpha,
            rng::derive_seed(seed, 10 + j as u64),
        )?;
        checks.push(Check::accept(
            name,
            band.difference.abs(),
            band.threshold,
            vec![a.len(), b.len()],
        ));
    }
    Ok(
        TestReport::new("htransform-limit-identity", checks, vec![seed])
            .with("cone", cone.to_string())
            .with("eps", h.grid.eps)
            .with("grid", h.grid.m)
            .with("alpha", alpha),
    )
}
