//! Versioned experiment manifests and the runner shared by the test
//! subcommands and `suite`.

use std::path::{Path, PathBuf};

use conewalk::conditioned::{BridgeOptions, SamplerMethod};
use conewalk::harmonic::{build_v_exact, HarmonicOptions, HarmonicTable, InitialGuess};
use conewalk::reference::GridOptions;
use conewalk::stats::experiments::{
    bridge_convergence_test, bridge_prefix_identity, bridge_sample_tv, feierl_universality_test,
    htransform_convergence_test, meander_convergence_test, survival_exponent_test,
    BridgeTestOptions, ExperimentOutput, FeierlKind, HTransformTestOptions, MeanderTestOptions,
    SurvivalSource,
};
use conewalk::stats::{parse_horizons, Check, TestReport};
use conewalk::walk::{LatticeModel, Purpose};
use conewalk::{ConeSpec, Point, StepDistribution};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA: &str = "conewalk-manifest/v1";

pub const DEFAULT_MANIFEST: &str = include_str!("../manifests/default.json");
pub const QUICK_MANIFEST: &str = include_str!("../manifests/quick.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub name: String,
    /// Directory for outputs with relative paths.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SurvivalExponent,
    Meander,
    Htransform,
    Bridge,
    /// Exact bridge prefix law against the reweighted meander, all horizons
    /// up to `n` and all prefix lengths.
    BridgePrefix,
    /// Sampled bridge against enumeration of all bridge paths.
    BridgeEnumeration,
    Feierl,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::SurvivalExponent => "survival-exponent",
            Kind::Meander => "meander",
            Kind::Htransform => "htransform",
            Kind::Bridge => "bridge",
            Kind::BridgePrefix => "bridge-prefix",
            Kind::BridgeEnumeration => "bridge-enumeration",
            Kind::Feierl => "feierl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub m: usize,
    pub eps: f64,
    #[serde(default = "yes")]
    pub bridge_correction: bool,
}

fn yes() -> bool {
    true
}

fn one_percent() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "one_percent")]
    pub alpha: f64,
    /// Slope tolerance (survival exponent) or TV bound (bridge identities).
    #[serde(default)]
    pub tolerance: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            alpha: 0.01,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub samples: Option<PathBuf>,
    #[serde(default)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub id: String,
    pub kind: Kind,
    pub cone: String,
    pub steps: String,
    /// Second step law of a universality comparison.
    #[serde(default)]
    pub other_steps: Option<String>,
    pub start: Vec<f64>,
    #[serde(default)]
    pub end: Option<Vec<f64>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub horizons: Option<String>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub reference_count: Option<usize>,
    #[serde(default)]
    pub t: Option<f64>,
    /// Harmonic table window radius for the h-transform.
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default)]
    pub vtable: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub source: Option<SurvivalSource>,
    #[serde(default)]
    pub method: Option<SamplerMethod>,
    #[serde(default)]
    pub functional: Option<FeierlKind>,
    #[serde(default = "yes")]
    pub negative_control: bool,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Experiment {
    /// A bare experiment for ad hoc runs; callers fill in the rest.
    pub fn new(id: &str, kind: Kind, cone: &str, steps: &str, start: Vec<f64>, seed: u64) -> Self {
        Experiment {
            id: id.to_string(),
            kind,
            cone: cone.to_string(),
            steps: steps.to_string(),
            other_steps: None,
            start,
            end: None,
            n: None,
            horizons: None,
            count: None,
            reference_count: None,
            t: None,
            window: None,
            vtable: None,
            grid: None,
            source: None,
            method: None,
            functional: None,
            negative_control: true,
            seed,
            thresholds: Thresholds::default(),
            outputs: Outputs::default(),
        }
    }
}

/// Reads a manifest file; bare names of bundled manifests resolve to the
/// built-in copies when no such file exists.
pub fn load(spec: &str) -> Result<Manifest, CliError> {
    let path = Path::new(spec);
    let text = if path.exists() {
        std::fs::read_to_string(path).map_err(|e| crate::output::io_err(path, e))?
    } else {
        match spec {
            "default" | "default.json" => DEFAULT_MANIFEST.to_string(),
            "quick" | "quick.json" => QUICK_MANIFEST.to_string(),
            _ => return Err(CliError::Validation(format!("manifest {spec} not found"))),
        }
    };
    parse(&text)
}

pub fn parse(text: &str) -> Result<Manifest, CliError> {
    let m: Manifest =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("manifest: {e}")))?;
    if m.schema != SCHEMA {
        return Err(CliError::Validation(format!(
            "manifest schema '{}' is not supported (expected '{SCHEMA}')",
            m.schema
        )));
    }
    let mut ids: Vec<&str> = m.experiments.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Validation(format!(
            "duplicate experiment id '{}'",
            w[0]
        )));
    }
    Ok(m)
}

fn need<T: Copy>(v: Option<T>, what: &str, id: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("experiment '{id}' needs '{what}'")))
}

fn lattice(p: &Point, id: &str) -> Result<Vec<i64>, CliError> {
    p.to_lattice().ok_or_else(|| {
        CliError::Validation(format!(
            "experiment '{id}': {:?} is not a lattice point",
            p.to_vec()
        ))
    })
}

pub fn parse_cone(s: &str) -> Result<ConeSpec, CliError> {
    Ok(s.parse::<ConeSpec>()?)
}

pub fn parse_steps(s: &str, cone: &ConeSpec) -> Result<StepDistribution, CliError> {
    Ok(StepDistribution::parse_for_dim(s, cone.dimension())?)
}

/// Harmonic table from a file or built over `window`; the default window
/// holds the h-transformed walk up to horizon `n` with room to spare.
pub fn harmonic_table(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    vtable: Option<&Path>,
    window: Option<f64>,
) -> Result<HarmonicTable, CliError> {
    if let Some(p) = vtable {
        return Ok(HarmonicTable::read(p, dist)?);
    }
    let r = window.unwrap_or_else(|| 8.0 * (n as f64).sqrt() + x.norm() + 10.0);
    let opts = HarmonicOptions {
        initial: InitialGuess::Anchor,
        ..HarmonicOptions::new(r)
    };
    Ok(build_v_exact(cone, dist, &opts)?)
}

fn grid(e: &Experiment) -> GridOptions {
    match e.grid {
        Some(g) => GridOptions {
            m: g.m,
            eps: g.eps,
            bridge_correction: g.bridge_correction,
            ..GridOptions::default()
        },
        None => GridOptions::default(),
    }
}

pub fn run(e: &Experiment) -> Result<ExperimentOutput, CliError> {
    let cone = parse_cone(&e.cone)?;
    let dist = parse_steps(&e.steps, &cone)?;
    let x = Point::new(e.start.clone());
    let alpha = e.thresholds.alpha;
    let id = e.id.as_str();
    if cone.exponent() > 2.0 {
        eprintln!(
            "warning: {cone} has exponent p = {} > 2; the limit theorems then ask for moments of order p",
            cone.exponent()
        );
    }
    let mut out = match e.kind {
        Kind::SurvivalExponent => {
            let spec = e.horizons.as_deref().ok_or_else(|| {
                CliError::Validation(format!("experiment '{id}' needs 'horizons'"))
            })?;
            let horizons = parse_horizons(spec)?;
            let source = e.source.unwrap_or(SurvivalSource::Exact);
            let tol = e.thresholds.tolerance.unwrap_or(0.05);
            survival_exponent_test(&cone, &dist, &x, &horizons, source, tol, e.seed)?.0
        }
        Kind::Meander => {
            let default = if dist.lattice_atoms().is_ok() {
                SamplerMethod::Guided
            } else {
                SamplerMethod::Rejection
            };
            let opts = MeanderTestOptions {
                method: e.method.unwrap_or(default),
                alpha,
                reference_count: e.reference_count.unwrap_or(0),
                grid: grid(e),
                negative_control: e.negative_control,
            };
            meander_convergence_test(
                &cone,
                &dist,
                &x,
                need(e.n, "n", id)?,
                need(e.count, "count", id)?,
                e.seed,
                &opts,
            )?
        }
        Kind::Htransform => {
            let n = need(e.n, "n", id)?;
            let table = harmonic_table(&cone, &dist, &x, n, e.vtable.as_deref(), e.window)?;
            let opts = HTransformTestOptions {
                alpha,
                negative_control: e.negative_control,
                ..HTransformTestOptions::default()
            };
            htransform_convergence_test(
                &table,
                &dist,
                &x,
                n,
                need(e.count, "count", id)?,
                e.seed,
                &opts,
            )?
        }
        Kind::Bridge => {
            let y = Point::new(e.end.clone().unwrap_or_else(|| e.start.clone()));
            let opts = BridgeTestOptions {
                alpha,
                reference_count: e.reference_count.unwrap_or(20_000),
                grid: grid(e),
                method: e.method.unwrap_or(SamplerMethod::Guided),
                ..BridgeTestOptions::default()
            };
            bridge_convergence_test(
                &cone,
                &dist,
                &x,
                &y,
                need(e.n, "n", id)?,
                e.t.unwrap_or(0.5),
                need(e.count, "count", id)?,
                e.seed,
                &opts,
            )?
        }
        Kind::BridgePrefix => {
            let y = Point::new(e.end.clone().unwrap_or_else(|| e.start.clone()));
            let (xl, yl) = (lattice(&x, id)?, lattice(&y, id)?);
            let top = need(e.n, "n", id)?;
            let tol = e.thresholds.tolerance.unwrap_or(1e-12);
            let mut worst = 0.0f64;
            let mut cases = 0usize;
            let model = LatticeModel::new(&cone, &dist, &x, Purpose::Endpoint)?;
            for n in 1..=top {
                // Horizons with no bridge path carry no identity to check.
                if model.point_probability(&yl, n)? <= 0.0 {
                    continue;
                }
                for k in 0..=n {
                    worst = worst.max(bridge_prefix_identity(&cone, &dist, &xl, &yl, n, k)?.tv);
                    cases += 1;
                }
            }
            let report = TestReport::new(
                "bridge-prefix-identity",
                vec![Check::accept("max-tv", worst, tol, vec![cases])],
                vec![e.seed],
            )
            .with("cone", cone)
            .with("steps", &e.steps)
            .with("start", e.start.clone())
            .with("end", y.to_vec())
            .with("max_n", top)
            .with("max_tv", worst);
            ExperimentOutput {
                report,
                columns: Vec::new(),
                curves: Vec::new(),
            }
        }
        Kind::BridgeEnumeration => {
            let y = Point::new(e.end.clone().unwrap_or_else(|| e.start.clone()));
            let n = need(e.n, "n", id)?;
            let count = need(e.count, "count", id)?;
            let tol = e.thresholds.tolerance.unwrap_or(0.01);
            let opts = BridgeOptions {
                method: e.method.unwrap_or(SamplerMethod::Guided),
                ..BridgeOptions::default()
            };
            let tv = bridge_sample_tv(&cone, &dist, &x, &y, n, count, e.seed, &opts)?;
            let report = TestReport::new(
                "bridge-enumeration",
                vec![Check::accept("tv", tv, tol, vec![count])],
                vec![e.seed],
            )
            .with("cone", cone)
            .with("steps", &e.steps)
            .with("start", e.start.clone())
            .with("end", y.to_vec())
            .with("n", n)
            .with("tv", tv);
            ExperimentOutput {
                report,
                columns: Vec::new(),
                curves: Vec::new(),
            }
        }
        Kind::Feierl => {
            let other = e.other_steps.as_deref().ok_or_else(|| {
                CliError::Validation(format!("experiment '{id}' needs 'other_steps'"))
            })?;
            let b = parse_steps(other, &cone)?;
            let y = Point::new(e.end.clone().unwrap_or_else(|| e.start.clone()));
            feierl_universality_test(
                &cone,
                &dist,
                &b,
                &x,
                &y,
                need(e.n, "n", id)?,
                need(e.count, "count", id)?,
                e.seed,
                e.functional.unwrap_or(FeierlKind::MaxTop),
                alpha,
            )?
        }
    };
    out.report = out.report.with("id", id);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_manifests_parse() {
        for name in ["default", "quick.json"] {
            let m = load(name).unwrap();
            assert!(!m.experiments.is_empty());
            for e in &m.experiments {
                parse_cone(&e.cone).unwrap();
            }
        }
    }

    #[test]
    fn rejects_bad_manifests() {
        let one = r#"{"id": "a", "kind": "meander", "cone": "half-line", "steps": "lattice:srw", "start": [1], "seed": 0}"#;
        let wrap = |schema: &str, body: &str| {
            format!(r#"{{"schema": "{schema}", "name": "t", "experiments": [{body}]}}"#)
        };
        assert!(parse(&wrap(SCHEMA, one)).is_ok());
        assert!(matches!(
            parse(&wrap("other/v0", one)),
            Err(CliError::Validation(_))
        ));
        assert!(matches!(
            parse(&wrap(SCHEMA, &format!("{one}, {one}"))),
            Err(CliError::Validation(_))
        ));
        let typo = one.replace("\"seed\"", "\"sed\"");
        assert!(parse(&wrap(SCHEMA, &typo)).is_err());
    }
}
