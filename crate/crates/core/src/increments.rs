//! Increment laws with zero mean and identity covariance.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng;

const MASS_TOL: f64 = 1e-12;
const MOMENT_TOL: f64 = 1e-12;

/// Finite-support law given by its atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSupport {
    dim: usize,
    atoms: Vec<(Vec<f64>, f64)>,
    cumulative: Vec<f64>,
}

impl LatticeSupport {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let dim = atoms
            .first()
            .map(|(x, _)| x.len())
            .ok_or_else(|| Error::invalid("lattice support is empty"))?;
        if dim == 0 {
            return Err(Error::invalid("lattice atoms need at least one coordinate"));
        }
        for (x, p) in &atoms {
            if x.len() != dim {
                return Err(Error::invalid("lattice atoms have mixed dimensions"));
            }
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::invalid(format!("negative or invalid mass {p}")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite lattice atom"));
            }
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!(
                "lattice probabilities sum to {total}, not 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(LatticeSupport {
            dim,
            atoms,
            cumulative,
        })
    }

    /// Parses the support file format: one atom per line, `p x1 … xd`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::Parse(format!("line {}: bad number", lineno + 1)))?;
            if nums.len() < 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected 'p x1 .. xd'",
                    lineno + 1
                )));
            }
            atoms.push((nums[1..].to_vec(), nums[0]));
        }
        LatticeSupport::new(atoms)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        LatticeSupport::parse(&std::fs::read_to_string(path)?)
    }

    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    /// Product law of a one-dimensional support over `d` coordinates.
    pub fn product(one_d: &[(f64, f64)], d: usize) -> Result<Self> {
        let mut atoms: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 0..d {
            atoms = atoms
                .into_iter()
                .flat_map(|(x, p)| {
                    one_d.iter().map(move |&(v, q)| {
                        let mut y = x.clone();
                        y.push(v);
                        (y, p * q)
                    })
                })
                .collect();
        }
        LatticeSupport::new(atoms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepKind {
    GaussianIsotropic(usize),
    RademacherProduct(usize),
    /// Uniform on the sphere of radius `√d`.
    SphereUniformScaled(usize),
    LatticeGeneral(LatticeSupport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    kind: StepKind,
    label: String,
}

/// The five-point law on {-2,…,2} with masses 1/16, 1/4, 3/8, 1/4, 1/16.
/// Unit variance, aperiodic, span 1.
pub const FIVE_POINT: [(f64, f64); 5] = [
    (-2.0, 0.0625),
    (-1.0, 0.25),
    (0.0, 0.375),
    (1.0, 0.25),
    (2.0, 0.0625),
];

impl StepDistribution {
    pub fn gaussian(d: usize) -> Self {
        StepDistribution {
            kind: StepKind::GaussianIsotropic(d),
            label: format!("gaussian:{d}"),
        }
    }

    pub fn rademacher(d: usize) -> Self {
        StepDistribution {
            kind: StepKind::RademacherProduct(d),
            label: format!("rademacher:{d}"),
        }
    }

    pub fn sphere(d: usize) -> Self {
        StepDistribution {
            kind: StepKind::SphereUniformScaled(d),
            label: format!("sphere:{d}"),
        }
    }

    /// Simple random walk on ℤ.
    pub fn srw() -> Self {
        StepDistribution {
            kind: StepKind::LatticeGeneral(
                LatticeSupport::new(vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)]).unwrap(),
            ),
            label: "lattice:srw".into(),
        }
    }

    /// Coordinatewise product of [`FIVE_POINT`].
    pub fn five_point(d: usize) -> Self {
        StepDistribution {
            kind: StepKind::LatticeGeneral(LatticeSupport::product(&FIVE_POINT, d).unwrap()),
            label: format!("lattice:five-point:{d}"),
        }
    }

    pub fn lattice(support: LatticeSupport, label: impl Into<String>) -> Self {
        StepDistribution {
            kind: StepKind::LatticeGeneral(support),
            label: label.into(),
        }
    }

    /// Parses a CLI step name for a walk in dimension `d`: `gaussian`,
    /// `rademacher`, `sphere`, `lattice:srw`, `lattice:five-point` or
    /// `lattice:<path>`. An explicit `:d` suffix on the first three is
    /// accepted and must agree with `d`.
    pub fn parse_for_dim(spec: &str, d: usize) -> Result<Self> {
        let spec = spec.trim();
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let dim_ok = |arg: Option<&str>| -> Result<()> {
            match arg {
                None => Ok(()),
                Some(a) => match a.parse::<usize>() {
                    Ok(k) if k == d => Ok(()),
                    _ => Err(Error::Parse(format!(
                        "step law '{spec}' does not match dimension {d}"
                    ))),
                },
            }
        };
        let dist = match name {
            "gaussian" => {
                dim_ok(arg)?;
                StepDistribution::gaussian(d)
            }
            "rademacher" => {
                dim_ok(arg)?;
                StepDistribution::rademacher(d)
            }
            "sphere" => {
                dim_ok(arg)?;
                StepDistribution::sphere(d)
            }
            "lattice" => {
                let arg = arg.ok_or_else(|| Error::Parse("lattice needs a support".into()))?;
                match arg {
                    "srw" => StepDistribution::srw(),
                    "five-point" => StepDistribution::five_point(d),
                    a if a.starts_with("five-point:") => {
                        dim_ok(a.strip_prefix("five-point:"))?;
                        StepDistribution::five_point(d)
                    }
                    path => StepDistribution::lattice(
                        LatticeSupport::from_file(Path::new(path))?,
                        format!("lattice:{path}"),
                    ),
                }
            }
            _ => return Err(Error::Parse(format!("unknown step law '{spec}'"))),
        };
        if dist.dim() != d {
            return Err(Error::invalid(format!(
                "step law '{spec}' has dimension {} but the cone has dimension {d}",
                dist.dim()
            )));
        }
        Ok(dist)
    }

    pub fn kind(&self) -> &StepKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            StepKind::GaussianIsotropic(d)
            | StepKind::RademacherProduct(d)
            | StepKind::SphereUniformScaled(d) => *d,
            StepKind::LatticeGeneral(s) => s.dim,
        }
    }

    /// Every shipped law has finite moments of all orders.
    pub fn moment_order(&self) -> f64 {
        f64::INFINITY
    }

    pub fn is_lattice(&self) -> bool {
        matches!(
            self.kind,
            StepKind::RademacherProduct(_) | StepKind::LatticeGeneral(_)
        )
    }

    /// Writes one increment into `out`.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            StepKind::GaussianIsotropic(_) => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            StepKind::RademacherProduct(d) => {
                let mut bits: u64 = rng.random();
                for (i, v) in out.iter_mut().enumerate() {
                    if i > 0 && i % 64 == 0 && i < *d {
                        bits = rng.random();
                    }
                    *v = if bits & 1 == 1 { 1.0 } else { -1.0 };
                    bits >>= 1;
                }
            }
            StepKind::SphereUniformScaled(d) => loop {
                let mut n2 = 0.0;
                for v in out.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *v = g;
                    n2 += g * g;
                }
                if n2 > 0.0 {
                    let s = (*d as f64).sqrt() / n2.sqrt();
                    out.iter_mut().for_each(|v| *v *= s);
                    break;
                }
            },
            StepKind::LatticeGeneral(s) => {
                let u: f64 = rng.random();
                let k = s
                    .cumulative
                    .partition_point(|&c| c <= u)
                    .min(s.atoms.len() - 1);
                out.copy_from_slice(&s.atoms[k].0);
            }
        }
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut p = Point::zeros(self.dim());
        self.sample_into(rng, &mut p);
        p
    }

    /// Finite support, if any.
    pub fn atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match &self.kind {
            StepKind::RademacherProduct(d) => {
                let d = *d;
                if d > 20 {
                    return None;
                }
                let p = 0.5f64.powi(d as i32);
                Some(
                    (0..(1u64 << d))
                        .map(|mask| {
                            let x = (0..d)
                                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                                .collect();
                            (x, p)
                        })
                        .collect(),
                )
            }
            StepKind::LatticeGeneral(s) => Some(s.atoms.clone()),
            _ => None,
        }
    }

    /// Integer-valued support, required by the exact lattice machinery.
    pub fn lattice_atoms(&self) -> Result<Vec<(Vec<i64>, f64)>> {
        let atoms = self.atoms().ok_or_else(|| {
            Error::NonLattice(format!("'{}' has no finite lattice support", self.label))
        })?;
        atoms
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(x, p)| {
                Point::new(x).to_lattice().map(|z| (z, p)).ok_or_else(|| {
                    Error::NonLattice(format!("'{}' has non-integer atoms", self.label))
                })
            })
            .collect()
    }

    /// Largest step length; `None` for unbounded laws.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            StepKind::GaussianIsotropic(_) => None,
            StepKind::RademacherProduct(d) | StepKind::SphereUniformScaled(d) => {
                Some((*d as f64).sqrt())
            }
            StepKind::LatticeGeneral(s) => Some(
                s.atoms
                    .iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(x, _)| crate::point::norm(x))
                    .fold(0.0, f64::max),
            ),
        }
    }

    /// `P(|X| > y)`, exactly.
    pub fn tail_probability(&self, y: f64) -> f64 {
        match &self.kind {
            StepKind::GaussianIsotropic(d) => {
                if y <= 0.0 {
                    1.0
                } else {
                    statrs::function::gamma::gamma_ur(*d as f64 / 2.0, y * y / 2.0)
                }
            }
            StepKind::RademacherProduct(d) | StepKind::SphereUniformScaled(d) => {
                if (*d as f64).sqrt() > y {
                    1.0
                } else {
                    0.0
                }
            }
            StepKind::LatticeGeneral(s) => s
                .atoms
                .iter()
                .filter(|(x, _)| crate::point::norm(x) > y)
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// Law of `-X`.
    pub fn reversed(&self) -> StepDistribution {
        match &self.kind {
            StepKind::LatticeGeneral(s) => {
                let atoms = s
                    .atoms
                    .iter()
                    .map(|(x, p)| (x.iter().map(|v| -v).collect(), *p))
                    .collect();
                StepDistribution {
                    kind: StepKind::LatticeGeneral(LatticeSupport::new(atoms).unwrap()),
                    label: format!("reversed({})", self.label),
                }
            }
            // The remaining laws are symmetric.
            _ => self.clone(),
        }
    }

    /// Mean and covariance check. Exact for finite support; otherwise a
    /// Monte Carlo self-test with `samples` draws flagged at 4 standard errors.
    pub fn check_normalisation(&self, samples: usize, seed: u64) -> NormalisationReport {
        let d = self.dim();
        if let Some(atoms) = self.atoms() {
            let mut mean = vec![0.0; d];
            let mut second = vec![vec![0.0; d]; d];
            for (x, p) in &atoms {
                for i in 0..d {
                    mean[i] += p * x[i];
                    for j in 0..d {
                        second[i][j] += p * x[i] * x[j];
                    }
                }
            }
            let mean_dev = mean.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let mut cov_dev: f64 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let target = if i == j { 1.0 } else { 0.0 };
                    cov_dev = cov_dev.max((second[i][j] - mean[i] * mean[j] - target).abs());
                }
            }
            return NormalisationReport {
                exact: true,
                samples: 0,
                mean,
                max_mean_deviation: mean_dev,
                max_cov_deviation: cov_dev,
                max_standard_errors: 0.0,
                pass: mean_dev < MOMENT_TOL && cov_dev < MOMENT_TOL,
            };
        }

        let n = samples.max(2);
        let mut rng = rng::stream(seed, 0);
        let mut x = vec![0.0; d];
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![vec![0.0; d]; d];
        let mut s4 = vec![vec![0.0; d]; d];
        for _ in 0..n {
            self.sample_into(&mut rng, &mut x);
            for i in 0..d {
                s1[i] += x[i];
                for j in 0..d {
                    let q = x[i] * x[j];
                    s2[i][j] += q;
                    s4[i][j] += q * q;
                }
            }
        }
        let nf = n as f64;
        let mean: Vec<f64> = s1.iter().map(|v| v / nf).collect();
        let mut worst_se: f64 = 0.0;
        let mut mean_dev: f64 = 0.0;
        let mut cov_dev: f64 = 0.0;
        for i in 0..d {
            let var_i = s2[i][i] / nf - mean[i] * mean[i];
            let se = (var_i / nf).sqrt();
            mean_dev = mean_dev.max(mean[i].abs());
            worst_se = worst_se.max(mean[i].abs() / se);
            for j in 0..d {
                let m2 = s2[i][j] / nf;
                let target = if i == j { 1.0 } else { 0.0 };
                let var_q = s4[i][j] / nf - m2 * m2;
                let se = (var_q / nf).sqrt();
                cov_dev = cov_dev.max((m2 - target).abs());
                if se > 0.0 {
                    worst_se = worst_se.max((m2 - target).abs() / se);
                }
            }
        }
        NormalisationReport {
            exact: false,
            samples: n,
            mean,
            max_mean_deviation: mean_dev,
            max_cov_deviation: cov_dev,
            max_standard_errors: worst_se,
            pass: worst_se <= 4.0,
        }
    }
}

impl fmt::Display for StepDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FromStr for LatticeSupport {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LatticeSupport::parse(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalisationReport {
    pub exact: bool,
    pub samples: usize,
    pub mean: Vec<f64>,
    pub max_mean_deviation: f64,
    pub max_cov_deviation: f64,
    /// Largest deviation in units of its standard error (Monte Carlo only).
    pub max_standard_errors: f64,
    pub pass: bool,
}
