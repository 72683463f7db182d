//! The positive harmonic function `V` of a lattice walk killed on leaving `K`.
//!
//! `V` is characterised by `V(x) = E[V(x + X); x + X ∈ K]` inside the cone,
//! `V = 0` outside and `V ~ u` at infinity. On a finite window the far field
//! is replaced by Dirichlet data `u` on an annulus one step wide, and the
//! interior is solved by damped Jacobi sweeps.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::increments::StepDistribution;
use crate::point::{norm, Point};
use crate::rng;
use crate::walk::simulate::{check_start, run_walk};

/// Largest number of cells in a harmonic table box.
pub const TABLE_LIMIT: usize = 50_000_000;
const SWEEP_CHUNK: usize = 4096;
const MC_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    Zero,
    /// Start from `u`; exact when `u` is already harmonic for the walk.
    Anchor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicOptions {
    pub window_radius: f64,
    /// Relative to the largest interior value.
    pub tol: f64,
    pub max_sweeps: usize,
    pub damping: f64,
    pub initial: InitialGuess,
    /// Multiplies the far-field data `u`.
    pub anchor_scale: f64,
}

impl HarmonicOptions {
    pub fn new(window_radius: f64) -> Self {
        HarmonicOptions {
            window_radius,
            tol: 1e-13,
            max_sweeps: 1_000_000,
            damping: 1.0,
            initial: InitialGuess::Zero,
            anchor_scale: 1.0,
        }
    }
}

/// Sidecar metadata for a stored table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub cone: ConeSpec,
    pub steps: String,
    pub window_radius: f64,
    pub margin: i64,
    pub residual: f64,
    pub tol: f64,
    pub sweeps: usize,
    pub anchor_scale: f64,
}

#[derive(Debug, Clone)]
pub struct HarmonicTable {
    meta: TableMeta,
    dim: usize,
    lo: i64,
    side: usize,
    /// `V̂` on the whole box: interior unknowns, far-field data and zeros.
    values: Vec<f64>,
    interior: Vec<usize>,
    atoms: Vec<(Vec<i64>, f64)>,
}

struct Stencil {
    /// CSR over interior cells: neighbour flat index and probability.
    offsets: Vec<usize>,
    neighbours: Vec<(usize, f64)>,
}

impl HarmonicTable {
    pub(crate) fn flat(&self, z: &[i64]) -> Option<usize> {
        let mut f = 0usize;
        for &c in z {
            let i = c - self.lo;
            if i < 0 || i as usize >= self.side {
                return None;
            }
            f = f * self.side + i as usize;
        }
        Some(f)
    }

    fn coords(&self, mut f: usize) -> Vec<i64> {
        let mut z = vec![0; self.dim];
        for i in (0..self.dim).rev() {
            z[i] = (f % self.side) as i64 + self.lo;
            f /= self.side;
        }
        z
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn cone(&self) -> &ConeSpec {
        &self.meta.cone
    }

    pub fn window_radius(&self) -> f64 {
        self.meta.window_radius
    }

    /// Final relative residual.
    pub fn residual(&self) -> f64 {
        self.meta.residual
    }

    pub fn sweeps(&self) -> usize {
        self.meta.sweeps
    }

    /// Interior lattice points (`z ∈ K`, `|z| ≤ R`).
    pub fn interior_points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        self.interior.iter().map(|&f| self.coords(f))
    }

    pub fn is_interior(&self, z: &[i64]) -> bool {
        self.meta.cone.contains_unchecked(&to_f64(z)) && norm(&to_f64(z)) <= self.meta.window_radius
    }

    /// `V̂(z)`, or `None` when `z` lies outside the stored box.
    pub fn value(&self, z: &[i64]) -> Option<f64> {
        self.flat(z).map(|f| self.values[f])
    }

    /// `V̂(to) / V̂(from)`.
    pub fn v_ratio(&self, from: &[i64], to: &[i64]) -> Result<f64> {
        let vf = self
            .value(from)
            .ok_or_else(|| Error::WindowExhausted(from.to_vec()))?;
        if !(vf > 0.0) {
            return Err(Error::invalid(format!("V vanishes at {from:?}")));
        }
        if !self.meta.cone.contains_unchecked(&to_f64(to)) {
            return Ok(0.0);
        }
        let vt = self
            .value(to)
            .ok_or_else(|| Error::WindowExhausted(to.to_vec()))?;
        Ok(vt / vf)
    }

    /// Transition probabilities of the `V`-transformed walk from `z`,
    /// aligned with [`HarmonicTable::atoms`]. Errors when `z` is not an
    /// interior point.
    pub fn kernel_row(&self, z: &[i64]) -> Result<Vec<f64>> {
        if !self.is_interior(z) {
            return Err(Error::WindowExhausted(z.to_vec()));
        }
        let vz = self.value(z).unwrap();
        if !(vz > 0.0) {
            return Err(Error::invalid(format!("V vanishes at {z:?}")));
        }
        let mut w = vec![0i64; self.dim];
        Ok(self
            .atoms
            .iter()
            .map(|(a, p)| {
                for i in 0..self.dim {
                    w[i] = z[i] + a[i];
                }
                p * self.value(&w).unwrap_or(0.0) / vz
            })
            .collect())
    }

    pub fn atoms(&self) -> &[(Vec<i64>, f64)] {
        &self.atoms
    }

    /// Largest relative deviation of `V̂` from `u` over interior points
    /// with `|z| ≤ r`.
    pub fn max_relative_error_vs_u(&self, r: f64) -> f64 {
        self.interior
            .iter()
            .map(|&f| {
                let z = to_f64(&self.coords(f));
                if norm(&z) > r {
                    return 0.0;
                }
                let u = self.meta.anchor_scale * self.meta.cone.u_unchecked(&z);
                ((self.values[f] - u) / u).abs()
            })
            .fold(0.0, f64::max)
    }

    fn stencil(&self) -> Stencil {
        let mut offsets = Vec::with_capacity(self.interior.len() + 1);
        let mut neighbours = Vec::with_capacity(self.interior.len() * self.atoms.len());
        offsets.push(0);
        let mut w = vec![0i64; self.dim];
        for &f in &self.interior {
            let z = self.coords(f);
            for (a, p) in &self.atoms {
                for i in 0..self.dim {
                    w[i] = z[i] + a[i];
                }
                let g = self.flat(&w).expect("margin covers every step");
                neighbours.push((g, *p));
            }
            offsets.push(neighbours.len());
        }
        Stencil {
            offsets,
            neighbours,
        }
    }

    /// `T V̂` on interior cells, in interior order.
    fn apply(&self, st: &Stencil) -> Vec<f64> {
        let parts = exec::map_indexed(self.interior.len().div_ceil(SWEEP_CHUNK), |c| {
            let start = c * SWEEP_CHUNK;
            let end = (start + SWEEP_CHUNK).min(self.interior.len());
            (start..end)
                .map(|i| {
                    st.neighbours[st.offsets[i]..st.offsets[i + 1]]
                        .iter()
                        .map(|&(g, p)| p * self.values[g])
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>()
        });
        parts.concat()
    }

    fn relative_residual(&self, tv: &[f64]) -> f64 {
        let mut abs = 0.0f64;
        let mut scale = 0.0f64;
        for (i, &f) in self.interior.iter().enumerate() {
            abs = abs.max((tv[i] - self.values[f]).abs());
            scale = scale.max(self.values[f].abs());
        }
        if scale > 0.0 {
            abs / scale
        } else {
            f64::INFINITY
        }
    }

    /// Recomputes the relative harmonicity residual from the stored values.
    pub fn check_residual(&self) -> f64 {
        let st = self.stencil();
        let tv = self.apply(&st);
        self.relative_residual(&tv)
    }

    /// Writes `coord_1..coord_d,value` for every cone point of the box and a
    /// JSON sidecar next to it.
    pub fn write(&self, csv: &Path) -> Result<PathBuf> {
        let mut w = BufWriter::new(fs::File::create(csv)?);
        let header: Vec<String> = (1..=self.dim).map(|i| format!("coord_{i}")).collect();
        writeln!(w, "{},value", header.join(","))?;
        for (f, &v) in self.values.iter().enumerate() {
            let z = self.coords(f);
            if self.meta.cone.contains_unchecked(&to_f64(&z)) {
                let coords: Vec<String> = z.iter().map(|c| c.to_string()).collect();
                writeln!(w, "{},{v:e}", coords.join(","))?;
            }
        }
        w.flush()?;
        let side = sidecar_path(csv);
        fs::write(&side, serde_json::to_string_pretty(&self.meta)? + "\n")?;
        Ok(side)
    }

    /// Reads a table written by [`HarmonicTable::write`].
    pub fn read(csv: &Path, dist: &StepDistribution) -> Result<HarmonicTable> {
        let meta: TableMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(csv))?)?;
        let mut table = empty_table(&meta.cone, dist, meta.window_radius, meta.anchor_scale)?;
        if meta.margin != table.meta.margin {
            return Err(Error::invalid(format!(
                "table margin {} does not match the step law (needs {})",
                meta.margin, table.meta.margin
            )));
        }
        let text = fs::read_to_string(csv)?;
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != table.dim + 1 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields",
                    ln + 1,
                    table.dim + 1
                )));
            }
            let z: Vec<i64> = fields[..table.dim]
                .iter()
                .map(|s| s.trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            let v: f64 = fields[table.dim]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            let f = table.flat(&z).ok_or_else(|| {
                Error::Parse(format!("line {}: point outside the window", ln + 1))
            })?;
            table.values[f] = v;
        }
        table.meta = meta;
        Ok(table)
    }
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn to_f64(z: &[i64]) -> Vec<f64> {
    z.iter().map(|&v| v as f64).collect()
}

/// Box, interior list and far-field data; interior values zero.
fn empty_table(
    cone: &ConeSpec,
    dist: &StepDistribution,
    window_radius: f64,
    anchor_scale: f64,
) -> Result<HarmonicTable> {
    if dist.dim() != cone.dimension() {
        return Err(Error::invalid("step law and cone dimensions differ"));
    }
    if !(window_radius >= 1.0) {
        return Err(Error::invalid(format!(
            "window radius must be at least 1, got {window_radius}"
        )));
    }
    let atoms = dist.lattice_atoms()?;
    let dim = cone.dimension();
    let margin = atoms
        .iter()
        .flat_map(|(a, _)| a.iter().map(|c| c.abs()))
        .max()
        .unwrap_or(0)
        .max(1);
    let reach = window_radius.floor() as i64 + margin;
    let side = (2 * reach + 1) as usize;
    let cells = (side as f64).powi(dim as i32);
    if cells > TABLE_LIMIT as f64 {
        return Err(Error::WindowOverflow {
            needed: cells as u128,
            limit: TABLE_LIMIT as u128,
        });
    }
    let mut table = HarmonicTable {
        meta: TableMeta {
            cone: *cone,
            steps: dist.label().to_string(),
            window_radius,
            margin,
            residual: f64::NAN,
            tol: f64::NAN,
            sweeps: 0,
            anchor_scale,
        },
        dim,
        lo: -reach,
        side,
        values: vec![0.0; cells as usize],
        interior: Vec::new(),
        atoms,
    };
    for f in 0..table.values.len() {
        let z = to_f64(&table.coords(f));
        if cone.contains_unchecked(&z) {
            if norm(&z) <= window_radius {
                table.interior.push(f);
            } else {
                table.values[f] = anchor_scale * cone.u_unchecked(&z);
            }
        }
    }
    Ok(table)
}

/// Solves for `V̂` on the window `|z| ≤ R` with far-field data `u`.
pub fn build_v_exact(
    cone: &ConeSpec,
    dist: &StepDistribution,
    opts: &HarmonicOptions,
) -> Result<HarmonicTable> {
    if !(opts.window_radius >= 10.0) {
        return Err(Error::invalid(format!(
            "window radius must be at least 10 lattice units, got {}",
            opts.window_radius
        )));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::invalid("damping must lie in (0, 1]"));
    }
    let mut table = empty_table(cone, dist, opts.window_radius, opts.anchor_scale)?;
    if table.interior.is_empty() {
        return Err(Error::invalid("window contains no interior lattice points"));
    }
    if opts.initial == InitialGuess::Anchor {
        for &f in &table.interior {
            table.values[f] = opts.anchor_scale * cone.u_unchecked(&to_f64(&table.coords(f)));
        }
    }
    let st = table.stencil();
    let w = opts.damping;
    let mut sweeps = 0;
    loop {
        let tv = table.apply(&st);
        let residual = table.relative_residual(&tv);
        if residual <= opts.tol {
            table.meta.residual = residual;
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(Error::NonConvergence { sweeps, residual });
        }
        for (i, &f) in table.interior.iter().enumerate() {
            table.values[f] = (1.0 - w) * table.values[f] + w * tv[i];
        }
        sweeps += 1;
    }
    table.meta.tol = opts.tol;
    table.meta.sweeps = sweeps;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VEstimate {
    pub x: Point,
    pub n: usize,
    pub replicas: u64,
    pub value: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `E[u(x + S(n)); τ_x > n]`, which tends to `V(x)`.
pub fn estimate_v_mc(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<VEstimate> {
    check_start(cone, dist, x)?;
    if replicas == 0 {
        return Err(Error::invalid("need at least one replica"));
    }
    let total = replicas as usize;
    let sums = exec::map_indexed(total.div_ceil(MC_CHUNK), |c| {
        let start = c * MC_CHUNK;
        let end = (start + MC_CHUNK).min(total);
        let mut buf = Vec::new();
        let (mut s1, mut s2) = (0.0, 0.0);
        for r in start..end {
            let mut rng = rng::stream(seed, r as u64);
            let exit = run_walk(cone, dist, x, n, &mut rng, &mut buf, false);
            if exit.is_none() {
                let end = if n == 0 {
                    &x[..]
                } else {
                    &buf[buf.len() - x.dim()..]
                };
                let u = cone.u_unchecked(end);
                s1 += u;
                s2 += u * u;
            }
        }
        (s1, s2)
    });
    let (s1, s2) = sums
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let m = replicas as f64;
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0);
    Ok(VEstimate {
        x: x.clone(),
        n,
        replicas,
        value: mean,
        std_error: (var / m).sqrt(),
    })
}
