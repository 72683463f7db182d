//! Exact dynamic programming for lattice walks killed on leaving a cone.
//!
//! A walk is first reduced to one or more independent integer chains:
//!
//! * product laws in a product cone (half-line, half-space, orthant) split
//!   into one chain per coordinate,
//! * walks in a type-A Weyl chamber may be followed through their gaps
//!   `x_{i+1} - x_i` when only survival matters,
//! * anything else is kept as a single chain in the original coordinates.
//!
//! Positions of a chain at time `k` are indexed by `j ∈ ℕ^m` through
//! `z = start + k·base + spacing ∘ j`, where `base` is the coordinatewise
//! minimum of the steps and `spacing` their coordinatewise gcd. Every step
//! then moves `j` by a nonnegative offset, and the time-`k` reachable set
//! lives in the box `[0, k·range]`. No mass is ever discarded except by
//! killing, so all quantities below are exact up to floating-point rounding.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::cone::{ConeKind, ConeSpec};
use crate::error::{Error, Result};
use crate::increments::StepDistribution;
use crate::point::Point;
use crate::walk::simulate::{check_start, SurvivalEstimate, SurvivalMethod};

/// Bound on `|support| · window` for forward recursions.
pub const FORWARD_LIMIT: u128 = 100_000_000;
/// Bound on the total number of stored cells of a backward table.
pub const GUIDE_LIMIT: u128 = 60_000_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Region {
    /// Every coordinate strictly positive.
    Positive,
    /// No constraint.
    Free,
    /// Original coordinates inside the cone.
    Cone(ConeSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ChainStep {
    pub offset: Vec<usize>,
    pub prob: f64,
    /// Original atoms mapping to this step, with conditional probabilities.
    pub preimages: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Chain {
    pub dim: usize,
    pub base: Vec<i64>,
    pub spacing: Vec<i64>,
    pub range: Vec<usize>,
    pub steps: Vec<ChainStep>,
    pub start: Vec<i64>,
    pub region: Region,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Chain {
    /// `steps`: reduced atom, probability, original atom index.
    fn new(steps: Vec<(Vec<i64>, f64, usize)>, start: Vec<i64>, region: Region) -> Chain {
        let dim = start.len();
        let mut grouped: BTreeMap<Vec<i64>, (f64, Vec<(usize, f64)>)> = BTreeMap::new();
        for (a, p, idx) in steps {
            let e = grouped.entry(a).or_insert((0.0, Vec::new()));
            e.0 += p;
            e.1.push((idx, p));
        }
        let base: Vec<i64> = (0..dim)
            .map(|i| grouped.keys().map(|a| a[i]).min().unwrap())
            .collect();
        let spacing: Vec<i64> = (0..dim)
            .map(|i| {
                let g = grouped.keys().fold(0, |g, a| gcd(g, a[i] - base[i]));
                if g == 0 {
                    1
                } else {
                    g
                }
            })
            .collect();
        let range: Vec<usize> = (0..dim)
            .map(|i| {
                let max = grouped.keys().map(|a| a[i]).max().unwrap();
                ((max - base[i]) / spacing[i]) as usize
            })
            .collect();
        let steps = grouped
            .into_iter()
            .map(|(a, (p, pre))| ChainStep {
                offset: (0..dim)
                    .map(|i| ((a[i] - base[i]) / spacing[i]) as usize)
                    .collect(),
                prob: p,
                preimages: pre.into_iter().map(|(idx, q)| (idx, q / p)).collect(),
            })
            .collect();
        Chain {
            dim,
            base,
            spacing,
            range,
            steps,
            start,
            region,
        }
    }

    #[inline]
    fn coord(&self, k: usize, i: usize, j: usize) -> i64 {
        self.start[i] + k as i64 * self.base[i] + self.spacing[i] * j as i64
    }

    /// Index of position `z` at time `k`, if it is on the time-`k` lattice.
    fn index_of(&self, k: usize, z: &[i64]) -> Option<Vec<usize>> {
        (0..self.dim)
            .map(|i| {
                let diff = z[i] - self.start[i] - k as i64 * self.base[i];
                if diff < 0 || diff % self.spacing[i] != 0 {
                    return None;
                }
                let j = (diff / self.spacing[i]) as usize;
                (j <= k * self.range[i]).then_some(j)
            })
            .collect()
    }

    /// Smallest index with a positive coordinate `i` at time `k`.
    fn positive_from(&self, k: usize, i: usize) -> usize {
        let c = self.start[i] + k as i64 * self.base[i];
        if c > 0 {
            0
        } else {
            ((-c) / self.spacing[i] + 1) as usize
        }
    }

    fn in_region(&self, k: usize, j: &[usize], scratch: &mut Vec<f64>) -> bool {
        match &self.region {
            Region::Free => true,
            Region::Positive => (0..self.dim).all(|i| self.coord(k, i, j[i]) > 0),
            Region::Cone(cone) => {
                scratch.clear();
                scratch.extend((0..self.dim).map(|i| self.coord(k, i, j[i]) as f64));
                cone.contains_unchecked(scratch)
            }
        }
    }

    fn window_cells(&self, n: usize) -> u128 {
        self.range
            .iter()
            .map(|&r| (n as u128) * (r as u128) + 1)
            .product::<u128>()
    }

    fn check_forward(&self, n: usize) -> Result<()> {
        let needed = self.window_cells(n) * self.steps.len() as u128;
        if needed > FORWARD_LIMIT {
            return Err(Error::WindowOverflow {
                needed,
                limit: FORWARD_LIMIT,
            });
        }
        Ok(())
    }

    /// Forward recursion of the killed occupation measure. `visit(k, grid)`
    /// sees the sub-probability measure of `{τ > k, position}` for every
    /// `k = 0..=n`.
    fn forward(&self, n: usize, mut visit: impl FnMut(usize, &Grid)) -> Result<Grid> {
        self.check_forward(n)?;
        let mut grid = Grid::point(vec![0; self.dim], 1.0);
        let mut scratch = Vec::new();
        if !self.in_region(0, &grid.lo, &mut scratch) {
            grid = Grid::empty(self.dim);
        }
        visit(0, &grid);
        for k in 1..=n {
            if grid.is_empty() {
                visit(k, &grid);
                continue;
            }
            let mut next = grid.spread(&self.steps, &self.range);
            next.kill(|j| self.in_region(k, j, &mut scratch));
            next.shrink();
            grid = next;
            visit(k, &grid);
        }
        Ok(grid)
    }
}

/// Dense box of cells `lo .. lo + shape` in index space.
#[derive(Debug, Clone)]
pub(crate) struct Grid {
    pub lo: Vec<usize>,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Grid {
    fn empty(dim: usize) -> Grid {
        Grid {
            lo: vec![0; dim],
            shape: vec![0; dim],
            data: Vec::new(),
        }
    }

    fn point(j: Vec<usize>, v: f64) -> Grid {
        let dim = j.len();
        Grid {
            lo: j,
            shape: vec![1; dim],
            data: vec![v],
        }
    }

    fn zeros(lo: Vec<usize>, shape: Vec<usize>) -> Grid {
        let size = shape.iter().product();
        Grid {
            lo,
            shape,
            data: vec![0.0; size],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn strides(shape: &[usize]) -> Vec<usize> {
        let mut s = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * shape[i + 1];
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn get(&self, j: &[usize]) -> f64 {
        let strides = Grid::strides(&self.shape);
        let mut flat = 0;
        for i in 0..j.len() {
            if j[i] < self.lo[i] || j[i] >= self.lo[i] + self.shape[i] {
                return 0.0;
            }
            flat += (j[i] - self.lo[i]) * strides[i];
        }
        self.data[flat]
    }

    /// Calls `f(j, value)` for every cell.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], f64)) {
        if self.is_empty() {
            return;
        }
        let mut j = self.lo.clone();
        for &v in &self.data {
            f(&j, v);
            for i in (0..j.len()).rev() {
                j[i] += 1;
                if j[i] < self.lo[i] + self.shape[i] {
                    break;
                }
                j[i] = self.lo[i];
            }
        }
    }

    /// Convolution with the step law (no killing).
    fn spread(&self, steps: &[ChainStep], range: &[usize]) -> Grid {
        let shape: Vec<usize> = self.shape.iter().zip(range).map(|(s, r)| s + r).collect();
        let mut next = Grid::zeros(self.lo.clone(), shape);
        let strides = Grid::strides(&next.shape);
        let offsets: Vec<(usize, f64)> = steps
            .iter()
            .map(|s| {
                (
                    s.offset.iter().zip(&strides).map(|(o, st)| o * st).sum(),
                    s.prob,
                )
            })
            .collect();
        let dim = self.shape.len();
        let mut rel = vec![0usize; dim];
        for &v in &self.data {
            if v != 0.0 {
                let base: usize = rel.iter().zip(&strides).map(|(r, s)| r * s).sum();
                for &(off, p) in &offsets {
                    next.data[base + off] += p * v;
                }
            }
            for i in (0..dim).rev() {
                rel[i] += 1;
                if rel[i] < self.shape[i] {
                    break;
                }
                rel[i] = 0;
            }
        }
        next
    }

    fn kill(&mut self, mut keep: impl FnMut(&[usize]) -> bool) {
        if self.is_empty() {
            return;
        }
        let mut j = self.lo.clone();
        for v in self.data.iter_mut() {
            if *v != 0.0 && !keep(&j) {
                *v = 0.0;
            }
            for i in (0..j.len()).rev() {
                j[i] += 1;
                if j[i] < self.lo[i] + self.shape[i] {
                    break;
                }
                j[i] = self.lo[i];
            }
        }
    }

    /// Shrinks to the bounding box of the nonzero cells.
    fn shrink(&mut self) {
        let dim = self.shape.len();
        let mut min = vec![usize::MAX; dim];
        let mut max = vec![0usize; dim];
        let mut any = false;
        self.for_each(|j, v| {
            if v != 0.0 {
                any = true;
                for i in 0..dim {
                    min[i] = min[i].min(j[i]);
                    max[i] = max[i].max(j[i]);
                }
            }
        });
        if !any {
            *self = Grid::empty(dim);
            return;
        }
        if min == self.lo && (0..dim).all(|i| max[i] + 1 == self.lo[i] + self.shape[i]) {
            return;
        }
        let shape: Vec<usize> = (0..dim).map(|i| max[i] - min[i] + 1).collect();
        let mut out = Grid::zeros(min.clone(), shape);
        let out_strides = Grid::strides(&out.shape);
        self.for_each(|j, v| {
            if v != 0.0 {
                let flat: usize = (0..dim).map(|i| (j[i] - min[i]) * out_strides[i]).sum();
                out.data[flat] = v;
            }
        });
        *self = out;
    }
}

/// What the reduction must preserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Only the event `{τ > n}` matters; chamber gaps may be used.
    Survival,
    /// Endpoints matter; the reduction must be invertible.
    Endpoint,
}

#[derive(Debug, Clone)]
enum Layout {
    /// Chain `i` carries coordinate `i`.
    Product(Vec<Chain>),
    /// One chain over the gaps of a type-A chamber.
    Gaps(Chain),
    Full(Chain),
}

/// A lattice walk started at an integer point, reduced for exact recursions.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    cone: ConeSpec,
    atoms: Vec<(Vec<i64>, f64)>,
    start: Vec<i64>,
    layout: Layout,
}

/// Coordinate marginals if `atoms` is a product law.
fn product_marginals(atoms: &[(Vec<i64>, f64)], d: usize) -> Option<Vec<Vec<(i64, f64)>>> {
    let margins: Vec<Vec<(i64, f64)>> = (0..d)
        .map(|i| {
            let mut m: BTreeMap<i64, f64> = BTreeMap::new();
            for (a, p) in atoms {
                *m.entry(a[i]).or_insert(0.0) += p;
            }
            m.into_iter().collect()
        })
        .collect();
    let count: usize = margins.iter().map(|m| m.len()).product();
    if count != atoms.len() {
        return None;
    }
    for (a, p) in atoms {
        let q: f64 = (0..d)
            .map(|i| margins[i].iter().find(|(v, _)| *v == a[i]).unwrap().1)
            .product();
        if (q - p).abs() > 1e-14 * p.max(q) {
            return None;
        }
    }
    Some(margins)
}

impl LatticeModel {
    pub fn new(
        cone: &ConeSpec,
        dist: &StepDistribution,
        x: &Point,
        purpose: Purpose,
    ) -> Result<LatticeModel> {
        check_start(cone, dist, x)?;
        let atoms = dist.lattice_atoms()?;
        let start = x
            .to_lattice()
            .ok_or_else(|| Error::invalid(format!("start {x:?} is not a lattice point")))?;
        let d = cone.dimension();

        let constrained: Option<Vec<bool>> = match cone.kind() {
            ConeKind::HalfLine => Some(vec![true]),
            ConeKind::HalfSpace(d) => Some((0..d).map(|i| i + 1 == d).collect()),
            ConeKind::Orthant(d) => Some(vec![true; d]),
            _ => None,
        };
        let layout = match (constrained, product_marginals(&atoms, d)) {
            (Some(flags), Some(margins)) => Layout::Product(
                margins
                    .into_iter()
                    .zip(flags)
                    .enumerate()
                    .map(|(i, (m, c))| {
                        let steps = m.into_iter().map(|(v, p)| (vec![v], p, 0)).collect();
                        let region = if c { Region::Positive } else { Region::Free };
                        Chain::new(steps, vec![start[i]], region)
                    })
                    .collect(),
            ),
            _ if matches!(cone.kind(), ConeKind::WeylA(_)) && purpose == Purpose::Survival => {
                let gaps = |v: &[i64]| -> Vec<i64> { v.windows(2).map(|w| w[1] - w[0]).collect() };
                let steps = atoms
                    .iter()
                    .enumerate()
                    .map(|(idx, (a, p))| (gaps(a), *p, idx))
                    .collect();
                Layout::Gaps(Chain::new(steps, gaps(&start), Region::Positive))
            }
            _ => {
                let steps = atoms
                    .iter()
                    .enumerate()
                    .map(|(idx, (a, p))| (a.clone(), *p, idx))
                    .collect();
                Layout::Full(Chain::new(steps, start.clone(), Region::Cone(*cone)))
            }
        };
        Ok(LatticeModel {
            cone: *cone,
            atoms,
            start,
            layout,
        })
    }

    pub fn cone(&self) -> &ConeSpec {
        &self.cone
    }

    pub fn start(&self) -> &[i64] {
        &self.start
    }

    /// Coordinatewise spacing of the time-`n` lattice `x + n·base + spacing·ℕ`.
    pub fn coordinate_spacing(&self) -> Vec<i64> {
        let d = self.start.len();
        (0..d)
            .map(|i| {
                let lo = self.atoms.iter().map(|(a, _)| a[i]).min().unwrap_or(0);
                let g = self.atoms.iter().fold(0, |g, (a, _)| gcd(g, a[i] - lo));
                g.max(1)
            })
            .collect()
    }

    /// Short name of the reduction in use.
    pub fn layout_name(&self) -> &'static str {
        match self.layout {
            Layout::Product(_) => "product",
            Layout::Gaps(_) => "chamber-gaps",
            Layout::Full(_) => "full",
        }
    }

    fn chains(&self) -> Vec<&Chain> {
        match &self.layout {
            Layout::Product(cs) => cs.iter().collect(),
            Layout::Gaps(c) | Layout::Full(c) => vec![c],
        }
    }

    /// `P(τ_x > k)` for `k = 0..=n`.
    pub fn survival_curve(&self, n: usize) -> Result<Vec<f64>> {
        let mut out = vec![1.0; n + 1];
        for chain in self.chains() {
            if chain.region == Region::Free {
                continue;
            }
            chain.forward(n, |k, g| out[k] *= g.total())?;
        }
        Ok(out)
    }

    /// `P(x + S(n) = y, τ_x > n)`.
    pub fn point_probability(&self, y: &[i64], n: usize) -> Result<f64> {
        if y.len() != self.start.len() {
            return Err(Error::invalid("end point has the wrong dimension"));
        }
        match &self.layout {
            Layout::Gaps(_) => Err(Error::invalid(
                "point probabilities need an endpoint-preserving model",
            )),
            Layout::Product(cs) => {
                let mut p = 1.0;
                for (i, c) in cs.iter().enumerate() {
                    p *= match c.index_of(n, &y[i..=i]) {
                        None => 0.0,
                        Some(j) => c.forward(n, |_, _| {})?.get(&j),
                    };
                }
                Ok(p)
            }
            Layout::Full(c) => match c.index_of(n, y) {
                None => Ok(0.0),
                Some(j) => Ok(c.forward(n, |_, _| {})?.get(&j)),
            },
        }
    }

    /// Sub-probability law of `x + S(n)` on `{τ_x > n}`, sorted by point.
    pub fn endpoint_law(&self, n: usize) -> Result<Vec<(Vec<i64>, f64)>> {
        let per_chain: Vec<Vec<(Vec<i64>, f64)>> = match &self.layout {
            Layout::Gaps(_) => {
                return Err(Error::invalid(
                    "endpoint laws need an endpoint-preserving model",
                ))
            }
            Layout::Product(cs) => cs
                .iter()
                .map(|c| chain_endpoint_law(c, n))
                .collect::<Result<_>>()?,
            Layout::Full(c) => vec![chain_endpoint_law(c, n)?],
        };
        let mut law: Vec<(Vec<i64>, f64)> = vec![(Vec::new(), 1.0)];
        for part in per_chain {
            law = law
                .into_iter()
                .flat_map(|(z, p)| {
                    part.iter().map(move |(w, q)| {
                        let mut v = z.clone();
                        v.extend_from_slice(w);
                        (v, p * q)
                    })
                })
                .filter(|(_, p)| *p > 0.0)
                .collect();
        }
        law.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(law)
    }

    /// Same walk with increments `-X`, started at `y`.
    pub fn reversed(
        cone: &ConeSpec,
        dist: &StepDistribution,
        y: &Point,
        purpose: Purpose,
    ) -> Result<LatticeModel> {
        LatticeModel::new(cone, &dist.reversed(), y, purpose)
    }
}

fn chain_endpoint_law(c: &Chain, n: usize) -> Result<Vec<(Vec<i64>, f64)>> {
    let grid = c.forward(n, |_, _| {})?;
    let mut out = Vec::new();
    grid.for_each(|j, v| {
        if v > 0.0 {
            out.push(((0..c.dim).map(|i| c.coord(n, i, j[i])).collect(), v));
        }
    });
    Ok(out)
}

/// Exact `P(τ_x > n)` for a lattice walk.
pub fn survival_probability_exact(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
) -> Result<SurvivalEstimate> {
    let model = LatticeModel::new(cone, dist, x, Purpose::Survival)?;
    let curve = model.survival_curve(n)?;
    Ok(SurvivalEstimate {
        n,
        x: x.clone(),
        probability: curve[n],
        std_error: 0.0,
        replicas: 0,
        method: SurvivalMethod::ExactDp,
    })
}

/// Exact survival curve `P(τ_x > k)`, `k = 0..=n`.
pub fn survival_curve_exact(
    cone: &ConeSpec,
    dist: &StepDistribution,
    x: &Point,
    n: usize,
) -> Result<Vec<f64>> {
    LatticeModel::new(cone, dist, x, Purpose::Survival)?.survival_curve(n)
}

// ---------------------------------------------------------------------------
// Backward tables for exact conditioned sampling.

#[derive(Debug, Clone, PartialEq)]
enum Terminal {
    Survive,
    Hit(Vec<usize>),
}

#[derive(Debug)]
struct Layer {
    lo: Vec<usize>,
    hi: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<f64>,
}

/// `H_k(j)`: probability that the chain at `(k, j)` meets the terminal
/// condition at time `n` while staying in the region at times `k..=n`.
#[derive(Debug)]
struct Guide {
    layers: Vec<Layer>,
    /// One-dimensional survival tables: cells above the stored box cannot
    /// exit before `n` and have `H = 1`.
    above_is_one: bool,
    reach: Vec<usize>,
}

impl Guide {
    fn layer_bounds(
        chain: &Chain,
        n: usize,
        k: usize,
        terminal: &Terminal,
    ) -> (Vec<usize>, Vec<usize>, bool) {
        let dim = chain.dim;
        let mut lo = vec![0usize; dim];
        let mut hi: Vec<usize> = (0..dim).map(|i| k * chain.range[i]).collect();
        let mut above_is_one = false;
        if let Terminal::Hit(jy) = terminal {
            for i in 0..dim {
                lo[i] = lo[i].max(jy[i].saturating_sub((n - k) * chain.range[i]));
                hi[i] = hi[i].min(jy[i]);
            }
        }
        if chain.region == Region::Positive {
            for i in 0..dim {
                lo[i] = lo[i].max(chain.positive_from(k, i));
            }
            if dim == 1 && *terminal == Terminal::Survive {
                // Lowest position reachable from index j by time n is
                // coord(k, j) + (n - k)·base.
                above_is_one = true;
                let c = chain.start[0] + k as i64 * chain.base[0] + (n - k) as i64 * chain.base[0];
                let first_safe = if c > 0 {
                    0
                } else {
                    ((-c) / chain.spacing[0] + 1) as usize
                };
                hi[0] = hi[0].min(first_safe.saturating_sub(1));
                if first_safe == 0 {
                    // Every cell is safe: store an empty box.
                    lo[0] = 1;
                    hi[0] = 0;
                }
            }
        }
        (lo, hi, above_is_one)
    }

    fn build(chain: &Chain, n: usize, terminal: Terminal) -> Result<Guide> {
        let bounds: Vec<(Vec<usize>, Vec<usize>, bool)> = (0..=n)
            .map(|k| Guide::layer_bounds(chain, n, k, &terminal))
            .collect();
        let needed: u128 = bounds
            .iter()
            .map(|(lo, hi, _)| {
                lo.iter()
                    .zip(hi)
                    .map(|(l, h)| if h >= l { (h - l + 1) as u128 } else { 0 })
                    .product::<u128>()
            })
            .sum();
        if needed > GUIDE_LIMIT {
            return Err(Error::WindowOverflow {
                needed,
                limit: GUIDE_LIMIT,
            });
        }
        let above_is_one = bounds[0].2;
        let reach = chain.range.clone();
        let mut guide = Guide {
            layers: Vec::with_capacity(n + 1),
            above_is_one,
            reach,
        };
        let mut layers: Vec<Option<Layer>> = (0..=n).map(|_| None).collect();
        let mut scratch = Vec::new();
        for k in (0..=n).rev() {
            let (lo, hi, _) = &bounds[k];
            let shape: Vec<usize> = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| if h >= l { h - l + 1 } else { 0 })
                .collect();
            let strides = Grid::strides(&shape);
            let size: usize = shape.iter().product();
            let mut data = vec![0.0; size];
            if size > 0 {
                let mut j = lo.clone();
                let mut target = vec![0usize; chain.dim];
                for v in data.iter_mut() {
                    if chain.in_region(k, &j, &mut scratch) {
                        *v = if k == n {
                            match &terminal {
                                Terminal::Survive => 1.0,
                                Terminal::Hit(jy) => (j == *jy) as u8 as f64,
                            }
                        } else {
                            let next = layers[k + 1].as_ref().unwrap();
                            chain
                                .steps
                                .iter()
                                .map(|s| {
                                    for i in 0..chain.dim {
                                        target[i] = j[i] + s.offset[i];
                                    }
                                    s.prob * guide.lookup(next, k + 1, &target)
                                })
                                .sum()
                        };
                    }
                    for i in (0..j.len()).rev() {
                        j[i] += 1;
                        if j[i] <= hi[i] {
                            break;
                        }
                        j[i] = lo[i];
                    }
                }
            }
            layers[k] = Some(Layer {
                lo: lo.clone(),
                hi: hi.clone(),
                strides,
                data,
            });
        }
        guide.layers = layers.into_iter().map(Option::unwrap).collect();
        Ok(guide)
    }

    #[inline]
    fn lookup(&self, layer: &Layer, k: usize, j: &[usize]) -> f64 {
        let mut flat = 0;
        for i in 0..j.len() {
            if j[i] < layer.lo[i] {
                return 0.0;
            }
            if j[i] > layer.hi[i] {
                return if self.above_is_one && j[i] <= k * self.reach[i] {
                    1.0
                } else {
                    0.0
                };
            }
            flat += (j[i] - layer.lo[i]) * layer.strides[i];
        }
        layer.data[flat]
    }

    fn value(&self, k: usize, j: &[usize]) -> f64 {
        self.lookup(&self.layers[k], k, j)
    }

    /// Draws the next step index from `(k, j)`.
    #[inline]
    fn next_step<R: Rng + ?Sized>(
        &self,
        chain: &Chain,
        k: usize,
        j: &[usize],
        target: &mut [usize],
        weights: &mut Vec<f64>,
        rng: &mut R,
    ) -> usize {
        let layer = &self.layers[k + 1];
        weights.clear();
        let mut total = 0.0;
        for s in &chain.steps {
            for i in 0..chain.dim {
                target[i] = j[i] + s.offset[i];
            }
            let w = s.prob * self.lookup(layer, k + 1, target);
            total += w;
            weights.push(total);
        }
        let u = rng.random::<f64>() * total;
        weights
            .iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| weights.iter().rposition(|&c| c > 0.0).unwrap_or(0))
    }
}

struct WalkState {
    pos: Vec<f64>,
    j: Vec<usize>,
    target: Vec<usize>,
    weights: Vec<f64>,
}

/// Exact sampler for a lattice walk conditioned on `{τ_x > n}` or on
/// `{τ_x > n, x + S(n) = y}`, driven by backward tables of the
/// conditioning probability (a finite-horizon Doob transform).
#[derive(Debug)]
pub struct GuidedSampler {
    model: LatticeModel,
    n: usize,
    guides: Vec<Arc<Guide>>,
    probability: f64,
}

impl GuidedSampler {
    pub fn meander(model: LatticeModel, n: usize) -> Result<GuidedSampler> {
        GuidedSampler::build(model, n, None)
    }

    pub fn bridge(model: LatticeModel, y: &[i64], n: usize) -> Result<GuidedSampler> {
        if matches!(model.layout, Layout::Gaps(_)) {
            return Err(Error::invalid("bridges need an endpoint-preserving model"));
        }
        GuidedSampler::build(model, n, Some(y))
    }

    fn build(model: LatticeModel, n: usize, y: Option<&[i64]>) -> Result<GuidedSampler> {
        let chains = model.chains();
        let mut terminals = Vec::new();
        let mut offset = 0;
        for c in &chains {
            let t = match y {
                None => Terminal::Survive,
                Some(y) => {
                    let yc = &y[offset..offset + c.dim];
                    match c.index_of(n, yc) {
                        Some(j) => Terminal::Hit(j),
                        None => {
                            return Err(Error::Unreachable(format!(
                                "{y:?} cannot be reached in {n} steps (lattice/parity)"
                            )))
                        }
                    }
                }
            };
            offset += c.dim;
            terminals.push(t);
        }
        let mut guides: Vec<Arc<Guide>> = Vec::new();
        for (i, c) in chains.iter().enumerate() {
            let shared = (0..i).find(|&m| chains[m] == *c && terminals[m] == terminals[i]);
            let g = match shared {
                Some(m) => guides[m].clone(),
                None => Arc::new(Guide::build(c, n, terminals[i].clone())?),
            };
            guides.push(g);
        }
        let probability: f64 = guides
            .iter()
            .zip(&chains)
            .map(|(g, c)| g.value(0, &vec![0; c.dim]))
            .product();
        if probability <= 0.0 {
            return Err(match y {
                Some(y) => Error::Unreachable(format!(
                    "{y:?} is not in D_n(x) for n = {n}: no surviving path ends there"
                )),
                None => Error::Underflow {
                    accepted: 0,
                    attempts: 0,
                    hint: "no path survives to the horizon".into(),
                },
            });
        }
        Ok(GuidedSampler {
            model,
            n,
            guides,
            probability,
        })
    }

    /// Probability of the conditioning event.
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    fn initial_state(&self) -> WalkState {
        let dim = match &self.model.layout {
            Layout::Product(chains) => chains.len(),
            Layout::Gaps(c) | Layout::Full(c) => c.dim,
        };
        WalkState {
            pos: self.model.start.iter().map(|&v| v as f64).collect(),
            j: vec![0; dim],
            target: vec![0; dim],
            weights: Vec::new(),
        }
    }

    /// One conditioned step from time `k`.
    #[inline]
    fn advance<R: Rng + ?Sized>(&self, k: usize, st: &mut WalkState, rng: &mut R) {
        match &self.model.layout {
            Layout::Product(chains) => {
                for (i, c) in chains.iter().enumerate() {
                    let s = self.guides[i].next_step(
                        c,
                        k,
                        &st.j[i..=i],
                        &mut st.target[..1],
                        &mut st.weights,
                        rng,
                    );
                    let off = c.steps[s].offset[0];
                    st.j[i] += off;
                    st.pos[i] += (c.base[0] + c.spacing[0] * off as i64) as f64;
                }
            }
            Layout::Gaps(c) | Layout::Full(c) => {
                let s = self.guides[0].next_step(c, k, &st.j, &mut st.target, &mut st.weights, rng);
                let step = &c.steps[s];
                for i in 0..c.dim {
                    st.j[i] += step.offset[i];
                }
                let atom = if step.preimages.len() == 1 {
                    step.preimages[0].0
                } else {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    step.preimages
                        .iter()
                        .find(|(_, q)| {
                            acc += q;
                            u < acc
                        })
                        .unwrap_or(step.preimages.last().unwrap())
                        .0
                };
                for (p, a) in st.pos.iter_mut().zip(&self.model.atoms[atom].0) {
                    *p += *a as f64;
                }
            }
        }
    }

    /// Draws one conditioned path into `buf` (flattened original coordinates).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<f64>) {
        buf.clear();
        buf.reserve(self.n * self.model.start.len());
        let mut st = self.initial_state();
        for k in 0..self.n {
            self.advance(k, &mut st, rng);
            buf.extend_from_slice(&st.pos);
        }
    }

    /// Draws one path per generator, all in lockstep so that each table
    /// layer is read once per batch rather than once per path. Path `i`
    /// consumes `rngs[i]` exactly as [`GuidedSampler::sample_into`] would.
    pub fn sample_batch<R: Rng>(&self, rngs: &mut [R], bufs: &mut [Vec<f64>]) {
        assert_eq!(rngs.len(), bufs.len());
        let d = self.model.start.len();
        let mut states: Vec<WalkState> = rngs.iter().map(|_| self.initial_state()).collect();
        for b in bufs.iter_mut() {
            b.clear();
            b.reserve(self.n * d);
        }
        for k in 0..self.n {
            for ((st, g), b) in states.iter_mut().zip(rngs.iter_mut()).zip(bufs.iter_mut()) {
                self.advance(k, st, g);
                b.extend_from_slice(&st.pos);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn srw_model(x: f64, purpose: Purpose) -> LatticeModel {
        LatticeModel::new(
            &ConeSpec::half_line(),
            &StepDistribution::srw(),
            &Point::new(vec![x]),
            purpose,
        )
        .unwrap()
    }

    /// Brute-force survival by enumerating all step sequences.
    fn enumerate_survival(cone: &ConeSpec, atoms: &[(Vec<i64>, f64)], x: &[i64], n: usize) -> f64 {
        fn rec(
            cone: &ConeSpec,
            atoms: &[(Vec<i64>, f64)],
            z: Vec<i64>,
            p: f64,
            left: usize,
        ) -> f64 {
            if left == 0 {
                return p;
            }
            atoms
                .iter()
                .map(|(a, q)| {
                    let w: Vec<i64> = z.iter().zip(a).map(|(u, v)| u + v).collect();
                    let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
                    if cone.contains_unchecked(&wf) {
                        rec(cone, atoms, w, p * q, left - 1)
                    } else {
                        0.0
                    }
                })
                .sum()
        }
        rec(cone, atoms, x.to_vec(), 1.0, n)
    }

    #[test]
    fn srw_survival_examples() {
        let c = srw_model(1.0, Purpose::Survival).survival_curve(3).unwrap();
        assert_eq!(c, vec![1.0, 0.5, 0.5, 0.375]);
        let c2 = srw_model(2.0, Purpose::Survival).survival_curve(1).unwrap();
        assert_eq!(c2[1], 1.0);
    }

    #[test]
    fn quadrant_one_step() {
        let cone = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let est = survival_probability_exact(
            &cone,
            &StepDistribution::rademacher(2),
            &Point::new(vec![1.0, 1.0]),
            1,
        )
        .unwrap();
        assert_eq!(est.probability, 0.25);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn reductions_match_enumeration() {
        let cases: Vec<(ConeSpec, StepDistribution, Vec<f64>)> = vec![
            (
                ConeSpec::new(ConeKind::WeylA(3)).unwrap(),
                StepDistribution::rademacher(3),
                vec![0.0, 1.0, 3.0],
            ),
            (
                ConeSpec::new(ConeKind::WeylB(2)).unwrap(),
                StepDistribution::rademacher(2),
                vec![1.0, 2.0],
            ),
            (
                ConeSpec::new(ConeKind::Orthant(2)).unwrap(),
                StepDistribution::five_point(2),
                vec![1.0, 2.0],
            ),
            (
                ConeSpec::new(ConeKind::HalfSpace(2)).unwrap(),
                StepDistribution::rademacher(2),
                vec![-3.0, 1.0],
            ),
            (
                ConeSpec::new(ConeKind::Wedge2D(2.0)).unwrap(),
                StepDistribution::rademacher(2),
                vec![1.0, 2.0],
            ),
            (
                ConeSpec::new(ConeKind::WeylA(2)).unwrap(),
                StepDistribution::five_point(2),
                vec![0.0, 2.0],
            ),
        ];
        for (cone, dist, x) in cases {
            let atoms = dist.lattice_atoms().unwrap();
            let xi: Vec<i64> = x.iter().map(|&v| v as i64).collect();
            let n = if atoms.len() > 8 { 4 } else { 7 };
            for purpose in [Purpose::Survival, Purpose::Endpoint] {
                let m = LatticeModel::new(&cone, &dist, &Point::new(x.clone()), purpose).unwrap();
                let curve = m.survival_curve(n).unwrap();
                for k in 0..=n {
                    let brute = enumerate_survival(&cone, &atoms, &xi, k);
                    assert!(
                        (curve[k] - brute).abs() < 1e-14,
                        "{cone} {} k={k}: {} vs {brute}",
                        m.layout_name(),
                        curve[k]
                    );
                }
            }
        }
    }

    #[test]
    fn endpoint_law_mass_is_survival() {
        let cone = ConeSpec::new(ConeKind::WeylA(2)).unwrap();
        let m = LatticeModel::new(
            &cone,
            &StepDistribution::rademacher(2),
            &Point::new(vec![0.0, 2.0]),
            Purpose::Endpoint,
        )
        .unwrap();
        let law = m.endpoint_law(10).unwrap();
        let total: f64 = law.iter().map(|(_, p)| p).sum();
        let surv = m.survival_curve(10).unwrap()[10];
        assert!((total - surv).abs() < 1e-14);
        for (y, p) in &law {
            assert!((m.point_probability(y, 10).unwrap() - p).abs() < 1e-15);
        }
    }

    #[test]
    fn guide_probability_matches_forward() {
        let m = srw_model(1.0, Purpose::Survival);
        let s = GuidedSampler::meander(m.clone(), 40).unwrap();
        let fwd = m.survival_curve(40).unwrap()[40];
        assert!((s.probability() - fwd).abs() < 1e-14);

        let e = srw_model(1.0, Purpose::Endpoint);
        let b = GuidedSampler::bridge(e.clone(), &[3], 20).unwrap();
        assert!((b.probability() - e.point_probability(&[3], 20).unwrap()).abs() < 1e-15);
        assert!(matches!(
            GuidedSampler::bridge(e, &[2], 20),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn overflow_guard() {
        let cone = ConeSpec::new(ConeKind::WeylB(3)).unwrap();
        let m = LatticeModel::new(
            &cone,
            &StepDistribution::rademacher(3),
            &Point::new(vec![1.0, 2.0, 3.0]),
            Purpose::Survival,
        )
        .unwrap();
        assert!(matches!(
            m.survival_curve(10_000),
            Err(Error::WindowOverflow { .. })
        ));
    }

    #[test]
    fn non_lattice_is_rejected() {
        let err = LatticeModel::new(
            &ConeSpec::half_line(),
            &StepDistribution::gaussian(1),
            &Point::new(vec![1.0]),
            Purpose::Survival,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonLattice(_)));
    }
}
