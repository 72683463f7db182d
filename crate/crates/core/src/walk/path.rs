use serde::Serialize;

use crate::error::{Error, Result};
use crate::point::{norm, Point};

/// One trajectory `x + S(1), …, x + S(len)` with its exit index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub start: Point,
    /// Flattened positions, `dim` coordinates per step.
    positions: Vec<f64>,
    dim: usize,
    /// Requested horizon.
    pub horizon: usize,
    /// First `k ≥ 1` with `x + S(k) ∉ K`, if it happened within the horizon.
    pub exit_index: Option<usize>,
}

impl PathSample {
    pub fn new(
        start: Point,
        positions: Vec<f64>,
        horizon: usize,
        exit_index: Option<usize>,
    ) -> Self {
        let dim = start.dim();
        debug_assert_eq!(positions.len() % dim.max(1), 0);
        PathSample {
            start,
            positions,
            dim,
            horizon,
            exit_index,
        }
    }

    pub fn view(&self) -> PathView<'_> {
        PathView {
            start: &self.start,
            positions: &self.positions,
            dim: self.dim,
            horizon: self.horizon,
            exit_index: self.exit_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of recorded positions (excluding the start).
    pub fn len(&self) -> usize {
        self.view().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn survived(&self) -> bool {
        self.exit_index.is_none()
    }

    /// `x + S(k)`; `k = 0` is the start.
    pub fn position(&self, k: usize) -> &[f64] {
        self.view().position(k)
    }

    pub fn flat_positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn max_norm(&self) -> f64 {
        self.view().max_norm()
    }

    pub fn scaled(&self) -> ScaledPath<'_> {
        ScaledPath { path: self.view() }
    }
}

/// Borrowed view of a path; what samplers hand to per-path observers.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub start: &'a [f64],
    pub positions: &'a [f64],
    pub dim: usize,
    pub horizon: usize,
    pub exit_index: Option<usize>,
}

impl<'a> PathView<'a> {
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn position(&self, k: usize) -> &'a [f64] {
        if k == 0 {
            self.start
        } else {
            &self.positions[(k - 1) * self.dim..k * self.dim]
        }
    }

    pub fn end(&self) -> &'a [f64] {
        self.position(self.len())
    }

    /// `M = max_{k ≤ len} |S(k)|` with `S(0) = 0`.
    pub fn max_norm(&self) -> f64 {
        (1..=self.len())
            .map(|k| {
                let p = self.position(k);
                p.iter()
                    .zip(self.start)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Max of `|x + S(k)|` over `k0 ≤ k ≤ k1`.
    pub fn max_position_norm(&self, k0: usize, k1: usize) -> f64 {
        (k0..=k1.min(self.len()))
            .map(|k| norm(self.position(k)))
            .fold(0.0, f64::max)
    }

    pub fn to_owned(&self) -> PathSample {
        PathSample {
            start: Point::new(self.start.to_vec()),
            positions: self.positions.to_vec(),
            dim: self.dim,
            horizon: self.horizon,
            exit_index: self.exit_index,
        }
    }
}

/// The càdlàg path `t ↦ (x + S(⌊nt⌋)) / √n` on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledPath<'a> {
    path: PathView<'a>,
}

impl<'a> ScaledPath<'a> {
    pub fn new(path: PathView<'a>) -> Self {
        ScaledPath { path }
    }

    pub fn step_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside [0, 1]")));
        }
        let n = self.path.horizon;
        let k = ((n as f64) * t).floor() as usize;
        Ok(k.min(n))
    }

    pub fn eval(&self, t: f64) -> Result<Point> {
        let k = self.step_index(t)?;
        if k > self.path.len() {
            return Err(Error::invalid(format!(
                "path was not recorded up to step {k} (killed at {:?})",
                self.path.exit_index
            )));
        }
        let s = (self.path.horizon.max(1) as f64).sqrt().recip();
        Ok(Point::new(
            self.path.position(k).iter().map(|v| v * s).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn srw_path(start: f64, steps: &[f64]) -> PathSample {
        let mut pos = Vec::new();
        let mut x = start;
        for s in steps {
            x += s;
            pos.push(x);
        }
        PathSample::new(Point::new(vec![start]), pos, steps.len(), None)
    }

    #[test]
    fn scaled_evaluation() {
        let p = srw_path(3.0, &[1.0, 1.0, -1.0, 1.0]);
        let sp = p.scaled();
        assert_eq!(sp.eval(0.0).unwrap().0, vec![1.5]);
        // n = 4, t = 0.49: floor(1.96) = 1
        assert_eq!(sp.eval(0.49).unwrap().0, vec![2.0]);
        assert_eq!(sp.eval(1.0).unwrap().0, vec![2.5]);
        assert!(sp.eval(1.5).is_err());
    }

    #[test]
    fn max_norm_examples() {
        assert_eq!(srw_path(1.0, &[1.0, 1.0, -1.0]).max_norm(), 2.0);
        assert_eq!(srw_path(1.0, &[]).max_norm(), 0.0);
        let p = PathSample::new(
            Point::new(vec![0.0, 0.0]),
            vec![1.0, 1.0, 2.0, 0.0],
            2,
            None,
        );
        assert_eq!(p.max_norm(), 2.0);
    }
}
