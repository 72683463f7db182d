use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℝ^d. Used both for lattice positions (integer-valued entries)
/// and for scaled positions; the caller decides which.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(d: usize) -> Self {
        Point(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, c: f64) -> Point {
        Point(self.0.iter().map(|v| v * c).collect())
    }

    /// Parses `"1,2.5,-3"`.
    pub fn parse_csv(s: &str) -> Result<Point> {
        let coords = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad coordinate '{t}' in '{s}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if coords.is_empty() || coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("bad point '{s}'")));
        }
        Ok(Point(coords))
    }

    /// Integer coordinates, if every entry is an exact integer.
    pub fn to_lattice(&self) -> Option<Vec<i64>> {
        self.0
            .iter()
            .map(|&v| {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    Some(v as i64)
                } else {
                    None
                }
            })
            .collect()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lattice() {
        let p = Point::parse_csv("1, 2,-3").unwrap();
        assert_eq!(p.to_lattice(), Some(vec![1, 2, -3]));
        assert_eq!(Point::parse_csv("0.5").unwrap().to_lattice(), None);
        assert!(Point::parse_csv("a,b").is_err());
        assert!((Point::new(vec![3.0, 4.0]).norm() - 5.0).abs() < 1e-15);
    }
}
