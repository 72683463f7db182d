//! Catalogue of cones with a closed-form positive harmonic function.
//!
//! Each cone `K` is open; its boundary counts as outside. The harmonic
//! function `u` vanishes on the boundary, is positive inside and homogeneous
//! of degree `p` (the cone exponent). The first Dirichlet eigenvalue of the
//! spherical section is recovered as `p (p + d - 2)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConeKind {
    HalfLine,
    HalfSpace(usize),
    Orthant(usize),
    /// Planar wedge `{0 < θ < alpha}` with `alpha ∈ (0, 2π)`.
    Wedge2D(f64),
    /// `x_1 < x_2 < … < x_d`.
    WeylA(usize),
    /// `0 < x_1 < x_2 < … < x_d`.
    WeylB(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConeSpec {
    kind: ConeKind,
}

/// Radial reduction of the `u`-transformed Brownian motion: a Bessel process
/// of dimension `2p + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialLaw {
    pub degrees: f64,
    pub index: f64,
}

impl RadialLaw {
    pub fn new(degrees: f64) -> Result<Self> {
        if !(degrees.is_finite() && degrees > 1.0) {
            return Err(Error::invalid(format!(
                "Bessel dimension must exceed 1, got {degrees}"
            )));
        }
        Ok(RadialLaw {
            degrees,
            index: degrees / 2.0 - 1.0,
        })
    }
}

impl ConeSpec {
    pub fn new(kind: ConeKind) -> Result<Self> {
        match kind {
            ConeKind::HalfLine => {}
            ConeKind::HalfSpace(d) | ConeKind::Orthant(d) => {
                if d == 0 {
                    return Err(Error::invalid("cone dimension must be positive"));
                }
            }
            ConeKind::WeylA(d) | ConeKind::WeylB(d) => {
                if d < 2 {
                    return Err(Error::invalid("Weyl chambers need d >= 2"));
                }
            }
            ConeKind::Wedge2D(alpha) => {
                if !(alpha.is_finite() && alpha > 0.0 && alpha < 2.0 * PI) {
                    return Err(Error::invalid(format!(
                        "wedge angle must lie in (0, 2π), got {alpha}"
                    )));
                }
            }
        }
        Ok(ConeSpec { kind })
    }

    pub fn half_line() -> Self {
        ConeSpec {
            kind: ConeKind::HalfLine,
        }
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            ConeKind::HalfLine => 1,
            ConeKind::Wedge2D(_) => 2,
            ConeKind::HalfSpace(d)
            | ConeKind::Orthant(d)
            | ConeKind::WeylA(d)
            | ConeKind::WeylB(d) => d,
        }
    }

    /// Homogeneity degree `p` of `u`.
    pub fn exponent(&self) -> f64 {
        match self.kind {
            ConeKind::HalfLine | ConeKind::HalfSpace(_) => 1.0,
            ConeKind::Orthant(d) => d as f64,
            ConeKind::Wedge2D(alpha) => PI / alpha,
            ConeKind::WeylA(d) => (d * (d - 1) / 2) as f64,
            ConeKind::WeylB(d) => (d * d) as f64,
        }
    }

    /// First Dirichlet eigenvalue of the Laplace–Beltrami operator on the
    /// spherical section, `p (p + d - 2)`. Undefined for `d = 1`.
    pub fn lambda1(&self) -> Result<f64> {
        let d = self.dimension();
        if d < 2 {
            return Err(Error::Unsupported(
                "the eigenvalue problem on S^0 is degenerate (d = 1)".into(),
            ));
        }
        let p = self.exponent();
        Ok(p * (p + d as f64 - 2.0))
    }

    pub fn radial_law(&self) -> RadialLaw {
        let p = self.exponent();
        let d = self.dimension() as f64;
        RadialLaw {
            degrees: 2.0 * p + d,
            index: p + d / 2.0 - 1.0,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::invalid(format!(
                "point has dimension {} but the cone has dimension {}",
                x.len(),
                self.dimension()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        Ok(())
    }

    /// Open-cone membership; boundary points are outside.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    /// Membership without the dimension check; for inner loops.
    #[inline]
    pub fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self.kind {
            ConeKind::HalfLine => x[0] > 0.0,
            ConeKind::HalfSpace(d) => x[d - 1] > 0.0,
            ConeKind::Orthant(_) => x.iter().all(|&v| v > 0.0),
            ConeKind::Wedge2D(alpha) => {
                if x[0] == 0.0 && x[1] == 0.0 {
                    return false;
                }
                let theta = polar_angle(x[0], x[1]);
                theta > 0.0 && theta < alpha
            }
            ConeKind::WeylA(_) => x.windows(2).all(|w| w[0] < w[1]),
            ConeKind::WeylB(_) => x[0] > 0.0 && x.windows(2).all(|w| w[0] < w[1]),
        }
    }

    /// The harmonic function `u`; zero outside the open cone.
    pub fn u_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.u_unchecked(x))
    }

    #[inline]
    pub fn u_unchecked(&self, x: &[f64]) -> f64 {
        if !self.contains_unchecked(x) {
            return 0.0;
        }
        match self.kind {
            ConeKind::HalfLine => x[0],
            ConeKind::HalfSpace(d) => x[d - 1],
            ConeKind::Orthant(_) => x.iter().product(),
            ConeKind::Wedge2D(alpha) => {
                let r = x[0].hypot(x[1]);
                let theta = polar_angle(x[0], x[1]);
                // Scaled by 1/k so the quarter plane and half plane reproduce
                // the orthant and half-space polynomials exactly.
                let k = PI / alpha;
                r.powf(k) * (k * theta).sin() / k
            }
            ConeKind::WeylA(d) => {
                let mut prod = 1.0;
                for j in 1..d {
                    for i in 0..j {
                        prod *= x[j] - x[i];
                    }
                }
                prod
            }
            ConeKind::WeylB(d) => {
                let mut prod: f64 = x.iter().product();
                for j in 1..d {
                    for i in 0..j {
                        prod *= x[j] * x[j] - x[i] * x[i];
                    }
                }
                prod
            }
        }
    }

    /// Euclidean distance to the boundary; zero outside the open cone.
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.contains_unchecked(x) {
            return Ok(0.0);
        }
        let dist = match self.kind {
            ConeKind::HalfLine => x[0],
            ConeKind::HalfSpace(d) => x[d - 1],
            ConeKind::Orthant(_) => x.iter().copied().fold(f64::INFINITY, f64::min),
            ConeKind::Wedge2D(alpha) => {
                let r = x[0].hypot(x[1]);
                let theta = polar_angle(x[0], x[1]);
                dist_to_ray(r, theta).min(dist_to_ray(r, alpha - theta))
            }
            ConeKind::WeylA(_) => adjacent_gap(x),
            ConeKind::WeylB(_) => x[0].min(adjacent_gap(x)),
        };
        Ok(dist)
    }

    /// Probability that a Brownian bridge from `a` to `b` over time `h`
    /// stays inside, for two points already inside. Each face contributes
    /// the half-space factor `1 - exp(-2 δ(a) δ(b) / h)`; the product is
    /// exact for orthogonal faces and a close approximation otherwise.
    /// Non-convex wedges use the distance to the boundary as one face.
    pub fn bridge_survival(&self, a: &[f64], b: &[f64], h: f64) -> f64 {
        let face = |da: f64, db: f64| -(-2.0 * da * db / h).exp_m1();
        match self.kind {
            ConeKind::HalfLine => face(a[0], b[0]),
            ConeKind::HalfSpace(d) => face(a[d - 1], b[d - 1]),
            ConeKind::Orthant(_) => a.iter().zip(b).map(|(&x, &y)| face(x, y)).product(),
            ConeKind::Wedge2D(alpha) if alpha <= PI => {
                let (s, c) = alpha.sin_cos();
                face(a[1], b[1]) * face(a[0] * s - a[1] * c, b[0] * s - b[1] * c)
            }
            ConeKind::Wedge2D(_) => {
                let da = self.dist_to_boundary(a).unwrap_or(0.0);
                let db = self.dist_to_boundary(b).unwrap_or(0.0);
                face(da, db)
            }
            ConeKind::WeylA(_) => gap_faces(a, b, face),
            ConeKind::WeylB(_) => face(a[0], b[0]) * gap_faces(a, b, face),
        }
    }

    /// A unit vector strictly inside the cone, used as the starting
    /// direction for processes started near the vertex.
    pub fn interior_direction(&self) -> Point {
        let d = self.dimension();
        let raw: Vec<f64> = match self.kind {
            ConeKind::HalfLine => vec![1.0],
            ConeKind::HalfSpace(d) => {
                let mut v = vec![0.0; d];
                v[d - 1] = 1.0;
                v
            }
            ConeKind::Orthant(d) => vec![1.0; d],
            ConeKind::Wedge2D(alpha) => vec![(alpha / 2.0).cos(), (alpha / 2.0).sin()],
            ConeKind::WeylA(_) => (0..d).map(|i| i as f64 - (d as f64 - 1.0) / 2.0).collect(),
            ConeKind::WeylB(_) => (1..=d).map(|i| i as f64).collect(),
        };
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        Point::new(raw.into_iter().map(|v| v / norm).collect())
    }

    /// Linear isometries of ℝ^d mapping the cone to itself and fixing `u`.
    /// Used by symmetry checks; returns coordinate permutations only.
    pub fn symmetric_permutations(&self) -> Vec<Vec<usize>> {
        match self.kind {
            ConeKind::Orthant(d) => {
                let mut out = Vec::new();
                for i in 0..d {
                    for j in (i + 1)..d {
                        let mut p: Vec<usize> = (0..d).collect();
                        p.swap(i, j);
                        out.push(p);
                    }
                }
                out
            }
            ConeKind::HalfSpace(d) if d > 2 => {
                let mut p: Vec<usize> = (0..d).collect();
                p.swap(0, 1);
                vec![p]
            }
            _ => Vec::new(),
        }
    }
}

/// Angle in `[0, 2π)`.
#[inline]
fn polar_angle(x: f64, y: f64) -> f64 {
    let t = y.atan2(x);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Distance from a point at polar `(r, delta)` to the ray at angle 0.
fn dist_to_ray(r: f64, delta: f64) -> f64 {
    if delta >= PI / 2.0 {
        r
    } else {
        r * delta.sin()
    }
}

fn adjacent_gap(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| (w[1] - w[0]) * FRAC_1_SQRT_2)
        .fold(f64::INFINITY, f64::min)
}

fn gap_faces(a: &[f64], b: &[f64], face: impl Fn(f64, f64) -> f64) -> f64 {
    a.windows(2)
        .zip(b.windows(2))
        .map(|(u, v)| face((u[1] - u[0]) * FRAC_1_SQRT_2, (v[1] - v[0]) * FRAC_1_SQRT_2))
        .product()
}

impl fmt::Display for ConeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConeKind::HalfLine => write!(f, "half-line"),
            ConeKind::HalfSpace(d) => write!(f, "half-space:{d}"),
            ConeKind::Orthant(d) => write!(f, "orthant:{d}"),
            ConeKind::Wedge2D(a) => write!(f, "wedge:{a}"),
            ConeKind::WeylA(d) => write!(f, "weyl-a:{d}"),
            ConeKind::WeylB(d) => write!(f, "weyl-b:{d}"),
        }
    }
}

impl FromStr for ConeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let dim = |arg: Option<&str>| -> Result<usize> {
            arg.ok_or_else(|| Error::Parse(format!("cone '{s}' needs a dimension")))?
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad dimension in cone '{s}'")))
        };
        let kind = match name {
            "half-line" => {
                if arg.is_some() {
                    return Err(Error::Parse("half-line takes no argument".into()));
                }
                ConeKind::HalfLine
            }
            "half-space" => ConeKind::HalfSpace(dim(arg)?),
            "orthant" => ConeKind::Orthant(dim(arg)?),
            "weyl-a" => ConeKind::WeylA(dim(arg)?),
            "weyl-b" => ConeKind::WeylB(dim(arg)?),
            "wedge" => {
                let a = arg
                    .ok_or_else(|| Error::Parse("wedge needs an angle".into()))?
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad wedge angle in '{s}'")))?;
                ConeKind::Wedge2D(a)
            }
            _ => return Err(Error::Parse(format!("unknown cone '{s}'"))),
        };
        ConeSpec::new(kind)
    }
}

impl TryFrom<String> for ConeSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ConeSpec> for String {
    fn from(c: ConeSpec) -> String {
        c.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn catalogue() -> Vec<ConeSpec> {
        [
            ConeKind::HalfLine,
            ConeKind::HalfSpace(1),
            ConeKind::HalfSpace(2),
            ConeKind::HalfSpace(3),
            ConeKind::Orthant(1),
            ConeKind::Orthant(2),
            ConeKind::Orthant(3),
            ConeKind::Wedge2D(FRAC_PI_2),
            ConeKind::Wedge2D(PI / 3.0),
            ConeKind::Wedge2D(1.5 * PI),
            ConeKind::WeylA(2),
            ConeKind::WeylA(3),
            ConeKind::WeylA(4),
            ConeKind::WeylB(2),
            ConeKind::WeylB(3),
        ]
        .into_iter()
        .map(|k| ConeSpec::new(k).unwrap())
        .collect()
    }

    /// Rejection sample of a point in the cone with moderate norm.
    fn interior_point(cone: &ConeSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..cone.dimension())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            if cone.dist_to_boundary(&x).unwrap() > 0.05 {
                return x;
            }
        }
    }

    #[test]
    fn membership_examples() {
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        assert!(q.contains(&[1.0, 1.0]).unwrap());
        let w = ConeSpec::new(ConeKind::WeylA(3)).unwrap();
        assert!(!w.contains(&[1.0, 1.0, 2.0]).unwrap());
        let wedge = ConeSpec::new(ConeKind::Wedge2D(FRAC_PI_2)).unwrap();
        assert!(!wedge.contains(&[1.0, -0.1]).unwrap());
        assert!(q.contains(&[1.0]).is_err());
    }

    #[test]
    fn u_examples() {
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        assert_eq!(q.u_value(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(q.u_value(&[2.0, 2.0]).unwrap(), 4.0);
        let h = ConeSpec::new(ConeKind::HalfSpace(3)).unwrap();
        assert_eq!(h.u_value(&[0.3, -4.0, 2.0]).unwrap(), 2.0);
        let w = ConeSpec::new(ConeKind::WeylA(3)).unwrap();
        assert_eq!(w.u_value(&[0.0, 1.0, 3.0]).unwrap(), 6.0);
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(ConeSpec::half_line().exponent(), 1.0);
        let wedge = ConeSpec::new(ConeKind::Wedge2D(FRAC_PI_2)).unwrap();
        assert!((wedge.exponent() - 2.0).abs() < 1e-15);
        assert_eq!(ConeSpec::new(ConeKind::WeylA(4)).unwrap().exponent(), 6.0);
        assert_eq!(ConeSpec::new(ConeKind::WeylB(3)).unwrap().exponent(), 9.0);
    }

    #[test]
    fn lambda1_examples() {
        let wedge = ConeSpec::new(ConeKind::Wedge2D(FRAC_PI_2)).unwrap();
        assert!((wedge.lambda1().unwrap() - 4.0).abs() < 1e-14);
        let h3 = ConeSpec::new(ConeKind::HalfSpace(3)).unwrap();
        assert_eq!(h3.lambda1().unwrap(), 2.0);
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        assert_eq!(q.lambda1().unwrap(), 4.0);
        assert!(matches!(
            ConeSpec::half_line().lambda1(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn exponent_matches_eigenvalue_formula() {
        // p = sqrt(λ₁ + (d/2 - 1)²) - (d/2 - 1) inverted through λ₁ = p(p+d-2).
        for cone in catalogue() {
            let d = cone.dimension() as f64;
            let p = cone.exponent();
            assert!(p > 0.0);
            if cone.dimension() >= 2 {
                let l = cone.lambda1().unwrap();
                assert!(l > 0.0);
                let shift = d / 2.0 - 1.0;
                let back = (l + shift * shift).sqrt() - shift;
                assert!((back - p).abs() < 1e-12, "{cone}: {back} vs {p}");
            }
            let law = cone.radial_law();
            assert_eq!(law.index, law.degrees / 2.0 - 1.0);
            assert_eq!(law.index, p + d / 2.0 - 1.0);
        }
    }

    #[test]
    fn distance_examples() {
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        assert_eq!(q.dist_to_boundary(&[3.0, 1.0]).unwrap(), 1.0);
        let h = ConeSpec::new(ConeKind::HalfSpace(2)).unwrap();
        assert_eq!(h.dist_to_boundary(&[5.0, 0.25]).unwrap(), 0.25);
        let w = ConeSpec::new(ConeKind::WeylA(2)).unwrap();
        assert!((w.dist_to_boundary(&[0.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(q.dist_to_boundary(&[-1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for cone in catalogue() {
            let p = cone.exponent();
            for _ in 0..1000 {
                let x = interior_point(&cone, &mut rng);
                let ux = cone.u_value(&x).unwrap();
                assert!(ux > 0.0);
                for c in [0.5, 2.0, 7.0] {
                    let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
                    let lhs = cone.u_value(&cx).unwrap();
                    let rhs = c.powf(p) * ux;
                    assert!(
                        (lhs - rhs).abs() <= 1e-9 * rhs.max(1.0),
                        "{cone}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn harmonicity_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-3;
        for cone in catalogue() {
            for _ in 0..200 {
                let x = interior_point(&cone, &mut rng);
                let u0 = cone.u_value(&x).unwrap();
                let mut lap = 0.0;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    lap += (cone.u_value(&xp).unwrap() - 2.0 * u0 + cone.u_value(&xm).unwrap())
                        / (h * h);
                }
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let scale = u0 / r2;
                assert!(lap.abs() / scale < 1e-5, "{cone} at {x:?}: {lap}");
            }
        }
    }

    #[test]
    fn boundary_vanishing() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for cone in catalogue() {
            for _ in 0..1000 {
                let x = interior_point(&cone, &mut rng);
                let b = project_to_boundary(&cone, &x);
                let u = cone.u_value(&b).unwrap();
                match cone.kind() {
                    ConeKind::Wedge2D(_) => assert!(u.abs() < 1e-12, "{cone}: {u}"),
                    _ => assert_eq!(u, 0.0, "{cone} at {b:?}"),
                }
                assert!(!cone.contains(&b).unwrap());
            }
        }
    }

    fn project_to_boundary(cone: &ConeSpec, x: &[f64]) -> Vec<f64> {
        let mut b = x.to_vec();
        match cone.kind() {
            ConeKind::HalfLine => b[0] = 0.0,
            ConeKind::HalfSpace(d) => b[d - 1] = 0.0,
            ConeKind::Orthant(d) => b[(x[0].to_bits() as usize) % d] = 0.0,
            ConeKind::Wedge2D(alpha) => {
                let r = x[0].hypot(x[1]);
                let theta = if x[0] > 0.5 { 0.0 } else { alpha };
                b = vec![r * theta.cos(), r * theta.sin()];
            }
            ConeKind::WeylA(d) | ConeKind::WeylB(d) => {
                let i = (x[0].to_bits() as usize) % (d - 1);
                b[i + 1] = b[i];
            }
        }
        b
    }

    #[test]
    fn wedge_and_quadrant_agree() {
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let w = ConeSpec::new(ConeKind::Wedge2D(FRAC_PI_2)).unwrap();
        assert!((q.exponent() - w.exponent()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            assert_eq!(q.contains(&x).unwrap(), w.contains(&x).unwrap());
            let (a, b) = (q.u_value(&x).unwrap(), w.u_value(&x).unwrap());
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn half_plane_wedge_matches_half_space() {
        let h = ConeSpec::new(ConeKind::HalfSpace(2)).unwrap();
        let w = ConeSpec::new(ConeKind::Wedge2D(PI)).unwrap();
        for x in [[0.3, 2.0], [-4.0, 0.5], [1.0, 1e-3]] {
            assert!((h.u_value(&x).unwrap() - w.u_value(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_round_trip() {
        for cone in catalogue() {
            let s = cone.to_string();
            assert_eq!(s.parse::<ConeSpec>().unwrap(), cone);
        }
        assert!("wedge:-1".parse::<ConeSpec>().is_err());
        assert!("weyl-a:1".parse::<ConeSpec>().is_err());
        assert!("torus:2".parse::<ConeSpec>().is_err());
    }

    #[test]
    fn interior_direction_is_inside() {
        for cone in catalogue() {
            let x0 = cone.interior_direction();
            assert!(cone.contains(&x0).unwrap(), "{cone}");
            let n: f64 = x0.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bridge_survival_factors() {
        let h = 0.3;
        let line = ConeSpec::half_line().bridge_survival(&[0.5], &[0.2], h);
        assert!((line - (1.0 - (-2.0 * 0.5 * 0.2 / h).exp())).abs() < 1e-15);
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let w = ConeSpec::new(ConeKind::Wedge2D(PI / 2.0)).unwrap();
        let (a, b) = ([0.5, 1.5], [0.2, 0.9]);
        let expect = (1.0 - (-2.0 * 0.5 * 0.2 / h).exp()) * (1.0 - (-2.0 * 1.5 * 0.9 / h).exp());
        assert!((q.bridge_survival(&a, &b, h) - expect).abs() < 1e-15);
        assert!((w.bridge_survival(&a, &b, h) - expect).abs() < 1e-12);
        let far = ConeSpec::new(ConeKind::WeylA(3)).unwrap().bridge_survival(
            &[0.0, 50.0, 100.0],
            &[0.0, 50.0, 100.0],
            h,
        );
        assert!((far - 1.0).abs() < 1e-12);
    }
}
