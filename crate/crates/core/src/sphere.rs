//! Chordal geometry of the Riemann sphere, seen through stereographic
//! projection onto the plane.
//!
//! Conventions: the projection is taken from the north pole, so the equator
//! maps to the unit circle and the uniform probability measure on the sphere
//! pushes forward to `dν = dm / (π (1 + |z|²)²)`. The chordal distance is
//! normalized so antipodal points sit at distance 1; on the sphere of
//! diameter 1 a chordal radius `r` is a cap of angular radius `2·asin(r)`
//! and ν-measure `r²`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Slack used when deciding membership in closed caps.
pub(crate) const CAP_EPS: f64 = 1e-12;

/// A finite point of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct PlanePoint {
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    re: f64,
    im: f64,
}

impl TryFrom<RawPoint> for PlanePoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self> {
        PlanePoint::new(raw.re, raw.im)
    }
}

impl PlanePoint {
    pub const ORIGIN: PlanePoint = PlanePoint { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return domain(format!("plane point ({re}, {im}) is not finite"));
        }
        Ok(Self { re, im })
    }

    /// Real point; panics on non-finite input. Handy for literals.
    pub fn real(re: f64) -> Self {
        Self::new(re, 0.0).expect("finite real coordinate")
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn re(self) -> f64 {
        self.re
    }

    pub fn im(self) -> f64 {
        self.im
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Inverse stereographic projection onto the unit sphere in R³.
    pub fn to_unit_vector(self) -> [f64; 3] {
        let r = self.abs();
        if r <= 1.0 {
            let s = 1.0 + r * r;
            [2.0 * self.re / s, 2.0 * self.im / s, (r * r - 1.0) / s]
        } else {
            // divide through by r² to stay finite for huge |z|
            let inv = 1.0 / r;
            let s = 1.0 + inv * inv;
            let (ur, ui) = (self.re * inv, self.im * inv);
            [2.0 * ur * inv / s, 2.0 * ui * inv / s, (1.0 - inv * inv) / s]
        }
    }

    /// Stereographic projection of a unit vector. `None` at the projection pole.
    pub fn from_unit_vector(v: [f64; 3]) -> Option<Self> {
        let den = 1.0 - v[2];
        if den <= 0.0 {
            return None;
        }
        Self::new(v[0] / den, v[1] / den).ok()
    }
}

impl From<PlanePoint> for Complex64 {
    fn from(p: PlanePoint) -> Self {
        p.to_complex()
    }
}

/// `|z − w| / √((1+|z|²)(1+|w|²))`, in `[0, 1]`.
pub fn chordal_distance(z: PlanePoint, w: PlanePoint) -> f64 {
    let num = (z.to_complex() - w.to_complex()).norm_sqr();
    let den = (1.0 + z.abs().powi(2)) * (1.0 + w.abs().powi(2));
    let d2 = num / den;
    if d2.is_finite() {
        d2.sqrt().min(1.0)
    } else {
        // enormous coordinates: fall back to the sphere
        let (a, b) = (z.to_unit_vector(), w.to_unit_vector());
        (0.5 * dist3(a, b)).min(1.0)
    }
}

/// Angle between the sphere images of two points, in `[0, π]`.
pub fn angular_distance(z: PlanePoint, w: PlanePoint) -> f64 {
    let (a, b) = (z.to_unit_vector(), w.to_unit_vector());
    let c = cross3(a, b);
    dot3(c, c).sqrt().atan2(dot3(a, b))
}

/// The sphere rotation `φ_λ(z) = (λ − z)/(1 + λ̄ z)` exchanging λ and 0.
pub fn mobius(lambda: PlanePoint, z: PlanePoint) -> Result<PlanePoint> {
    let l = lambda.to_complex();
    let zc = z.to_complex();
    let den = Complex64::new(1.0, 0.0) + l.conj() * zc;
    if den.norm() == 0.0 {
        return Err(Error::Pole);
    }
    PlanePoint::from_complex((l - zc) / den).map_err(|_| Error::Pole)
}

/// ν-measure of a chordal disk of the given radius (independent of center).
pub fn disk_measure(radius: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&radius) {
        return domain(format!("chordal radius {radius} outside [0, 1]"));
    }
    Ok(radius * radius)
}

/// Chordal radius of the disk `Δ(z, r) = {w : |φ_z(w)| < r}`.
pub fn euclidean_to_chordal_radius(r: f64) -> f64 {
    r / (1.0 + r * r).sqrt()
}

/// Closed chordal disk `D(center, radius)`; radius 1 is the whole sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordalDisk {
    center: PlanePoint,
    radius: f64,
}

impl ChordalDisk {
    pub fn new(center: PlanePoint, radius: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&radius) {
            return domain(format!("chordal radius {radius} outside [0, 1]"));
        }
        Ok(Self { center, radius })
    }

    /// Builds a disk from a radius produced by a dilation formula: values
    /// above 1 are clamped to the full sphere, negative values give `None`
    /// (the empty disk).
    pub fn from_raw_radius(center: PlanePoint, radius: f64) -> Option<Self> {
        if radius.is_nan() || radius < 0.0 {
            return None;
        }
        Some(Self {
            center,
            radius: radius.min(1.0),
        })
    }

    pub fn center(&self) -> PlanePoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Angular radius on the sphere, in `[0, π]`.
    pub fn angular_radius(&self) -> f64 {
        2.0 * self.radius.asin()
    }

    pub fn measure(&self) -> f64 {
        self.radius * self.radius
    }

    pub fn contains(&self, z: PlanePoint) -> bool {
        chordal_distance(self.center, z) <= self.radius + CAP_EPS
    }
}

/// Outcome of the exact cap-disjointness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapSeparation {
    pub disjoint: bool,
    /// `Θ − θ₁ − θ₂` in radians (angular center separation minus radii).
    pub margin: f64,
}

/// Decides disjointness of two caps through their angular radii.
pub fn caps_disjoint(d1: &ChordalDisk, d2: &ChordalDisk) -> CapSeparation {
    let sep = angular_distance(d1.center, d2.center);
    let margin = sep - d1.angular_radius() - d2.angular_radius();
    CapSeparation {
        disjoint: margin >= 0.0,
        margin,
    }
}

const GOLDEN_ANGLE: f64 = PI * (3.0 - 2.236_067_977_499_79);

/// Spherical Fibonacci lattice as unit vectors, ordered by decreasing height.
///
/// Heights are `1 − (2i+1)/n`, so neither pole is ever hit.
pub fn fibonacci_unit_vectors(n: usize) -> Vec<[f64; 3]> {
    let nf = n as f64;
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / nf;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = GOLDEN_ANGLE * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// `n` quasi-uniform plane points: the Fibonacci lattice pushed through the
/// stereographic projection.
pub fn fibonacci_points(n: usize) -> Vec<PlanePoint> {
    fibonacci_unit_vectors(n)
        .into_iter()
        .map(|v| PlanePoint::from_unit_vector(v).expect("lattice avoids the pole"))
        .collect()
}

/// Equal-weight quadrature for ν on a Fibonacci mesh of `n` points.
pub fn sphere_mesh(n: usize) -> Vec<(PlanePoint, f64)> {
    let w = 1.0 / n as f64;
    fibonacci_points(n).into_iter().map(|p| (p, w)).collect()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    dot3(d, d).sqrt()
}

/// Rotates unit vector `c` towards `toward` (any non-parallel vector) by
/// angle `theta` along the connecting great circle.
pub(crate) fn rotate_towards(c: [f64; 3], toward: [f64; 3], theta: f64) -> [f64; 3] {
    let proj = dot3(c, toward);
    let mut t = [
        toward[0] - proj * c[0],
        toward[1] - proj * c[1],
        toward[2] - proj * c[2],
    ];
    let tn = dot3(t, t).sqrt();
    if tn == 0.0 {
        return c;
    }
    for x in &mut t {
        *x /= tn;
    }
    let (s, co) = theta.sin_cos();
    normalize3([
        co * c[0] + s * t[0],
        co * c[1] + s * t[1],
        co * c[2] + s * t[2],
    ])
}

pub(crate) fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = dot3(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}
