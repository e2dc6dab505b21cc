//! Geometric conditions on critical disks `D(λ, √(m_λ/k))` and their
//! dilations `D(λ, (√m_λ + c)/√k)`.

use serde::{Deserialize, Serialize};

use crate::array::MultiplicityArray;
use crate::sphere::{caps_disjoint, cross3, dot3, fibonacci_unit_vectors, ChordalDisk, CAP_EPS};

/// A cap `{x : x·center ≥ height}` on the unit sphere.
#[derive(Debug, Clone, Copy)]
struct Cap {
    center: [f64; 3],
    height: f64,
}

impl Cap {
    fn from_disk(d: &ChordalDisk) -> Self {
        let r = d.radius();
        Self {
            center: d.center().to_unit_vector(),
            height: 1.0 - 2.0 * r * r,
        }
    }

    fn contains(&self, x: [f64; 3]) -> bool {
        dot3(x, self.center) >= self.height - CAP_EPS
    }

    /// Range `[z_lo, z_hi]` of heights met by the cap.
    fn z_range(&self) -> (f64, f64) {
        let alpha = self.center[2].clamp(-1.0, 1.0).acos();
        let theta = self.height.clamp(-1.0, 1.0).acos();
        let hi = if alpha - theta <= 0.0 { 1.0 } else { (alpha - theta).cos() };
        let lo = if alpha + theta >= std::f64::consts::PI {
            -1.0
        } else {
            (alpha + theta).cos()
        };
        (lo, hi)
    }
}

/// Disks `D(λ, (√m + c)/√k)`, skipping nodes with `√m + c ≤ 0` and clamping
/// radii at 1.
pub fn dilated_disks(x: &MultiplicityArray, c: f64) -> Vec<ChordalDisk> {
    let sk = (x.k() as f64).sqrt();
    x.nodes()
        .iter()
        .filter_map(|n| {
            let r = (n.m as f64).sqrt() + c;
            if r <= 0.0 {
                None
            } else {
                ChordalDisk::from_raw_radius(n.point, r / sk)
            }
        })
        .collect()
}

/// Fibonacci mesh heights are `1 − (2i+1)/n`; indices whose height lies in
/// `[lo, hi]`, padded by one on each side.
fn band(n: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let nf = n as f64;
    let idx = |z: f64| ((1.0 - z) * nf / 2.0 - 0.5).max(0.0);
    let start = (idx(hi).floor() as usize).saturating_sub(1);
    let end = ((idx(lo).ceil() as usize) + 2).min(n);
    start.min(end)..end
}

/// Number of caps containing each point of an `n`-point Fibonacci mesh.
fn mesh_counts(caps: &[Cap], mesh: &[[f64; 3]]) -> Vec<u32> {
    let mut counts = vec![0u32; mesh.len()];
    for cap in caps {
        let (lo, hi) = cap.z_range();
        for i in band(mesh.len(), lo, hi) {
            if cap.contains(mesh[i]) {
                counts[i] += 1;
            }
        }
    }
    counts
}

/// Points where the boundary circles of two caps meet.
fn boundary_intersections(a: &Cap, b: &Cap) -> Vec<[f64; 3]> {
    let g = dot3(a.center, b.center);
    let den = 1.0 - g * g;
    if den <= 1e-15 {
        return Vec::new();
    }
    let (h1, h2) = (a.height, b.height);
    let alpha = (h1 - h2 * g) / den;
    let beta = (h2 - h1 * g) / den;
    let gamma2 = (1.0 - (alpha * alpha + beta * beta + 2.0 * alpha * beta * g)) / den;
    if gamma2 < 0.0 {
        return Vec::new();
    }
    let gamma = gamma2.sqrt();
    let n = cross3(a.center, b.center);
    let base = [
        alpha * a.center[0] + beta * b.center[0],
        alpha * a.center[1] + beta * b.center[1],
        alpha * a.center[2] + beta * b.center[2],
    ];
    [gamma, -gamma]
        .iter()
        .map(|s| [base[0] + s * n[0], base[1] + s * n[1], base[2] + s * n[2]])
        .collect()
}

/// Lower bound for the overlap `S_X` at this `k`: the largest number of
/// critical disks containing a point of the evaluation set (centers,
/// pairwise boundary intersections, and a Fibonacci mesh).
pub fn overlap_count(x: &MultiplicityArray, mesh_n: usize) -> usize {
    let caps: Vec<Cap> = dilated_disks(x, 0.0).iter().map(Cap::from_disk).collect();
    if caps.is_empty() {
        return 0;
    }
    let count_at = |p: [f64; 3]| caps.iter().filter(|c| c.contains(p)).count();
    let mut best = caps.iter().map(|c| count_at(c.center)).max().unwrap_or(0);
    for (i, a) in caps.iter().enumerate() {
        for b in &caps[i + 1..] {
            for p in boundary_intersections(a, b) {
                best = best.max(count_at(p));
            }
        }
    }
    if mesh_n > 0 {
        let mesh = fibonacci_unit_vectors(mesh_n);
        let m = mesh_counts(&caps, &mesh).into_iter().max().unwrap_or(0) as usize;
        best = best.max(m);
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub disjoint: bool,
    /// Smallest pairwise angular margin; `None` with fewer than two disks.
    pub worst_margin: Option<f64>,
}

/// Pairwise disjointness of the dilated disks.
pub fn separation_check(x: &MultiplicityArray, c: f64) -> SeparationReport {
    let disks = dilated_disks(x, c);
    let mut worst: Option<f64> = None;
    for (i, a) in disks.iter().enumerate() {
        for b in &disks[i + 1..] {
            let m = caps_disjoint(a, b).margin;
            worst = Some(worst.map_or(m, |w| w.min(m)));
        }
    }
    SeparationReport {
        disjoint: worst.map_or(true, |w| w >= 0.0),
        worst_margin: worst,
    }
}

/// Fraction of an `mesh_n`-point Fibonacci mesh outside every dilated disk.
pub fn uncovered_mass(x: &MultiplicityArray, c: f64, mesh_n: usize) -> f64 {
    let caps: Vec<Cap> = dilated_disks(x, c).iter().map(Cap::from_disk).collect();
    let mesh = fibonacci_unit_vectors(mesh_n);
    let counts = mesh_counts(&caps, &mesh);
    counts.iter().filter(|&&n| n == 0).count() as f64 / mesh_n as f64
}

/// Mesh estimate of `ν` of the set of points lying in every given disk.
pub fn mesh_intersection_mass(disks: &[ChordalDisk], mesh_n: usize) -> f64 {
    let caps: Vec<Cap> = disks.iter().map(Cap::from_disk).collect();
    let mesh = fibonacci_unit_vectors(mesh_n);
    let counts = mesh_counts(&caps, &mesh);
    counts.iter().filter(|&&n| n as usize == caps.len()).count() as f64 / mesh_n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroArrayCheck {
    /// `k · ν(ℂ ∖ U_k)` with `U_k` the union of critical disks.
    pub k_uncovered: f64,
    /// `Σ m_λ / k`, the total critical-disk measure.
    pub multiplicity_ratio: f64,
}

pub fn zero_array_mass_check(x: &MultiplicityArray, mesh_n: usize) -> ZeroArrayCheck {
    let k = x.k() as f64;
    ZeroArrayCheck {
        k_uncovered: k * uncovered_mass(x, 0.0, mesh_n),
        multiplicity_ratio: x.total_multiplicity() as f64 / k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub k: usize,
    pub c: f64,
    pub mesh_size: usize,
    pub overlap_count: usize,
    pub disjoint_plus: bool,
    pub margin_plus: Option<f64>,
    pub disjoint_minus: bool,
    pub margin_minus: Option<f64>,
    pub uncovered_plus: f64,
    pub uncovered_minus: f64,
    pub k_uncovered_zero: f64,
    pub multiplicity_ratio: f64,
}

/// All geometric checks at dilations `±c`.
pub fn geometry_report(x: &MultiplicityArray, c: f64, mesh_n: usize) -> GeometryReport {
    let plus = separation_check(x, c);
    let minus = separation_check(x, -c);
    let zero = zero_array_mass_check(x, mesh_n);
    GeometryReport {
        k: x.k(),
        c,
        mesh_size: mesh_n,
        overlap_count: overlap_count(x, mesh_n),
        disjoint_plus: plus.disjoint,
        margin_plus: plus.worst_margin,
        disjoint_minus: minus.disjoint,
        margin_minus: minus.worst_margin,
        uncovered_plus: uncovered_mass(x, c, mesh_n),
        uncovered_minus: uncovered_mass(x, -c, mesh_n),
        k_uncovered_zero: zero.k_uncovered,
        multiplicity_ratio: zero.multiplicity_ratio,
    }
}
