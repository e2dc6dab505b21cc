//! Independent oracles shared by the integration tests. Nothing here calls
//! into the numerical kernels under test; only plain types are borrowed.
#![allow(dead_code)]

use bombieri_core::{BombieriPolynomial, Complex64, PlanePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_coords(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    (0..=k)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_poly(rng: &mut ChaCha8Rng, k: usize) -> BombieriPolynomial {
    BombieriPolynomial::new(random_coords(rng, k)).unwrap()
}

/// Uniform in the closed disk `|z| <= r_max`.
pub fn random_point(rng: &mut ChaCha8Rng, r_max: f64) -> PlanePoint {
    let r = r_max * rng.random::<f64>().sqrt();
    let t = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    PlanePoint::new(r * t.cos(), r * t.sin()).unwrap()
}

/// `C(k, j)` by the multiplicative formula.
pub fn binom(k: usize, j: usize) -> f64 {
    let j = j.min(k - j);
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Monomial coefficients `a_j = c_j C(k,j)^{1/2}`.
pub fn monomial(coords: &[Complex64]) -> Vec<Complex64> {
    let k = coords.len() - 1;
    coords
        .iter()
        .enumerate()
        .map(|(j, &cj)| cj * binom(k, j).sqrt())
        .collect()
}

fn horner(a: &[Complex64], z: Complex64) -> Complex64 {
    a.iter().rev().fold(c(0.0, 0.0), |acc, &x| acc * z + x)
}

/// `p(z)` by Horner.
pub fn eval(a: &[Complex64], z: Complex64) -> Complex64 {
    horner(a, z)
}

/// `p(z) (1+|z|²)^{−k/2}`; beyond the unit circle the reversed polynomial
/// is evaluated at `1/z` so nothing overflows.
pub fn weighted(a: &[Complex64], z: Complex64) -> Complex64 {
    let k = a.len() - 1;
    let r = z.norm();
    if r <= 1.0 {
        return horner(a, z) * (1.0 + r * r).powf(-(k as f64) / 2.0);
    }
    let w = z.inv();
    let rev: Vec<Complex64> = a.iter().rev().cloned().collect();
    let phase = (z / r).powu(k as u32);
    phase * horner(&rev, w) * (1.0 + w.norm_sqr()).powf(-(k as f64) / 2.0)
}

/// `(T_λ e_j)(z) (1+|z|²)^{−k/2}` from the closed form
/// `C(k,j)^{1/2} (λ−z)^j (1+λ̄z)^{k−j} (1+|λ|²)^{−k/2}`.
pub fn weighted_moved_basis(lambda: Complex64, k: usize, j: usize, z: Complex64) -> Complex64 {
    let s = (1.0 + z.norm_sqr()).sqrt();
    let t = (1.0 + lambda.norm_sqr()).sqrt();
    let f1 = (lambda - z) / (s * t);
    let f2 = (c(1.0, 0.0) + lambda.conj() * z) / (s * t);
    f1.powu(j as u32) * f2.powu((k - j) as u32) * binom(k, j).sqrt()
}

fn basis_at(center: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if center[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = a[0] * center[0] + a[1] * center[1] + a[2] * center[2];
    let mut e1 = [a[0] - d * center[0], a[1] - d * center[1], a[2] - d * center[2]];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|x| *x /= n);
    let e2 = [
        center[1] * e1[2] - center[2] * e1[1],
        center[2] * e1[0] - center[0] * e1[2],
        center[0] * e1[1] - center[1] * e1[0],
    ];
    (e1, e2)
}

/// Stereographic image of a unit vector, `None` at the north pole.
pub fn plane_of(v: [f64; 3]) -> Option<Complex64> {
    let d = 1.0 - v[2];
    (d > 0.0).then(|| c(v[0] / d, v[1] / d))
}

/// Unit vector of a plane point.
pub fn sphere_of(z: Complex64) -> [f64; 3] {
    let n = 1.0 + z.norm_sqr();
    [2.0 * z.re / n, 2.0 * z.im / n, (z.norm_sqr() - 1.0) / n]
}

/// `∫ f dν` over the spherical cap of geodesic radius `theta_max` around
/// `center`: composite Simpson in the polar angle, trapezoid in azimuth.
pub fn cap_integral<T>(
    f: impl Fn(Complex64) -> T,
    center: [f64; 3],
    theta_max: f64,
    panels: usize,
    azimuth: usize,
) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default + Copy,
{
    let (e1, e2) = basis_at(center);
    let n = panels + panels % 2;
    let h = theta_max / n as f64;
    let mut total = T::default();
    for i in 0..=n {
        let th = i as f64 * h;
        let w = match i {
            0 => 1.0,
            _ if i == n => 1.0,
            _ if i % 2 == 1 => 4.0,
            _ => 2.0,
        } * h
            / 3.0;
        let (s, co) = th.sin_cos();
        if s == 0.0 {
            continue;
        }
        let mut ring = T::default();
        for a in 0..azimuth {
            let ph = 2.0 * std::f64::consts::PI * a as f64 / azimuth as f64;
            let (sp, cp) = ph.sin_cos();
            let v = [
                co * center[0] + s * (cp * e1[0] + sp * e2[0]),
                co * center[1] + s * (cp * e1[1] + sp * e2[1]),
                co * center[2] + s * (cp * e1[2] + sp * e2[2]),
            ];
            if let Some(z) = plane_of(v) {
                ring = ring + f(z);
            }
        }
        total = total + ring * (w * s / (2.0 * azimuth as f64));
    }
    total
}

/// `‖p‖²_{k,D(λ,R)} = (k+1) ∫_D |p|² (1+|z|²)^{−k} dν` by quadrature.
pub fn local_norm_sq_oracle(a: &[Complex64], lambda: Complex64, radius: f64, panels: usize) -> f64 {
    let k = a.len() - 1;
    let theta = 2.0 * radius.min(1.0).asin();
    (k + 1) as f64
        * cap_integral(
            |z| weighted(a, z).norm_sqr(),
            sphere_of(lambda),
            theta,
            panels,
            2 * k + 8,
        )
}

/// `⟨f, g⟩_k` by quadrature over the whole sphere, both given weighted.
pub fn inner_oracle(
    f: impl Fn(Complex64) -> Complex64,
    g: impl Fn(Complex64) -> Complex64,
    k: usize,
    center: Complex64,
    panels: usize,
) -> Complex64 {
    let v = cap_integral(
        |z| f(z) * g(z).conj(),
        sphere_of(center),
        std::f64::consts::PI,
        panels,
        2 * k + 8,
    );
    v * (k + 1) as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// One PASS/FAIL line per acceptance criterion.
pub fn report(id: &str, ok: bool, detail: impl std::fmt::Display) {
    println!("acceptance {id}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}
