//! The space `P_k` of polynomials of degree at most `k` with the Bombieri
//! norm, represented in the orthonormal basis `e_{k,j} = C(k,j)^{1/2} z^j`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::special::{incomplete_beta_reg, ln_choose};
use crate::sphere::PlanePoint;
use crate::MAX_DEGREE;

/// Tolerance for the unitarity and involution gates.
pub const UNITARITY_TOL: f64 = 1e-9;

/// An element of `P_k` given by its orthonormal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BombieriPolynomial {
    coords: Vec<Complex64>,
}

impl BombieriPolynomial {
    /// Coordinates in the basis `e_{k,0}, …, e_{k,k}`; the degree bound is
    /// `coords.len() − 1`.
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return domain("a polynomial needs at least one coordinate");
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return domain("coordinates must be finite");
        }
        Ok(Self { coords })
    }

    pub fn zero(k: usize) -> Self {
        Self {
            coords: vec![Complex64::new(0.0, 0.0); k + 1],
        }
    }

    /// The basis element `e_{k,j}`.
    pub fn basis(k: usize, j: usize) -> Result<Self> {
        if j > k {
            return domain(format!("basis index {j} exceeds degree {k}"));
        }
        let mut p = Self::zero(k);
        p.coords[j] = Complex64::new(1.0, 0.0);
        Ok(p)
    }

    /// From monomial coefficients `a_0, …, a_k`.
    pub fn from_monomial(a: &[Complex64]) -> Result<Self> {
        if a.is_empty() {
            return domain("a polynomial needs at least one coefficient");
        }
        let h = half_log_binomials(a.len() - 1);
        Self::new(a.iter().zip(h.iter()).map(|(a, h)| a * (-h).exp()).collect())
    }

    /// Monomial coefficients `a_j = C(k,j)^{1/2} · coords_j`.
    pub fn to_monomial(&self) -> Vec<Complex64> {
        let h = half_log_binomials(self.degree_bound());
        self.coords
            .iter()
            .zip(h.iter())
            .map(|(c, h)| c * h.exp())
            .collect()
    }

    pub fn degree_bound(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Complex64> {
        self.coords
    }

    /// `‖p‖_{k,2}`.
    pub fn norm(&self) -> f64 {
        l2_norm(&self.coords)
    }

    /// `⟨self, other⟩_k`, linear in the first slot.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.coords.len() != other.coords.len() {
            return domain("inner product of polynomials with different degree bounds");
        }
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    /// `p(z) (1+|z|²)^{−k/2}`, summed term by term in log-magnitude form.
    pub fn weighted_eval(&self, z: PlanePoint) -> Complex64 {
        let k = self.degree_bound();
        let h = half_log_binomials(k);
        let r = z.abs();
        if r == 0.0 {
            return self.coords[0];
        }
        // ln(1+r²) without overflow for huge r
        let l = if r > 1.0 {
            2.0 * r.ln() + (1.0 / (r * r)).ln_1p()
        } else {
            (r * r).ln_1p()
        };
        let lr = r.ln();
        let base = -0.5 * k as f64 * l;
        let unit = z.to_complex() / r;
        let mut rot = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in self.coords.iter().enumerate() {
            let mag = (h[j] + j as f64 * lr + base).exp();
            acc += c * rot * mag;
            rot *= unit;
        }
        acc
    }

    /// `(⟨p, T_λ e_{k,j}⟩_k)_{j<m}`.
    pub fn sampling_coefficients(&self, lambda: PlanePoint, m: usize) -> Result<Vec<Complex64>> {
        let k = self.degree_bound();
        if m < 1 || m > k + 1 {
            return domain(format!("need 1 <= m <= k+1 = {}, got {m}", k + 1));
        }
        let mut b = apply_isometry(lambda, &self.coords)?;
        b.truncate(m);
        Ok(b)
    }

    /// `‖p‖_{k, D(λ, R)}`: the norm restricted to a closed chordal disk.
    pub fn local_norm(&self, lambda: PlanePoint, radius: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&radius) {
            return domain(format!("chordal radius {radius} outside [0, 1]"));
        }
        if radius == 0.0 {
            return Ok(0.0);
        }
        let k = self.degree_bound();
        let b = apply_isometry(lambda, &self.coords)?;
        let x = radius * radius;
        let mut total = 0.0;
        for (j, bj) in b.iter().enumerate() {
            let w = incomplete_beta_reg(j as f64 + 1.0, (k - j) as f64 + 1.0, x)?;
            total += bj.norm_sqr() * w;
        }
        Ok(total.sqrt())
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|c| (c / scale).norm_sqr()).sum();
    scale * s.sqrt()
}

/// `(1 + z w̄)^k`.
pub fn kernel(z: PlanePoint, w: PlanePoint, k: u32) -> Complex64 {
    (Complex64::new(1.0, 0.0) + z.to_complex() * w.to_complex().conj()).powu(k)
}

/// Orthonormal coordinates of `K_w`: `C(k,j)^{1/2} w̄^j`.
pub fn kernel_coords(w: PlanePoint, k: usize) -> Vec<Complex64> {
    let h = half_log_binomials(k);
    let wb = w.to_complex().conj();
    let r = wb.norm();
    if r == 0.0 {
        let mut v = vec![Complex64::new(0.0, 0.0); k + 1];
        v[0] = Complex64::new(1.0, 0.0);
        return v;
    }
    let unit = wb / r;
    let lr = r.ln();
    let mut rot = Complex64::new(1.0, 0.0);
    (0..=k)
        .map(|j| {
            let v = rot * (h[j] + j as f64 * lr).exp();
            rot *= unit;
            v
        })
        .collect()
}

fn cached<T: Send + Sync>(
    cache: &'static OnceLock<Mutex<HashMap<usize, Arc<T>>>>,
    k: usize,
    build: impl FnOnce() -> Result<T>,
) -> Result<Arc<T>> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = map.lock().expect("cache poisoned").get(&k) {
        return Ok(v.clone());
    }
    let v = Arc::new(build()?);
    map.lock()
        .expect("cache poisoned")
        .entry(k)
        .or_insert_with(|| v.clone());
    Ok(v)
}

/// `½ ln C(k, j)` for `j = 0..=k`, cached per `k`.
pub(crate) fn half_log_binomials(k: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    cached(&CACHE, k, || Ok((0..=k).map(|j| 0.5 * ln_choose(k, j)).collect()))
        .expect("infallible")
}

/// Eigen-decomposition of the real rotation generator on `P_k`.
///
/// `S` is symmetric tridiagonal with off-diagonal `√((j+1)(k−j))`; its
/// spectrum is exactly `{−k, −k+2, …, k}`. Real rotations of the sphere act
/// as `D Q e^{±itμ} Qᵀ D⁻¹` with `D = diag(i^j)`.
#[derive(Debug)]
pub struct RotationBasis {
    k: usize,
    q: DMatrix<f64>,
    mu: Vec<f64>,
}

impl RotationBasis {
    /// Shared, cached basis for degree `k`.
    pub fn get(k: usize) -> Result<Arc<RotationBasis>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<RotationBasis>>>> = OnceLock::new();
        if k > MAX_DEGREE {
            return Err(Error::DegreeTooLarge(k));
        }
        cached(&CACHE, k, || RotationBasis::build(k))
    }

    fn build(k: usize) -> Result<Self> {
        let n = k + 1;
        let mut s = DMatrix::<f64>::zeros(n, n);
        for j in 0..k {
            let b = (((j + 1) * (k - j)) as f64).sqrt();
            s[(j, j + 1)] = b;
            s[(j + 1, j)] = b;
        }
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut q = DMatrix::<f64>::zeros(n, n);
        let mut mu = Vec::with_capacity(n);
        let mut worst: f64 = 0.0;
        for (col, &src) in order.iter().enumerate() {
            let exact = 2.0 * col as f64 - k as f64;
            worst = worst.max((eig.eigenvalues[src] - exact).abs());
            mu.push(exact);
            q.set_column(col, &eig.eigenvectors.column(src));
        }
        let tol = 1e-8 * (k as f64).max(1.0);
        if worst > tol {
            return Err(Error::Accuracy {
                what: "rotation generator spectrum",
                residual: worst,
                tolerance: tol,
            });
        }
        let gram = q.transpose() * &q;
        let resid = (gram - DMatrix::<f64>::identity(n, n)).norm();
        if resid > UNITARITY_TOL {
            return Err(Error::Accuracy {
                what: "rotation eigenbasis orthogonality",
                residual: resid,
                tolerance: UNITARITY_TOL,
            });
        }
        Ok(Self { k, q, mu })
    }

    pub fn degree(&self) -> usize {
        self.k
    }
}

// Factors of U(λ) = L · Q · E · Qᵀ · R with L, E, R diagonal.
struct Factors {
    basis: Arc<RotationBasis>,
    left: Vec<Complex64>,
    mid: Vec<Complex64>,
    right: Vec<Complex64>,
}

fn i_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn factors(lambda: PlanePoint, k: usize) -> Result<Factors> {
    let basis = RotationBasis::get(k)?;
    let r = lambda.abs();
    let phi = lambda.im().atan2(lambda.re());
    let t = r.atan();
    let left = (0..=k)
        .map(|a| Complex64::from_polar(1.0, -(a as f64) * phi) * i_pow(a))
        .collect();
    let right = (0..=k)
        .map(|b| {
            let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
            // i^{−b} = i^{3b}
            Complex64::from_polar(sign, b as f64 * phi) * i_pow(3 * b)
        })
        .collect();
    let mid = basis
        .mu
        .iter()
        .map(|mu| Complex64::from_polar(1.0, -t * mu))
        .collect();
    Ok(Factors {
        basis,
        left,
        mid,
        right,
    })
}

/// Applies `T_λ` to orthonormal coordinates. `T_λ` is a Hermitian unitary
/// involution, so this also computes `T_λ^† c`.
pub fn apply_isometry(lambda: PlanePoint, coords: &[Complex64]) -> Result<Vec<Complex64>> {
    if coords.is_empty() {
        return domain("empty coordinate vector");
    }
    let k = coords.len() - 1;
    if lambda.abs() == 0.0 {
        // U(0) = diag((−1)^j), kept exact
        return Ok(coords
            .iter()
            .enumerate()
            .map(|(j, c)| if j % 2 == 0 { *c } else { -c })
            .collect());
    }
    let f = factors(lambda, k)?;
    let q = &f.basis.q;
    let n = k + 1;
    let w: Vec<Complex64> = coords.iter().zip(&f.right).map(|(c, r)| c * r).collect();
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (col, yc) in y.iter_mut().enumerate() {
        let qc = q.column(col);
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, wb) in w.iter().enumerate() {
            acc += wb * qc[b];
        }
        *yc = acc * f.mid[col];
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (col, yc) in y.iter().enumerate() {
        let qc = q.column(col);
        for (a, o) in out.iter_mut().enumerate() {
            *o += yc * qc[a];
        }
    }
    for (o, l) in out.iter_mut().zip(&f.left) {
        *o *= l;
    }
    Ok(out)
}

/// First `m` columns of `U(λ)` as a `(k+1) × m` matrix.
pub fn isometry_columns(lambda: PlanePoint, k: usize, m: usize) -> Result<DMatrix<Complex64>> {
    if m > k + 1 {
        return domain(format!("requested {m} columns of a {}-dimensional matrix", k + 1));
    }
    if k > MAX_DEGREE {
        return Err(Error::DegreeTooLarge(k));
    }
    if lambda.abs() == 0.0 {
        return Ok(DMatrix::from_fn(k + 1, m, |a, b| match (a == b, a % 2) {
            (false, _) => Complex64::new(0.0, 0.0),
            (true, 0) => Complex64::new(1.0, 0.0),
            (true, _) => Complex64::new(-1.0, 0.0),
        }));
    }
    let f = factors(lambda, k)?;
    Ok(assemble(&f, k, m))
}

fn assemble(f: &Factors, k: usize, m: usize) -> DMatrix<Complex64> {
    let n = k + 1;
    let q = &f.basis.q;
    // (Q E) split into real and imaginary parts, times the real Qᵀ block
    let mut qe_re = q.clone();
    let mut qe_im = q.clone();
    for (col, e) in f.mid.iter().enumerate() {
        qe_re.column_mut(col).scale_mut(e.re);
        qe_im.column_mut(col).scale_mut(e.im);
    }
    let qt = q.rows(0, m).transpose();
    let re = qe_re * &qt;
    let im = qe_im * &qt;
    DMatrix::from_fn(n, m, |a, b| {
        f.left[a] * Complex64::new(re[(a, b)], im[(a, b)]) * f.right[b]
    })
}

/// The matrix of `T_λ` on `P_k` in the orthonormal basis.
#[derive(Debug, Clone)]
pub struct IsometryMatrix {
    k: usize,
    lambda: PlanePoint,
    entries: DMatrix<Complex64>,
    unitarity_residual: f64,
    involution_residual: f64,
}

impl IsometryMatrix {
    /// Builds `U(λ)` and checks `‖U†U − I‖_F` and `‖U² − I‖_F`.
    pub fn new(lambda: PlanePoint, k: usize) -> Result<Self> {
        let entries = isometry_columns(lambda, k, k + 1)?;
        let n = k + 1;
        let id = DMatrix::<Complex64>::identity(n, n);
        let unitarity_residual = (entries.adjoint() * &entries - &id).norm();
        let involution_residual = (&entries * &entries - &id).norm();
        for (what, residual) in [
            ("isometry unitarity", unitarity_residual),
            ("isometry involution", involution_residual),
        ] {
            if !(residual <= UNITARITY_TOL) {
                return Err(Error::Accuracy {
                    what,
                    residual,
                    tolerance: UNITARITY_TOL,
                });
            }
        }
        Ok(Self {
            k,
            lambda,
            entries,
            unitarity_residual,
            involution_residual,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> PlanePoint {
        self.lambda
    }

    /// `U[i][j]` is coordinate `i` of `T_λ e_{k,j}`.
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.unitarity_residual
    }

    pub fn involution_residual(&self) -> f64 {
        self.involution_residual
    }
}

/// Convenience wrapper for [`IsometryMatrix::new`].
pub fn isometry_matrix(lambda: PlanePoint, k: usize) -> Result<IsometryMatrix> {
    IsometryMatrix::new(lambda, k)
}
