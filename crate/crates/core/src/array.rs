//! Multiplicity arrays, their analysis operators, frame bounds and
//! interpolation constants.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::poly::{isometry_columns, BombieriPolynomial};
use crate::sphere::{mobius, PlanePoint};
use crate::MAX_DEGREE;

/// Relative threshold below which the analysis operator counts as singular.
pub const RANK_DEFICIENCY_TOL: f64 = 1e-10;

/// Total multiplicity handled by one leaf of the frame-operator reduction.
const LEAF_ROWS: usize = 64;

/// A node `λ` with multiplicity `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    #[serde(flatten)]
    pub point: PlanePoint,
    pub m: usize,
}

impl Node {
    pub fn new(point: PlanePoint, m: usize) -> Self {
        Self { point, m }
    }
}

/// One level `(Λ_k, m^{(k)})` of an array.
///
/// Repeated centers are allowed; they model arrays without finite overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArray")]
pub struct MultiplicityArray {
    k: usize,
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
struct RawArray {
    k: usize,
    nodes: Vec<Node>,
}

impl TryFrom<RawArray> for MultiplicityArray {
    type Error = Error;

    fn try_from(raw: RawArray) -> Result<Self> {
        MultiplicityArray::new(raw.k, raw.nodes)
    }
}

impl MultiplicityArray {
    pub fn new(k: usize, nodes: Vec<Node>) -> Result<Self> {
        if k == 0 {
            return domain("degree k must be positive");
        }
        if k > MAX_DEGREE {
            return Err(Error::DegreeTooLarge(k));
        }
        if let Some(n) = nodes.iter().find(|n| n.m == 0) {
            return domain(format!(
                "node ({}, {}) has multiplicity 0",
                n.point.re(),
                n.point.im()
            ));
        }
        Ok(Self { k, nodes })
    }

    /// All nodes with the same multiplicity.
    pub fn uniform(k: usize, points: &[PlanePoint], m: usize) -> Result<Self> {
        Self::new(k, points.iter().map(|&p| Node::new(p, m)).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `M = Σ m_λ`.
    pub fn total_multiplicity(&self) -> usize {
        self.nodes.iter().map(|n| n.m).sum()
    }

    /// The same nodes listed twice.
    pub fn doubled(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.extend_from_slice(&self.nodes);
        Self { k: self.k, nodes }
    }

    /// Applies the sphere rotation `φ_μ` to every node.
    pub fn rotated(&self, mu: PlanePoint) -> Result<Self> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Ok(Node::new(mobius(mu, n.point)?, n.m)))
            .collect::<Result<_>>()?;
        Ok(Self { k: self.k, nodes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The `M × (k+1)` matrix whose row `(λ, j)` is `⟨·, T_λ e_{k,j}⟩`.
pub fn analysis_operator(x: &MultiplicityArray) -> Result<DMatrix<Complex64>> {
    let k = x.k;
    let blocks: Vec<DMatrix<Complex64>> = x
        .nodes
        .par_iter()
        .map(|n| Ok(isometry_columns(n.point, k, n.m.min(k + 1))?.adjoint()))
        .collect::<Result<_>>()?;
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::<Complex64>::zeros(rows, k + 1);
    let mut r = 0;
    for b in &blocks {
        out.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    Ok(out)
}

/// Serde helper writing non-finite values as strings.
pub mod serde_extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub k: usize,
    pub total_multiplicity: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Descending, `min(M, k+1)` entries.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `B/A`, infinite when `A = 0`.
    #[serde(with = "serde_extended_f64")]
    pub condition: f64,
}

fn leaf_frame(x: &MultiplicityArray, nodes: &[Node]) -> Result<DMatrix<Complex64>> {
    let k = x.k;
    let rows: usize = nodes.iter().map(|n| n.m.min(k + 1)).sum();
    let mut v = DMatrix::<Complex64>::zeros(k + 1, rows);
    let mut c = 0;
    for n in nodes {
        let m = n.m.min(k + 1);
        v.columns_mut(c, m).copy_from(&isometry_columns(n.point, k, m)?);
        c += m;
    }
    Ok(&v * v.adjoint())
}

// Pairwise tree over the node list, split at the midpoint. The shape
// depends only on the list, so results do not depend on scheduling.
fn frame_sum(x: &MultiplicityArray, nodes: &[Node]) -> Result<DMatrix<Complex64>> {
    let rows: usize = nodes.iter().map(|n| n.m).sum();
    if nodes.len() == 1 || rows <= LEAF_ROWS {
        return leaf_frame(x, nodes);
    }
    let (l, r) = nodes.split_at(nodes.len() / 2);
    let (a, b) = rayon::join(|| frame_sum(x, l), || frame_sum(x, r));
    Ok(a? + b?)
}

/// The frame operator `S = Σ_λ U(λ)_{:,<m} U(λ)_{:,<m}^†`.
pub fn frame_operator(x: &MultiplicityArray) -> Result<DMatrix<Complex64>> {
    if x.nodes.is_empty() {
        return Ok(DMatrix::zeros(x.k + 1, x.k + 1));
    }
    frame_sum(x, &x.nodes)
}

fn binary_exponent(v: f64) -> i32 {
    ((v.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

/// Extreme frame constants from a dense Hermitian eigendecomposition.
pub fn frame_bounds(x: &MultiplicityArray) -> Result<FrameReport> {
    let k = x.k;
    let n = k + 1;
    let total = x.total_multiplicity();
    let mut s = frame_operator(x)?;
    // power-of-two normalization keeps scaling by 2 exact
    let trace: f64 = (0..n).map(|i| s[(i, i)].re).sum();
    let e = if trace > 0.0 { binary_exponent(trace) } else { 0 };
    let scale = 2f64.powi(-e);
    s.scale_mut(scale);
    let mut eig: Vec<f64> = s
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v / scale)
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let upper = eig[0].max(0.0);
    let tol = n as f64 * f64::EPSILON * upper;
    let rank = eig.iter().filter(|&&v| v > tol).count();
    let lower = if rank == n { eig[n - 1] } else { 0.0 };
    let singular_values = eig
        .iter()
        .take(total.min(n))
        .map(|v| v.max(0.0).sqrt())
        .collect();
    let condition = if lower > 0.0 { upper / lower } else { f64::INFINITY };
    Ok(FrameReport {
        k,
        total_multiplicity: total,
        lower_bound: lower,
        upper_bound: upper,
        singular_values,
        rank,
        condition,
    })
}

fn interpolation_svd(
    x: &MultiplicityArray,
    vectors: bool,
) -> Result<(nalgebra::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>, f64, f64)> {
    let total = x.total_multiplicity();
    let dim = x.k + 1;
    if total > dim {
        return Err(Error::Overdetermined { total, dim });
    }
    if total == 0 {
        return domain("interpolation on an empty array");
    }
    let a = analysis_operator(x)?;
    let svd = a.svd(vectors, vectors);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if !(sigma_min >= RANK_DEFICIENCY_TOL * sigma_max) {
        return Err(Error::RankDeficient {
            sigma_min,
            sigma_max,
        });
    }
    Ok((svd, sigma_min, sigma_max))
}

/// `M_X = 1/σ_min` of the analysis operator.
pub fn interpolation_constant(x: &MultiplicityArray) -> Result<f64> {
    let (_, sigma_min, _) = interpolation_svd(x, false)?;
    Ok(1.0 / sigma_min)
}

/// The minimal-norm `p` whose sampling coefficients equal `values`
/// (ordered by node, then by derivative index `j < m`).
pub fn min_norm_interpolant(
    x: &MultiplicityArray,
    values: &[Complex64],
) -> Result<BombieriPolynomial> {
    let total = x.total_multiplicity();
    if values.len() != total {
        return domain(format!(
            "expected {total} values (one per row), got {}",
            values.len()
        ));
    }
    let (svd, _, sigma_max) = interpolation_svd(x, true)?;
    let v = DVector::from_column_slice(values);
    let p = svd
        .solve(&v, RANK_DEFICIENCY_TOL * sigma_max)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let a = analysis_operator(x)?;
    let residual = (&a * &p - &v).norm();
    let tolerance = 1e-10 * v.norm();
    if residual > tolerance.max(1e-300) && residual > 0.0 {
        return Err(Error::Accuracy {
            what: "minimal-norm interpolant residual",
            residual,
            tolerance,
        });
    }
    BombieriPolynomial::new(p.iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(re: f64, im: f64) -> PlanePoint {
        PlanePoint::new(re, im).unwrap()
    }

    #[test]
    fn json_format() {
        let x: MultiplicityArray =
            serde_json::from_str(r#"{"k": 3, "nodes": [{"re": 0.5, "im": -1.0, "m": 2}]}"#).unwrap();
        assert_eq!(x.k(), 3);
        assert_eq!(x.nodes()[0].m, 2);
        assert_eq!(x.nodes()[0].point.im(), -1.0);
        let back: MultiplicityArray = serde_json::from_str(&x.to_json().unwrap()).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<MultiplicityArray>(r#"{"k": 3, "nodes": [{"re": 0.5, "im": 0, "m": 0}]}"#).is_err());
        assert!(serde_json::from_str::<MultiplicityArray>(r#"{"k": 0, "nodes": []}"#).is_err());
    }

    #[test]
    fn single_full_node_is_tight() {
        let x = MultiplicityArray::uniform(9, &[p(0.3, 0.2)], 10).unwrap();
        let r = frame_bounds(&x).unwrap();
        assert!((r.lower_bound - 1.0).abs() < 1e-12 && (r.upper_bound - 1.0).abs() < 1e-12);
        assert_eq!(r.rank, 10);
        assert!((interpolation_constant(&x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_cases() {
        let x = MultiplicityArray::uniform(1, &[PlanePoint::ORIGIN], 1).unwrap();
        let r = frame_bounds(&x).unwrap();
        assert_eq!((r.lower_bound, r.upper_bound), (0.0, 1.0));
        assert_eq!(r.rank, 1);
        assert!(r.condition.is_infinite());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"condition\":\"inf\""));
        let back: FrameReport = serde_json::from_str(&json).unwrap();
        assert!(back.condition.is_infinite());

        let two = MultiplicityArray::uniform(1, &[PlanePoint::ORIGIN, p(1.0, 0.0)], 1).unwrap();
        let want = 1.0 / (1.0 - 0.5f64.sqrt()).sqrt();
        assert!((interpolation_constant(&two).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn overdetermined_and_rank_deficient() {
        let pts = [PlanePoint::ORIGIN, p(1.0, 0.0), p(-1.0, 0.0)];
        let x = MultiplicityArray::uniform(1, &pts, 1).unwrap();
        assert!(matches!(interpolation_constant(&x), Err(Error::Overdetermined { .. })));
        let dup = MultiplicityArray::uniform(4, &[p(0.2, 0.0), p(0.2, 0.0)], 1).unwrap();
        assert!(matches!(interpolation_constant(&dup), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn doubled_bounds_exact() {
        let pts: Vec<PlanePoint> = crate::sphere::fibonacci_points(37);
        let x = MultiplicityArray::uniform(24, &pts, 1).unwrap();
        let a = frame_bounds(&x).unwrap();
        let b = frame_bounds(&x.doubled()).unwrap();
        assert_eq!(b.lower_bound, 2.0 * a.lower_bound);
        assert_eq!(b.upper_bound, 2.0 * a.upper_bound);
    }
}
