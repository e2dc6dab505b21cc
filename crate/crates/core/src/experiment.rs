//! Array generators and sweeps over the degree `k`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{
    frame_bounds, interpolation_constant, serde_extended_f64, MultiplicityArray, Node,
};
use crate::error::{Error, Result};
use crate::geometry::{geometry_report, GeometryReport};
use crate::sphere::{
    caps_disjoint, chordal_distance, dot3, fibonacci_points, normalize3, rotate_towards,
    ChordalDisk, PlanePoint,
};
use crate::MAX_DEGREE;

/// Largest chordal displacement of a perturbed node, in units of `1/√k`.
pub const PERTURBATION_SCALE: f64 = 0.3;

/// Smallest mesh accepted in a sweep.
pub const MIN_MESH: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Generator {
    Fibonacci,
    Perturbed,
    Clustered,
    FromFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MultiplicityRule {
    Uniform { m: usize },
    RandomBounded { m_max: usize, seed: u64 },
    SqrtK,
}

impl MultiplicityRule {
    fn max_at(&self, k: usize) -> usize {
        match *self {
            Self::Uniform { m } => m,
            Self::RandomBounded { m_max, .. } => m_max,
            Self::SqrtK => crate::annex::isqrt(k),
        }
    }
}

/// Nodes inside this disk are removed after generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: PlanePoint,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: Generator,
    pub k_list: Vec<usize>,
    /// Target total multiplicity per unit of `k`.
    pub density: f64,
    pub multiplicity_rule: MultiplicityRule,
    pub c: f64,
    pub mesh_n: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub hole: Option<Hole>,
    /// Greedily drop nodes until the disks dilated by this `c` are disjoint.
    #[serde(default)]
    pub separate: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(generator: Generator, k_list: Vec<usize>, density: f64, rule: MultiplicityRule) -> Self {
        Self {
            generator,
            k_list,
            density,
            multiplicity_rule: rule,
            c: 1.0,
            mesh_n: 20_000,
            seed: 0,
            output_path: None,
            hole: None,
            separate: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k_list.is_empty() {
            return bad("k_list is empty".into());
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k_list must be strictly increasing".into());
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k == 0 || k > MAX_DEGREE) {
            return bad(format!("k = {k} outside 1..={MAX_DEGREE}"));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density must be positive, got {}", self.density));
        }
        if self.mesh_n < MIN_MESH {
            return bad(format!("mesh_n must be at least {MIN_MESH}, got {}", self.mesh_n));
        }
        if !self.c.is_finite() {
            return bad("c must be finite".into());
        }
        match self.multiplicity_rule {
            MultiplicityRule::Uniform { m: 0 } | MultiplicityRule::RandomBounded { m_max: 0, .. } => {
                return bad("multiplicities must be at least 1".into())
            }
            _ => {}
        }
        for &k in &self.k_list {
            let m = self.multiplicity_rule.max_at(k);
            if m * m > k {
                return bad(format!("multiplicity {m} exceeds sqrt(k) at k = {k}"));
            }
        }
        if let Some(h) = &self.hole {
            if !(0.0..=1.0).contains(&h.radius) {
                return bad(format!("hole radius {} outside [0, 1]", h.radius));
            }
        }
        if let Some(c) = self.separate {
            if !c.is_finite() {
                return bad("separation c must be finite".into());
            }
        }
        Ok(())
    }
}

fn rng_for(seed: u64, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn multiplicities(cfg: &ExperimentConfig, k: usize) -> Vec<usize> {
    let target = cfg.density * k as f64 - 1e-9;
    let mut out = Vec::new();
    let mut total = 0usize;
    let mut rng = match cfg.multiplicity_rule {
        MultiplicityRule::RandomBounded { seed, .. } => Some(rng_for(seed, k)),
        _ => None,
    };
    while (total as f64) < target {
        let m = match cfg.multiplicity_rule {
            MultiplicityRule::Uniform { m } => m,
            MultiplicityRule::SqrtK => crate::annex::isqrt(k).max(1),
            MultiplicityRule::RandomBounded { m_max, .. } => rng
                .as_mut()
                .expect("seeded")
                .random_range(1..=m_max),
        };
        out.push(m);
        total += m;
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

fn to_point(v: [f64; 3]) -> Result<PlanePoint> {
    PlanePoint::from_unit_vector(v)
        .ok_or_else(|| Error::Domain("generated node at the projection pole".into()))
}

fn perturb(points: &mut [PlanePoint], k: usize, seed: u64) -> Result<()> {
    let mut rng = rng_for(seed, k);
    let d_max = PERTURBATION_SCALE / (k as f64).sqrt();
    for p in points.iter_mut() {
        let d = (d_max * rng.random::<f64>()).min(1.0);
        let toward = random_unit(&mut rng);
        let theta = 2.0 * d.asin();
        *p = to_point(rotate_towards(p.to_unit_vector(), toward, theta))?;
    }
    Ok(())
}

/// Greedy grouping of simple nodes: each unassigned node takes its `m − 1`
/// nearest unassigned neighbours and the group becomes one node of
/// multiplicity `m` at the normalized centroid.
fn cluster(points: &[PlanePoint], sizes: &[usize]) -> Result<Vec<Node>> {
    let vs: Vec<[f64; 3]> = points.iter().map(|p| p.to_unit_vector()).collect();
    let mut free = vec![true; vs.len()];
    let mut out = Vec::with_capacity(sizes.len());
    let mut next = 0;
    for &m in sizes {
        while next < vs.len() && !free[next] {
            next += 1;
        }
        if next == vs.len() {
            break;
        }
        free[next] = false;
        let mut group = vec![next];
        let mut cand: Vec<(f64, usize)> = (0..vs.len())
            .filter(|&i| free[i])
            .map(|i| (-dot3(vs[next], vs[i]), i))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in cand.iter().take(m - 1) {
            free[i] = false;
            group.push(i);
        }
        let mut c = [0.0; 3];
        for &i in &group {
            for (a, b) in c.iter_mut().zip(vs[i]) {
                *a += b;
            }
        }
        let centroid = if dot3(c, c) > 0.0 { normalize3(c) } else { vs[next] };
        out.push(Node::new(to_point(centroid)?, group.len()));
    }
    Ok(out)
}

fn dilated(node: &Node, k: usize, c: f64) -> Option<ChordalDisk> {
    let r = (node.m as f64).sqrt() + c;
    (r > 0.0)
        .then(|| ChordalDisk::from_raw_radius(node.point, r / (k as f64).sqrt()))
        .flatten()
}

/// Keeps a node only if its dilated disk misses every disk kept so far.
pub fn thin_to_separation(x: &MultiplicityArray, c: f64) -> Result<MultiplicityArray> {
    let k = x.k();
    let mut kept: Vec<(Node, Option<ChordalDisk>)> = Vec::new();
    for n in x.nodes() {
        let d = dilated(n, k, c);
        let ok = match &d {
            None => true,
            Some(d) => kept
                .iter()
                .filter_map(|(_, e)| e.as_ref())
                .all(|e| caps_disjoint(d, e).disjoint),
        };
        if ok {
            kept.push((*n, d));
        }
    }
    MultiplicityArray::new(k, kept.into_iter().map(|(n, _)| n).collect())
}

/// The array for one level `k` of the experiment. Deterministic in `(cfg, k)`.
pub fn generate_array(cfg: &ExperimentConfig, k: usize) -> Result<MultiplicityArray> {
    cfg.validate()?;
    let mut x = match &cfg.generator {
        Generator::FromFile { path } => {
            let loaded = MultiplicityArray::load(path)?;
            MultiplicityArray::new(k, loaded.nodes().to_vec())?
        }
        Generator::Fibonacci | Generator::Perturbed => {
            let ms = multiplicities(cfg, k);
            let mut pts = fibonacci_points(ms.len());
            if cfg.generator == Generator::Perturbed {
                perturb(&mut pts, k, cfg.seed)?;
            }
            MultiplicityArray::new(k, pts.into_iter().zip(ms).map(|(p, m)| Node::new(p, m)).collect())?
        }
        Generator::Clustered => {
            let ms = multiplicities(cfg, k);
            let simple: usize = ms.iter().sum();
            let pts = fibonacci_points(simple);
            MultiplicityArray::new(k, cluster(&pts, &ms)?)?
        }
    };
    if let Some(h) = &cfg.hole {
        let nodes = x
            .nodes()
            .iter()
            .filter(|n| chordal_distance(n.point, h.center) > h.radius)
            .cloned()
            .collect();
        x = MultiplicityArray::new(k, nodes)?;
    }
    if let Some(c) = cfg.separate {
        x = thin_to_separation(&x, c)?;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub total_multiplicity: usize,
    pub nodes: usize,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    #[serde(with = "opt_extended")]
    pub condition: Option<f64>,
    pub interpolation_constant: Option<f64>,
    pub overlap_count: Option<usize>,
    pub margin_plus: Option<f64>,
    pub margin_minus: Option<f64>,
    pub uncovered_plus: Option<f64>,
    pub uncovered_minus: Option<f64>,
    pub k_uncovered_zero: Option<f64>,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

mod opt_extended {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(transparent)]
    struct W(#[serde(with = "super::serde_extended_f64")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

fn run_row(cfg: &ExperimentConfig, k: usize) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        k,
        total_multiplicity: 0,
        nodes: 0,
        lower_bound: None,
        upper_bound: None,
        condition: None,
        interpolation_constant: None,
        overlap_count: None,
        margin_plus: None,
        margin_minus: None,
        uncovered_plus: None,
        uncovered_minus: None,
        k_uncovered_zero: None,
        wall_time_ms: 0.0,
        error: None,
    };
    let mut errors = Vec::new();
    match generate_array(cfg, k) {
        Err(e) => errors.push(format!("generate: {e}")),
        Ok(x) => {
            row.total_multiplicity = x.total_multiplicity();
            row.nodes = x.len();
            match frame_bounds(&x) {
                Ok(f) => {
                    row.lower_bound = Some(f.lower_bound);
                    row.upper_bound = Some(f.upper_bound);
                    row.condition = Some(f.condition);
                }
                Err(e) => errors.push(format!("frame: {e}")),
            }
            if x.total_multiplicity() <= k + 1 {
                match interpolation_constant(&x) {
                    Ok(v) => row.interpolation_constant = Some(v),
                    Err(e) => errors.push(format!("interpolation: {e}")),
                }
            }
            let g: GeometryReport = geometry_report(&x, cfg.c, cfg.mesh_n);
            row.overlap_count = Some(g.overlap_count);
            row.margin_plus = g.margin_plus;
            row.margin_minus = g.margin_minus;
            row.uncovered_plus = Some(g.uncovered_plus);
            row.uncovered_minus = Some(g.uncovered_minus);
            row.k_uncovered_zero = Some(g.k_uncovered_zero);
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    row
}

/// One row per `k`, computed concurrently and returned in `k` order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    Ok(cfg.k_list.par_iter().map(|&k| run_row(cfg, k)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: [&str; 15] = [
    "k",
    "total_multiplicity",
    "nodes",
    "lower_bound",
    "upper_bound",
    "condition",
    "interpolation_constant",
    "overlap_count",
    "margin_plus",
    "margin_minus",
    "uncovered_plus",
    "uncovered_minus",
    "k_uncovered_zero",
    "wall_time_ms",
    "error",
];

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(v) => v.to_string(),
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.k.to_string(),
            r.total_multiplicity.to_string(),
            r.nodes.to_string(),
            fmt_opt(r.lower_bound),
            fmt_opt(r.upper_bound),
            fmt_opt(r.condition),
            fmt_opt(r.interpolation_constant),
            r.overlap_count.map(|v| v.to_string()).unwrap_or_default(),
            fmt_opt(r.margin_plus),
            fmt_opt(r.margin_minus),
            fmt_opt(r.uncovered_plus),
            fmt_opt(r.uncovered_minus),
            fmt_opt(r.k_uncovered_zero),
            format!("{:.3}", r.wall_time_ms),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        f(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_rows(rows: &[SweepRow], path: &Path, format: OutputFormat) -> Result<()> {
    write_atomic(path, |w| match format {
        OutputFormat::Csv => write_csv(rows, w),
        OutputFormat::Json => write_json(rows, w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(generator: Generator, density: f64, m: usize) -> ExperimentConfig {
        ExperimentConfig::new(generator, vec![100], density, MultiplicityRule::Uniform { m })
    }

    #[test]
    fn fibonacci_counts() {
        let x = generate_array(&cfg(Generator::Fibonacci, 1.2, 1), 100).unwrap();
        assert_eq!(x.len(), 120);
        assert_eq!(x.total_multiplicity(), 120);
    }

    #[test]
    fn clustered_counts() {
        let x = generate_array(&cfg(Generator::Clustered, 1.2, 4), 100).unwrap();
        assert_eq!(x.len(), 30);
        assert!(x.nodes().iter().all(|n| n.m == 4));
        assert_eq!(x.total_multiplicity(), 120);
    }

    #[test]
    fn deterministic() {
        for g in [Generator::Fibonacci, Generator::Perturbed, Generator::Clustered] {
            let c = cfg(g, 1.1, 1);
            assert_eq!(generate_array(&c, 100).unwrap(), generate_array(&c, 100).unwrap());
        }
        let mut c = cfg(Generator::Perturbed, 1.0, 1);
        c.multiplicity_rule = MultiplicityRule::RandomBounded { m_max: 3, seed: 9 };
        let a = generate_array(&c, 100).unwrap();
        assert_eq!(a, generate_array(&c, 100).unwrap());
        assert!(a.total_multiplicity() >= 100);
        assert!(a.nodes().iter().all(|n| (1..=3).contains(&n.m)));
    }

    #[test]
    fn perturbation_is_bounded() {
        let base = generate_array(&cfg(Generator::Fibonacci, 1.0, 1), 100).unwrap();
        let moved = generate_array(&cfg(Generator::Perturbed, 1.0, 1), 100).unwrap();
        for (a, b) in base.nodes().iter().zip(moved.nodes()) {
            assert!(chordal_distance(a.point, b.point) <= PERTURBATION_SCALE / 10.0 + 1e-12);
        }
    }

    #[test]
    fn config_errors() {
        let mut c = cfg(Generator::Fibonacci, 1.0, 11);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.multiplicity_rule = MultiplicityRule::Uniform { m: 1 };
        c.k_list = vec![100, 64];
        assert!(c.validate().is_err());
        c.k_list = vec![64, 100];
        c.mesh_n = 10;
        assert!(c.validate().is_err());
        c.mesh_n = 1000;
        c.density = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hole_and_separation() {
        let mut c = cfg(Generator::Fibonacci, 1.2, 1);
        c.hole = Some(Hole {
            center: PlanePoint::ORIGIN,
            radius: 0.2,
        });
        let x = generate_array(&c, 100).unwrap();
        assert!(x.len() < 120);
        assert!(x
            .nodes()
            .iter()
            .all(|n| chordal_distance(n.point, PlanePoint::ORIGIN) > 0.2));
        c.hole = None;
        c.separate = Some(1.0);
        let x = generate_array(&c, 100).unwrap();
        assert!(crate::geometry::separation_check(&x, 1.0).disjoint);
    }

    #[test]
    fn config_json_roundtrip() {
        let mut c = cfg(Generator::FromFile { path: "a.json".into() }, 1.0, 1);
        c.multiplicity_rule = MultiplicityRule::RandomBounded { m_max: 2, seed: 4 };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&s).unwrap(), c);
    }
}
