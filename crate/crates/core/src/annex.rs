//! Machine-checked incomplete-beta and binomial inequalities.
//!
//! Every inequality is stored as `lhs ≤ rhs` on a log scale, so the margin
//! `rhs − lhs` is non-negative exactly when it holds. Unspecified existence
//! constants are replaced by floors from a committed baseline table.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    compensated_sum, integrate_adaptive, ln_beta, ln_incomplete_beta_reg,
    ln_incomplete_binomial_f,
};

/// Largest `m/k` treated as inside the `m/k → 0` regime.
pub const REGIME_MAX_RATIO: f64 = 0.1;

/// Absolute tolerance of the tip integral, relative to the peak of `ψ`.
pub const TIP_QUADRATURE_TOL: f64 = 1e-14;

/// Offset used to approach open interval endpoints.
const EDGE: f64 = 1e-9;

/// Interior sample fractions used when a sup over `s` is required.
const S_SAMPLES: usize = 16;

const BASELINE_JSON: &str = include_str!("../data/annex_baseline.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InequalityId {
    Lemma0,
    TipBeta,
    EstALower,
    EstAUpper,
    IncBetaA,
    IncBetaB,
    BinomialFloor,
}

impl InequalityId {
    pub const ALL: [InequalityId; 7] = [
        Self::Lemma0,
        Self::TipBeta,
        Self::EstALower,
        Self::EstAUpper,
        Self::IncBetaA,
        Self::IncBetaB,
        Self::BinomialFloor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lemma0 => "LEMMA0",
            Self::TipBeta => "TIP_BETA",
            Self::EstALower => "EST_A_LOWER",
            Self::EstAUpper => "EST_A_UPPER",
            Self::IncBetaA => "INC_BETA_A",
            Self::IncBetaB => "INC_BETA_B",
            Self::BinomialFloor => "BINOMIAL_FLOOR",
        }
    }

    /// Whether the inequality is parametrized by the dilation `a`.
    pub fn needs_a(self) -> bool {
        matches!(
            self,
            Self::EstALower | Self::EstAUpper | Self::IncBetaA | Self::IncBetaB
        )
    }

    /// Whether one side is an empirically recorded floor.
    pub fn uses_floor(self) -> bool {
        matches!(self, Self::TipBeta | Self::IncBetaA | Self::BinomialFloor)
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown inequality id {s:?}")))
    }
}

/// Parameters of one evaluation. Unset `j` or `s` means "worst case".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnexParams {
    pub k: usize,
    pub m: usize,
    pub j: Option<usize>,
    pub a: Option<f64>,
    pub s: Option<f64>,
    pub x: Option<f64>,
}

impl AnnexParams {
    pub fn new(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            j: None,
            a: None,
            s: None,
            x: None,
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_j(mut self, j: usize) -> Self {
        self.j = Some(j);
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_x(mut self, x: f64) -> Self {
        self.x = Some(x);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub inequality_id: InequalityId,
    /// The evaluated point; worst-case `j`, `s`, `x` are filled in.
    pub parameters: AnnexParams,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

impl MarginReport {
    fn new(id: InequalityId, parameters: AnnexParams, lhs: f64, rhs: f64) -> Result<Self> {
        let margin = rhs - lhs;
        if !(lhs.is_finite() && rhs.is_finite()) {
            return Err(Error::Accuracy {
                what: "annex evaluation produced a non-finite side",
                residual: margin,
                tolerance: 0.0,
            });
        }
        Ok(Self {
            inequality_id: id,
            parameters,
            lhs,
            rhs,
            margin,
            holds: margin >= 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub id: InequalityId,
    pub a: Option<f64>,
    pub k_min: usize,
    pub m_min: usize,
    pub floor: Option<f64>,
}

/// Thresholds `k_min`, `m_min` and floors per `(id, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub entries: Vec<BaselineEntry>,
}

impl Baseline {
    /// The table shipped with the crate.
    pub fn committed() -> Self {
        serde_json::from_str(BASELINE_JSON).expect("committed baseline parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Writes the table atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, self)?;
        std::io::Write::write_all(&mut tmp, b"\n")?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn lookup(&self, id: InequalityId, a: Option<f64>) -> Option<&BaselineEntry> {
        self.entries.iter().find(|e| {
            e.id == id
                && match (e.a, a) {
                    (None, None) => true,
                    (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
                    _ => false,
                }
        })
    }
}

fn regime<T>(id: InequalityId, reason: impl Into<String>) -> Result<T> {
    Err(Error::Regime {
        id: id.as_str().to_string(),
        reason: reason.into(),
    })
}

/// Largest `m` admitted for degree `k`.
pub fn regime_cap(k: usize) -> usize {
    (k as f64 * REGIME_MAX_RATIO).floor() as usize
}

pub(crate) fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Upper end of the `m` range on the default grid: `min(⌊√k⌋², cap(k))`.
pub fn grid_m_max(k: usize) -> usize {
    let r = isqrt(k);
    (r * r).min(regime_cap(k))
}

/// Checks the baseline thresholds, then evaluates.
pub fn verify_annex(
    id: InequalityId,
    params: &AnnexParams,
    baseline: &Baseline,
) -> Result<MarginReport> {
    let a = if id.needs_a() { params.a } else { None };
    let Some(entry) = baseline.lookup(id, a) else {
        return regime(
            id,
            match a {
                Some(a) => format!("no baseline entry for a = {a}"),
                None if id.needs_a() => "parameter a is required".to_string(),
                None => "no baseline entry".to_string(),
            },
        );
    };
    if params.k < entry.k_min {
        return regime(id, format!("k = {} below k_min = {}", params.k, entry.k_min));
    }
    if params.m < entry.m_min {
        return regime(id, format!("m = {} below m_min = {}", params.m, entry.m_min));
    }
    let ln_floor = match (id.uses_floor(), entry.floor) {
        (false, _) => 0.0,
        (true, Some(c)) if c > 0.0 => c.ln(),
        (true, _) => return regime(id, "baseline floor missing or not positive"),
    };
    evaluate(id, params, ln_floor)
}

/// Evaluates an inequality with only its structural hypotheses checked.
/// `ln_floor` is the log of the empirical constant for floor-type ids and
/// ignored otherwise.
pub fn evaluate(id: InequalityId, params: &AnnexParams, ln_floor: f64) -> Result<MarginReport> {
    let AnnexParams { k, m, .. } = *params;
    if m < 1 || k < 2 {
        return regime(id, format!("need k >= 2 and m >= 1, got k = {k}, m = {m}"));
    }
    if m > regime_cap(k) {
        return regime(
            id,
            format!("m = {m} exceeds {} = floor({REGIME_MAX_RATIO} k)", regime_cap(k)),
        );
    }
    let a = if id.needs_a() {
        match params.a {
            Some(a) if a > 0.0 && a.is_finite() => a,
            _ => return regime(id, "parameter a must be finite and positive"),
        }
    } else {
        0.0
    };
    let (kf, mf) = (k as f64, m as f64);
    match id {
        InequalityId::Lemma0 => {
            let lhs = compensated_sum((1..m).map(|j| -(-(j as f64) / kf).ln_1p()));
            let rhs = mf + (kf - mf) * (-mf / kf).ln_1p();
            MarginReport::new(id, *params, lhs, rhs)
        }
        InequalityId::TipBeta => {
            let lhs = ln_floor + ln_beta(mf + 1.0, kf - mf + 1.0);
            let rhs = ln_tip_integral(k, m)?;
            MarginReport::new(id, *params, lhs, rhs)
        }
        InequalityId::EstALower => est_a_lower(params, a),
        InequalityId::EstAUpper => est_a_upper(params, a),
        InequalityId::IncBetaA => inc_beta_a(params, a, ln_floor),
        InequalityId::IncBetaB => inc_beta_b(params, a),
        InequalityId::BinomialFloor => {
            let rho = (mf / kf) / (1.0 - mf / kf);
            let x = params.x.unwrap_or(rho);
            if !(0.0..=rho).contains(&x) {
                return regime(id, format!("x = {x} outside [0, rho = {rho}]"));
            }
            let rhs = ln_incomplete_binomial_f(k, m, x)?;
            MarginReport::new(id, AnnexParams { x: Some(x), ..*params }, ln_floor, rhs)
        }
    }
}

fn ln_psi(k: usize, m: usize, t: f64) -> f64 {
    m as f64 * t.ln() + (k - m) as f64 * (-t).ln_1p()
}

/// `ln ∫_{(m−√m)/k}^{m/k} t^m (1−t)^{k−m} dt`, integrated relative to the peak.
pub fn ln_tip_integral(k: usize, m: usize) -> Result<f64> {
    let (kf, mf) = (k as f64, m as f64);
    let peak = mf / kf;
    let lo = (mf - mf.sqrt()) / kf;
    let lp = ln_psi(k, m, peak);
    let v = integrate_adaptive(
        |t| {
            if t <= 0.0 {
                0.0
            } else {
                (ln_psi(k, m, t) - lp).exp()
            }
        },
        lo,
        peak,
        TIP_QUADRATURE_TOL,
    )?;
    Ok(lp + v.ln())
}

fn worst(reports: impl Iterator<Item = Result<MarginReport>>) -> Result<MarginReport> {
    let mut best: Option<MarginReport> = None;
    for r in reports {
        let r = r?;
        if best.as_ref().map_or(true, |b| r.margin < b.margin) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Domain("empty worst-case search".to_string()))
}

fn est_a_lower(params: &AnnexParams, a: f64) -> Result<MarginReport> {
    let id = InequalityId::EstALower;
    let (k, m) = (params.k as f64, params.m as f64);
    let lo = m - m.sqrt();
    if lo < a * a {
        return regime(id, format!("need m - sqrt(m) >= a^2, got m = {m}, a = {a}"));
    }
    let eval = |s: f64| {
        let u = s - a * s.sqrt();
        let lhs = -3.0 * a * a + m * s.ln() + (k - m) * (-s / k).ln_1p();
        let rhs = m * u.ln() + (k - m) * (-u / k).ln_1p();
        MarginReport::new(id, AnnexParams { s: Some(s), ..*params }, lhs, rhs)
    };
    match params.s {
        Some(s) => {
            if !(s > lo && s < m) {
                return regime(id, format!("s = {s} outside ({lo}, {m})"));
            }
            eval(s)
        }
        None => {
            let w = m - lo;
            let samples = (1..S_SAMPLES)
                .map(|i| lo + w * i as f64 / S_SAMPLES as f64)
                .chain([lo + w * EDGE, m - w * EDGE]);
            worst(samples.map(eval))
        }
    }
}

fn est_a_upper(params: &AnnexParams, a: f64) -> Result<MarginReport> {
    let id = InequalityId::EstAUpper;
    let (k, m) = (params.k, params.m);
    let (kf, mf) = (k as f64, m as f64);
    let a2 = a * a;
    if mf <= a2 {
        return regime(id, format!("need m > a^2, got m = {m}, a = {a}"));
    }
    let eval = |j: usize, s: f64| {
        let (jf, u) = (j as f64, s - a * s.sqrt());
        let lhs = jf * u.ln() + (kf - jf) * (-u / kf).ln_1p();
        let rhs = -0.5 * a2 + jf * s.ln() + (kf - jf) * (-s / kf).ln_1p();
        MarginReport::new(id, AnnexParams { j: Some(j), s: Some(s), ..*params }, lhs, rhs)
    };
    let js: Vec<usize> = match params.j {
        Some(j) if (m..=k).contains(&j) => vec![j],
        Some(j) => return regime(id, format!("j = {j} outside [{m}, {k}]")),
        // the margin is affine in j
        None => vec![m, k],
    };
    let ss: Vec<f64> = match params.s {
        Some(s) if s > a2 && s <= mf => vec![s],
        Some(s) => return regime(id, format!("s = {s} outside (a^2, m] = ({a2}, {mf}]")),
        None => {
            let w = mf - a2;
            (1..=S_SAMPLES)
                .map(|i| a2 + w * i as f64 / S_SAMPLES as f64)
                .chain([a2 + w * EDGE])
                .collect()
        }
    };
    worst(
        js.iter()
            .flat_map(|&j| ss.iter().map(move |&s| (j, s)))
            .map(|(j, s)| eval(j, s)),
    )
}

fn inc_beta_a(params: &AnnexParams, a: f64, ln_floor: f64) -> Result<MarginReport> {
    let id = InequalityId::IncBetaA;
    let (k, m) = (params.k, params.m);
    let (kf, mf) = (k as f64, m as f64);
    let x = (mf - a * mf.sqrt()) / kf;
    if x <= 0.0 {
        return regime(id, format!("need m > a^2, got m = {m}, a = {a}"));
    }
    let eval = |j: usize| {
        let rhs = ln_incomplete_beta_reg(j as f64 + 1.0, (k - j) as f64 + 1.0, x)?;
        MarginReport::new(id, AnnexParams { j: Some(j), x: Some(x), ..*params }, ln_floor, rhs)
    };
    match params.j {
        Some(j) if j < m => eval(j),
        Some(j) => regime(id, format!("j = {j} outside [0, {m})")),
        None => worst((0..m).map(eval)),
    }
}

fn inc_beta_b(params: &AnnexParams, a: f64) -> Result<MarginReport> {
    let id = InequalityId::IncBetaB;
    let (k, m) = (params.k, params.m);
    let (kf, mf) = (k as f64, m as f64);
    let x1 = (mf - a * mf.sqrt()) / kf;
    if x1 <= 0.0 {
        return regime(id, format!("need m > a^2, got m = {m}, a = {a}"));
    }
    let x2 = mf / kf;
    let eval = |j: usize| {
        let (p, q) = (j as f64 + 1.0, (k - j) as f64 + 1.0);
        let lhs = ln_incomplete_beta_reg(p, q, x1)?;
        let rhs = -0.5 * a * a + ln_incomplete_beta_reg(p, q, x2)?;
        MarginReport::new(id, AnnexParams { j: Some(j), x: Some(x1), ..*params }, lhs, rhs)
    };
    match params.j {
        Some(j) if (m..=k).contains(&j) => eval(j),
        Some(j) => regime(id, format!("j = {j} outside [{m}, {k}]")),
        None => worst((m..=k).map(eval)),
    }
}

/// Parameter grid for the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnexGrid {
    pub k_values: Vec<usize>,
    pub a_values: Vec<f64>,
    pub ids: Vec<InequalityId>,
    /// Explicit `m` values; by default `m_min ..= grid_m_max(k)`.
    pub m_values: Option<Vec<usize>>,
}

impl Default for AnnexGrid {
    fn default() -> Self {
        Self {
            k_values: vec![100, 200, 400, 800],
            a_values: vec![0.5, 1.0, 2.0],
            ids: InequalityId::ALL.to_vec(),
            m_values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnexRow {
    pub id: InequalityId,
    pub k: usize,
    pub m: usize,
    pub a: Option<f64>,
    pub report: Option<MarginReport>,
    pub error: Option<String>,
}

impl AnnexRow {
    pub fn failed(&self) -> bool {
        self.report.as_ref().is_some_and(|r| !r.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnexSuiteReport {
    pub rows: Vec<AnnexRow>,
}

impl AnnexSuiteReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn errors(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn evaluated(&self) -> usize {
        self.rows.iter().filter(|r| r.report.is_some()).count()
    }

    pub fn all_hold(&self) -> bool {
        self.failures() == 0
    }

    /// One CSV line per cell.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "id", "k", "m", "a", "j", "s", "x", "lhs", "rhs", "margin", "holds", "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.10e}")).unwrap_or_default();
        for row in &self.rows {
            let (j, s, x, lhs, rhs, margin, holds) = match &row.report {
                Some(r) => (
                    r.parameters.j.map(|j| j.to_string()).unwrap_or_default(),
                    opt(r.parameters.s),
                    opt(r.parameters.x),
                    format!("{:.10e}", r.lhs),
                    format!("{:.10e}", r.rhs),
                    format!("{:.10e}", r.margin),
                    r.holds.to_string(),
                ),
                None => Default::default(),
            };
            out.write_record([
                row.id.as_str().to_string(),
                row.k.to_string(),
                row.m.to_string(),
                row.a.map(|a| a.to_string()).unwrap_or_default(),
                j,
                s,
                x,
                lhs,
                rhs,
                margin,
                holds,
                row.error.clone().unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn cells(grid: &AnnexGrid, baseline: &Baseline) -> Vec<(InequalityId, usize, usize, Option<f64>)> {
    let mut out = Vec::new();
    for &id in &grid.ids {
        let a_list: Vec<Option<f64>> = if id.needs_a() {
            grid.a_values.iter().map(|&a| Some(a)).collect()
        } else {
            vec![None]
        };
        for a in a_list {
            let m_lo = baseline.lookup(id, a).map_or(1, |e| e.m_min);
            for &k in &grid.k_values {
                let ms: Vec<usize> = match &grid.m_values {
                    Some(v) => v.clone(),
                    None => (m_lo..=grid_m_max(k)).collect(),
                };
                out.extend(ms.into_iter().map(|m| (id, k, m, a)));
            }
        }
    }
    out
}

/// Runs [`verify_annex`] on every grid cell, worst case over `j` and `s`.
pub fn run_annex_suite(grid: &AnnexGrid, baseline: &Baseline) -> AnnexSuiteReport {
    let rows = cells(grid, baseline)
        .into_par_iter()
        .map(|(id, k, m, a)| {
            let mut p = AnnexParams::new(k, m);
            p.a = a;
            let (report, error) = match verify_annex(id, &p, baseline) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            AnnexRow {
                id,
                k,
                m,
                a,
                report,
                error,
            }
        })
        .collect();
    AnnexSuiteReport { rows }
}

/// Grid used to record floors: `k = 100, 200, …, 1000`, `m = 9..=81`
/// within the regime cap.
pub fn floor_grid() -> Vec<(usize, usize)> {
    (1..=10)
        .map(|i| 100 * i)
        .flat_map(|k| (9..=81usize.min(regime_cap(k))).map(move |m| (k, m)))
        .collect()
}

fn round_down_sig(v: f64, digits: i32) -> f64 {
    let e = v.log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - e);
    let mut r = (v * scale).floor() / scale;
    if r > v {
        r = ((v * scale).floor() - 1.0) / scale;
    }
    r
}

/// Recomputes the baseline: floors as rounded-down grid minima, thresholds
/// as the smallest `(k_min, m_min)` above which every cell of `grid` holds.
pub fn regenerate_baseline(grid: &AnnexGrid) -> Result<Baseline> {
    let mut entries = Vec::new();
    for &id in &InequalityId::ALL {
        let a_list: Vec<Option<f64>> = if id.needs_a() {
            grid.a_values.iter().map(|&a| Some(a)).collect()
        } else {
            vec![None]
        };
        for a in a_list {
            entries.push(if id.uses_floor() {
                floor_entry(id, a)?
            } else {
                threshold_entry(id, a, &grid.k_values)
            });
        }
    }
    Ok(Baseline { entries })
}

fn floor_entry(id: InequalityId, a: Option<f64>) -> Result<BaselineEntry> {
    let grid = floor_grid();
    let stats: Vec<f64> = grid
        .par_iter()
        .map(|&(k, m)| {
            let mut p = AnnexParams::new(k, m);
            p.a = a;
            evaluate(id, &p, 0.0).map(|r| r.margin)
        })
        .collect::<Result<_>>()?;
    let min = stats.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = round_down_sig(min.exp(), 4);
    let (k_min, m_min) = grid
        .iter()
        .fold((usize::MAX, usize::MAX), |acc, &(k, m)| (acc.0.min(k), acc.1.min(m)));
    Ok(BaselineEntry {
        id,
        a,
        k_min,
        m_min,
        floor: Some(floor),
    })
}

fn threshold_entry(id: InequalityId, a: Option<f64>, k_values: &[usize]) -> BaselineEntry {
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    let cells: Vec<(usize, usize)> = ks
        .iter()
        .flat_map(|&k| (1..=grid_m_max(k)).map(move |m| (k, m)))
        .collect();
    let bad: Vec<(usize, usize)> = cells
        .par_iter()
        .filter(|&&(k, m)| {
            let mut p = AnnexParams::new(k, m);
            p.a = a;
            !matches!(evaluate(id, &p, 0.0), Ok(r) if r.holds)
        })
        .cloned()
        .collect();
    for &k_min in &ks {
        let m_min = bad
            .iter()
            .filter(|(k, _)| *k >= k_min)
            .map(|&(_, m)| m + 1)
            .max()
            .unwrap_or(1);
        if m_min <= grid_m_max(k_min) {
            return BaselineEntry {
                id,
                a,
                k_min,
                m_min,
                floor: None,
            };
        }
    }
    let k_max = ks.last().copied().unwrap_or(0);
    BaselineEntry {
        id,
        a,
        k_min: k_max,
        m_min: grid_m_max(k_max) + 1,
        floor: None,
    }
}
