//! Log-Gamma, regularized incomplete beta, incomplete binomial sums and a
//! little quadrature.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Continued-fraction iteration cap for the incomplete beta.
const BETA_CF_MAX_ITER: usize = 10_000;

/// Binomials up to this row are formed exactly before taking logs.
const EXACT_BINOMIAL_MAX: u64 = 66;

/// Below this both shape parameters are handled without the Stirling split.
const LARGE_SHAPE: f64 = 10.0;

/// Remainder `ln Γ(x) − [(x−½)ln x − x + ½ln 2π]`, accurate for `x ≥ 10`.
pub fn stirling_correction(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs a positive argument, got {x}");
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let mut y = x;
    let mut prod = 1.0;
    while y < LARGE_SHAPE {
        prod *= y;
        y += 1.0;
    }
    (y - 0.5) * y.ln() - y + LN_SQRT_2PI + stirling_correction(y) - prod.ln()
}

/// `ln C(k, j)`.
pub fn log_binomial(k: u64, j: u64) -> Result<f64> {
    if j > k {
        return domain(format!("binomial index {j} exceeds {k}"));
    }
    if j == 0 || j == k {
        return Ok(0.0);
    }
    if k <= EXACT_BINOMIAL_MAX {
        // exact integer arithmetic, then a single rounding
        let j = j.min(k - j);
        let mut c: u128 = 1;
        for i in 0..j {
            c = c * (k - i) as u128 / (i + 1) as u128;
        }
        return Ok((c as f64).ln());
    }
    // through the beta function, whose large-shape form never builds ln Γ(k)
    let (k, j) = (k as f64, j as f64);
    Ok(-(k + 1.0).ln() - ln_beta(j + 1.0, k - j + 1.0))
}

/// Same as [`log_binomial`] for indices already known to be in range.
pub(crate) fn ln_choose(k: usize, j: usize) -> f64 {
    log_binomial(k as u64, j as u64).expect("index in range")
}

/// `ln β(a, b)` for `a, b > 0`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let s = lo + hi;
    if lo >= LARGE_SHAPE {
        lo * (lo / s).ln()
            + hi * (hi / s).ln()
            + 0.5 * (2.0 * PI * s / (lo * hi)).ln()
            + stirling_correction(lo)
            + stirling_correction(hi)
            - stirling_correction(s)
    } else if hi >= LARGE_SHAPE {
        ln_gamma(lo) + ln_gamma_ratio(hi, lo)
    } else {
        ln_gamma(a) + ln_gamma(b) - ln_gamma(s)
    }
}

// ln Γ(b) − ln Γ(b + a) for b ≥ 10, without forming either term.
fn ln_gamma_ratio(b: f64, a: f64) -> f64 {
    let s = a + b;
    -(b - 0.5) * (a / b).ln_1p() - a * s.ln() + a + stirling_correction(b)
        - stirling_correction(s)
}

/// `ln(1+u) − u`, accurate near zero.
pub fn log1pmx(u: f64) -> f64 {
    if u.abs() < 0.25 {
        // −u²/2 + u³/3 − …
        let mut term = u;
        let mut acc = 0.0;
        let mut n = 2.0;
        loop {
            term *= -u;
            let add = term / n;
            acc += add;
            if add.abs() <= 1e-17 * acc.abs() || n > 80.0 {
                break;
            }
            n += 1.0;
        }
        acc
    } else {
        u.ln_1p() - u
    }
}

// ln[x^a (1−x)^b / β(a,b)], for 0 < x < 1.
fn ln_beta_prefactor(a: f64, b: f64, x: f64) -> f64 {
    if a >= LARGE_SHAPE && b >= LARGE_SHAPE {
        let s = a + b;
        let (x0, y0) = (a / s, b / s);
        let u = (x - x0) / x0;
        let v = -(x - x0) / y0;
        a * log1pmx(u) + b * log1pmx(v)
            - 0.5 * (2.0 * PI * s / (a * b)).ln()
            - (stirling_correction(a) + stirling_correction(b) - stirling_correction(s))
    } else {
        a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b)
    }
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        what: "incomplete beta continued fraction",
        iterations: BETA_CF_MAX_ITER,
    })
}

fn check_beta_args(a: f64, b: f64, x: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return domain(format!("incomplete beta shapes must be positive, got ({a}, {b})"));
    }
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("incomplete beta argument {x} outside [0, 1]"));
    }
    Ok(())
}

/// Regularized incomplete beta `I(a, b; x)`.
pub fn incomplete_beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    check_beta_args(a, b, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        (ln_beta_prefactor(a, b, x)).exp() * beta_cf(a, b, x)? / a
    } else {
        1.0 - (ln_beta_prefactor(b, a, 1.0 - x)).exp() * beta_cf(b, a, 1.0 - x)? / b
    };
    Ok(v.clamp(0.0, 1.0))
}

/// `ln I(a, b; x)`, usable where `I` underflows. Returns `-∞` at `x = 0`.
pub fn ln_incomplete_beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    check_beta_args(a, b, x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_beta_prefactor(a, b, x) + beta_cf(a, b, x)?.ln() - a.ln())
    } else {
        let tail = (ln_beta_prefactor(b, a, 1.0 - x)).exp() * beta_cf(b, a, 1.0 - x)? / b;
        Ok((-tail.min(1.0)).ln_1p())
    }
}

/// Neumaier (improved Kahan) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a sequence.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<NeumaierSum>().total()
}

fn check_binomial_args(k: usize, m: usize, x: f64) -> Result<()> {
    if m < 1 || m > k + 1 {
        return domain(format!("need 1 <= m <= k+1, got k = {k}, m = {m}"));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return domain(format!("F_(k,m) argument must be finite and >= 0, got {x}"));
    }
    Ok(())
}

/// `ln F_{k,m}(x)` where `F_{k,m}(x) = (1+x)^{−k} Σ_{j<m} C(k,j) x^j`.
pub fn ln_incomplete_binomial_f(k: usize, m: usize, x: f64) -> Result<f64> {
    check_binomial_args(k, m, x)?;
    if x == 0.0 || m == k + 1 {
        return Ok(0.0);
    }
    let lx = x.ln();
    let l1 = k as f64 * x.ln_1p();
    let logs: Vec<f64> = (0..m)
        .map(|j| ln_choose(k, j) + j as f64 * lx - l1)
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s = compensated_sum(logs.iter().map(|l| (l - top).exp()));
    Ok((top + s.ln()).min(0.0))
}

/// `F_{k,m}(x)`, in `(0, 1]`.
pub fn incomplete_binomial_f(k: usize, m: usize, x: f64) -> Result<f64> {
    Ok(ln_incomplete_binomial_f(k, m, x)?.exp().min(1.0))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // P_n(x) and P_n'(x) by the three-term recurrence
    let legendre = |x: f64| {
        let (mut p0, mut p1) = (1.0, x);
        for l in 2..=n {
            let lf = l as f64;
            let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
            p0 = p1;
            p1 = p2;
        }
        let dp = if n == 1 {
            1.0
        } else {
            n as f64 * (x * p1 - p0) / (x * x - 1.0)
        };
        (p1, dp)
    };
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dp) = legendre(x);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]` to absolute
/// tolerance `tol`, comparing 10- and 20-point rules on bisected panels.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let lo = gauss_legendre(10);
    let hi = gauss_legendre(20);
    let rule = |rule: &(Vec<f64>, Vec<f64>), l: f64, r: f64| {
        let (mid, half) = (0.5 * (l + r), 0.5 * (r - l));
        compensated_sum(
            rule.0
                .iter()
                .zip(&rule.1)
                .map(|(x, w)| w * f(mid + half * x)),
        ) * half
    };
    let mut stack = vec![(a, b, 0u32)];
    let mut total = NeumaierSum::new();
    let width = (b - a).abs();
    while let Some((l, r, depth)) = stack.pop() {
        let coarse = rule(&lo, l, r);
        let fine = rule(&hi, l, r);
        let local_tol = tol * (r - l).abs() / width;
        if (fine - coarse).abs() <= local_tol.max(f64::EPSILON * fine.abs()) {
            total.add(fine);
        } else if depth >= 50 {
            return Err(Error::NoConvergence {
                what: "adaptive quadrature",
                iterations: 50,
            });
        } else {
            let mid = 0.5 * (l + r);
            stack.push((mid, r, depth + 1));
            stack.push((l, mid, depth + 1));
        }
    }
    Ok(total.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_integers() {
        let mut lf = 0.0f64;
        for n in 1..60u32 {
            assert!((ln_gamma(n as f64) - lf).abs() <= 1e-13 * lf.max(1.0), "n = {n}");
            lf += (n as f64).ln();
        }
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_binomial_examples() {
        assert_eq!(log_binomial(17, 0).unwrap(), 0.0);
        assert!((log_binomial(4, 2).unwrap() - 6f64.ln()).abs() < 1e-15);
        assert!(log_binomial(3, 4).is_err());
    }

    #[test]
    fn log_binomial_matches_exact_integers() {
        for k in 0..=60u64 {
            let mut c: u128 = 1;
            for j in 0..=k {
                let got = log_binomial(k, j).unwrap().exp();
                let rel = (got - c as f64).abs() / c as f64;
                assert!(rel < 1e-13, "C({k},{j})");
                if k <= 40 {
                    assert_eq!(got.round() as u128, c);
                }
                c = c * (k - j) as u128 / (j + 1) as u128;
            }
        }
    }

    #[test]
    fn ln_beta_agrees_across_branches() {
        for &(a, b) in &[(3.0, 25.0), (9.5, 10.5), (12.0, 40.0), (0.7, 300.0)] {
            let direct = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
            assert!((ln_beta(a, b) - direct).abs() < 1e-11 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn incomplete_beta_examples() {
        assert_eq!(incomplete_beta_reg(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(incomplete_beta_reg(2.0, 3.0, 1.0).unwrap(), 1.0);
        assert!((incomplete_beta_reg(1.0, 3.0, 0.5).unwrap() - 0.875).abs() < 1e-15);
        assert!(incomplete_beta_reg(0.0, 1.0, 0.5).is_err());
        assert!(incomplete_beta_reg(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn log_incomplete_beta_tiny_values() {
        // I(k+1, 1; x) = x^{k+1}
        let v = ln_incomplete_beta_reg(801.0, 1.0, 0.05).unwrap();
        assert!((v - 801.0 * 0.05f64.ln()).abs() < 1e-10 * v.abs());
    }

    #[test]
    fn binomial_f_examples() {
        assert_eq!(incomplete_binomial_f(50, 10, 0.0).unwrap(), 1.0);
        assert_eq!(incomplete_binomial_f(50, 51, 3.0).unwrap(), 1.0);
        assert!(incomplete_binomial_f(50, 0, 1.0).is_err());
        assert!(incomplete_binomial_f(50, 52, 1.0).is_err());
        assert!(incomplete_binomial_f(50, 10, -1.0).is_err());
    }

    #[test]
    fn binomial_f_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = incomplete_binomial_f(50, 10, i as f64 * 0.01).unwrap();
            assert!(v < prev || i == 0);
            prev = v;
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_quadrature() {
        let v = integrate_adaptive(|t| (-t * t).exp(), 0.0, 6.0, 1e-14).unwrap();
        assert!((v - 0.5 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn log1pmx_branches_meet() {
        for u in [-0.2499f64, 0.2499, 1e-8, -1e-8] {
            let direct = u.ln_1p() - u;
            assert!((log1pmx(u) - direct).abs() < 1e-15 + 1e-12 * direct.abs());
        }
    }
}
