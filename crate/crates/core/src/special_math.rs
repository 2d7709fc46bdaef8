//! Gamma-family functions, binomial coefficients and a truncated-series
//! accumulator.
//!
//! The lemma evaluations multiply large gamma values against tiny
//! exponentials, so besides the plain functions this module exposes
//! log-domain variants ([`ln_gamma`], [`ln_gamma_lower`],
//! [`ln_gamma_upper`]) that never form the large intermediate.

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Iteration cap for the incomplete-gamma series and continued fraction.
const MAX_ITER: usize = 100_000;
const EPS: f64 = 1e-17;
const TINY: f64 = 1e-300;

/// Largest `n` for which [`binom`] is exact in `u64` for every `k`.
pub const BINOM_MAX_N: u64 = 67;

/// Stopping rule for [`sum_series`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(domain("SeriesControl", "rel_tol", rel_tol));
        }
        if max_terms == 0 {
            return Err(domain("SeriesControl", "max_terms", 0.0));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 200,
        }
    }
}

/// Result of a truncated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms_used: usize,
    /// `false` when `max_terms` was reached before the tolerance.
    pub converged: bool,
}

/// Number of consecutive sub-tolerance terms required to stop.
const SERIES_QUIET_RUN: usize = 3;

/// Sums `term(0) + term(1) + ...` until three consecutive terms satisfy
/// `|term| <= rel_tol * |partial|`, or `max_terms` is reached.
pub fn sum_series<F>(mut term: F, ctrl: SeriesControl) -> SeriesSum
where
    F: FnMut(usize) -> f64,
{
    let mut sum = 0.0;
    let mut quiet = 0;
    for s in 0..ctrl.max_terms {
        let t = term(s);
        sum += t;
        if t.abs() <= ctrl.rel_tol * sum.abs() {
            quiet += 1;
            if quiet == SERIES_QUIET_RUN {
                return SeriesSum {
                    value: sum,
                    terms_used: s + 1,
                    converged: true,
                };
            }
        } else {
            quiet = 0;
        }
    }
    SeriesSum {
        value: sum,
        terms_used: ctrl.max_terms,
        converged: false,
    }
}

fn check_shape(function: &'static str, a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(domain(function, "a", a))
    }
}

fn check_arg(function: &'static str, x: f64) -> Result<()> {
    // +inf is allowed: Υ(a, ∞) = Γ(a)
    if x >= 0.0 {
        Ok(())
    } else {
        Err(domain(function, "x", x))
    }
}

/// ln Γ(a) for a > 0 (Lanczos, g = 7).
pub fn ln_gamma(a: f64) -> Result<f64> {
    check_shape("ln_gamma", a)?;
    Ok(ln_gamma_unchecked(a))
}

pub(crate) fn ln_gamma_unchecked(a: f64) -> f64 {
    if a < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * a).sin()).ln() - ln_gamma_unchecked(1.0 - a);
    }
    if a == a.floor() && a <= 30.0 {
        return ln_factorial(a as u64 - 1);
    }
    let x = a - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + sum.ln()
}

/// ln(n!) with exact products for small n.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 30 {
        factorial(n).ln()
    } else {
        ln_gamma_unchecked(n as f64 + 1.0)
    }
}

/// n! as f64 (exact up to 22!, correctly rounded products beyond).
pub fn factorial(n: u64) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Γ(a). Integer arguments return (a − 1)! by direct product.
pub fn gamma_complete(a: f64) -> Result<f64> {
    check_shape("gamma_complete", a)?;
    if a == a.floor() && a <= 171.0 {
        return Ok(factorial(a as u64 - 1));
    }
    if a < 0.5 {
        let pi = std::f64::consts::PI;
        return Ok(pi / ((pi * a).sin() * gamma_complete(1.0 - a)?));
    }
    Ok(ln_gamma_unchecked(a).exp())
}

/// Regularized pair (P(a,x), Q(a,x)).
pub fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    check_shape("gamma_pq", a)?;
    check_arg("gamma_pq", x)?;
    Ok(pq_unchecked(a, x))
}

/// Regularized lower incomplete gamma P(a, x) = Υ(a, x) / Γ(a).
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    gamma_pq(a, x).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    gamma_pq(a, x).map(|(_, q)| q)
}

pub(crate) fn pq_unchecked(a: f64, x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    if x < a + 1.0 {
        let p = (lower_series_ln(a, x) - ln_gamma_unchecked(a)).exp();
        (p, 1.0 - p)
    } else {
        let q = (upper_cf_ln(a, x) - ln_gamma_unchecked(a)).exp();
        (1.0 - q, q)
    }
}

/// ln Υ(a, x) via the power series; accurate for x < a + 1.
fn lower_series_ln(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    -x + a * x.ln() + sum.ln()
}

/// ln Γ(a, x) via the Legendre continued fraction (modified Lentz);
/// accurate for x ≥ a + 1.
fn upper_cf_ln(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    -x + a * x.ln() + h.ln()
}

/// Upper incomplete gamma Γ(a, x) = ∫ₓ^∞ t^{a−1} e^{−t} dt.
pub fn gamma_upper(a: f64, x: f64) -> Result<f64> {
    check_shape("gamma_upper", a)?;
    check_arg("gamma_upper", x)?;
    let (_, q) = pq_unchecked(a, x);
    Ok(gamma_complete(a)? * q)
}

/// Lower incomplete gamma Υ(a, x) = Γ(a) − Γ(a, x).
pub fn gamma_lower(a: f64, x: f64) -> Result<f64> {
    check_shape("gamma_lower", a)?;
    check_arg("gamma_lower", x)?;
    let (p, _) = pq_unchecked(a, x);
    Ok(gamma_complete(a)? * p)
}

/// ln Υ(a, x); `-inf` at x = 0.
pub fn ln_gamma_lower(a: f64, x: f64) -> Result<f64> {
    check_shape("ln_gamma_lower", a)?;
    check_arg("ln_gamma_lower", x)?;
    Ok(ln_lower_unchecked(a, x))
}

pub(crate) fn ln_lower_unchecked(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x.is_infinite() {
        return ln_gamma_unchecked(a);
    }
    if x < a + 1.0 {
        lower_series_ln(a, x)
    } else {
        let q = (upper_cf_ln(a, x) - ln_gamma_unchecked(a)).exp();
        ln_gamma_unchecked(a) + (-q).ln_1p()
    }
}

/// ln Γ(a, x); `-inf` as x → ∞.
pub fn ln_gamma_upper(a: f64, x: f64) -> Result<f64> {
    check_shape("ln_gamma_upper", a)?;
    check_arg("ln_gamma_upper", x)?;
    Ok(ln_upper_unchecked(a, x))
}

pub(crate) fn ln_upper_unchecked(a: f64, x: f64) -> f64 {
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    if x == 0.0 {
        return ln_gamma_unchecked(a);
    }
    if x >= a + 1.0 {
        upper_cf_ln(a, x)
    } else {
        let p = (lower_series_ln(a, x) - ln_gamma_unchecked(a)).exp();
        ln_gamma_unchecked(a) + (-p).ln_1p()
    }
}

/// Exact binomial coefficient C(n, k) for n ≤ [`BINOM_MAX_N`].
pub fn binom(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Err(domain("binom", "k", k as f64));
    }
    if n > BINOM_MAX_N {
        return Err(domain("binom", "n", n as f64));
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        // r * (n - i) is divisible by (i + 1) at every step
        r = r * u128::from(n - i) / u128::from(i + 1);
    }
    u64::try_from(r).map_err(|_| domain("binom", "n", n as f64))
}
