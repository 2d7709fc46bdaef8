//! Lemma-free reference values by adaptive quadrature.
//!
//! Every joint probability here has the shape ∫ f(t) F(b(t)) dt where the
//! inner factor is a Gamma CDF or survival function in closed form. Only the
//! outer dimension is integrated numerically, with a globally adaptive
//! Gauss–Kronrod 7/15 rule. Semi-infinite outer ranges are cut where the
//! Gamma tail mass drops below `abs_tol / 10`; the interval is seeded with
//! the kinks of the inner bound so the rule never straddles one.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::closed_form::cdf_direct;
use crate::error::{domain, Result};
use crate::special_math::{ln_gamma, pq_unchecked};
use crate::system_model::{derive_coeffs, DerivedCoeffs, Destination, LinkStats, RelayPair, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Cap on the number of interval bisections.
    pub max_subdivisions: usize,
    /// Equal panels each breakpoint-delimited piece starts from.
    pub initial_panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
            initial_panels: 4,
        }
    }
}

impl QuadSpec {
    pub fn check(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(domain("QuadSpec", "abs_tol", self.abs_tol));
        }
        if !(self.rel_tol > 0.0) {
            return Err(domain("QuadSpec", "rel_tol", self.rel_tol));
        }
        if self.initial_panels == 0 {
            return Err(domain("QuadSpec", "initial_panels", 0.0));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    /// Kronrod-minus-Gauss error estimate summed over the final partition.
    pub abs_err: f64,
    pub converged: bool,
}

impl QuadResult {
    fn exact(value: f64) -> Self {
        Self {
            value,
            abs_err: 0.0,
            converged: true,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the centre
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive G7/K15 over `[pts[0], pts[last]]`, seeded with every
/// interior point of `pts` as a panel edge.
pub fn integrate<F: Fn(f64) -> f64>(f: F, pts: &[f64], spec: &QuadSpec) -> Result<QuadResult> {
    spec.check()?;
    let mut heap = BinaryHeap::new();
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if !(hi > lo) {
            continue;
        }
        let n = spec.initial_panels;
        for i in 0..n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = if i + 1 == n { hi } else { lo + (hi - lo) * (i + 1) as f64 / n as f64 };
            let (value, err) = gk15(&f, a, b);
            heap.push(Panel { a, b, value, err });
        }
    }
    let mut splits = 0;
    loop {
        let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult {
                value: total,
                abs_err: err,
                converged: true,
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => return Ok(QuadResult::exact(0.0)),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if splits >= spec.max_subdivisions || !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
            return Ok(QuadResult {
                value: total,
                abs_err: err,
                converged: false,
            });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gk15(&f, a, b);
            heap.push(Panel { a, b, value, err });
        }
        splits += 1;
    }
}

/// Gamma(m, Ω/m) law of one squared gain.
#[derive(Clone, Copy)]
struct GainLaw {
    shape: f64,
    rate: f64,
    ln_norm: f64,
}

impl GainLaw {
    fn new(l: LinkStats) -> Self {
        let shape = l.shape();
        let rate = l.rate();
        Self {
            shape,
            rate,
            ln_norm: shape * rate.ln() - ln_gamma(shape).unwrap_or(f64::NAN),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if self.shape == 1.0 { self.rate } else { 0.0 };
        }
        (self.ln_norm + (self.shape - 1.0) * x.ln() - self.rate * x).exp()
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        pq_unchecked(self.shape, self.rate * x).0
    }

    fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x == f64::INFINITY {
            return 0.0;
        }
        pq_unchecked(self.shape, self.rate * x).1
    }

    /// Smallest doubling point past which the survival mass is below `mass`.
    fn tail_cut(&self, mass: f64) -> f64 {
        let mut t = self.shape / self.rate;
        while self.sf(t) > mass {
            t *= 2.0;
        }
        t
    }
}

fn sorted_points(lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
    let mut v = vec![lo, hi];
    v.extend(extra.iter().copied().filter(|p| p.is_finite() && *p > lo && *p < hi));
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Pr[linear-regime SNR < γ̄, P_j X + P_ĵ Y ≤ P_th] by quadrature over X.
///
/// Returns 1 when Θ ≤ 0, matching the lemma's convention.
pub fn quad_cdf_lin(c: &DerivedCoeffs, pair: RelayPair, spec: &QuadSpec) -> Result<QuadResult> {
    pair.x.check()?;
    pair.y.check()?;
    let g = c.gamma_bar();
    let theta = c.eps1 - c.eps4 * g;
    if theta <= 0.0 {
        return Ok(QuadResult::exact(1.0));
    }
    let (fx, fy) = (GainLaw::new(pair.x), GainLaw::new(pair.y));
    let (pj, ph, pth) = (c.p_dest, c.p_src, c.p_th);
    let upper = pth / pj;
    // relay bound Y < γ̄(ε₂ + ε₃X)/Θ meets the harvester bound at Δ₁
    let delta1 = (pth * theta - g * c.eps2 * ph) / (g * c.eps3 * ph + pj * theta);
    let hi = upper.min(fx.tail_cut(spec.abs_tol / 10.0));
    let f = |x: f64| {
        let relay = g * (c.eps2 + c.eps3 * x) / theta;
        let eh = (pth - pj * x) / ph;
        fx.pdf(x) * fy.cdf(relay.min(eh))
    };
    integrate(f, &sorted_points(0.0, hi, &[delta1]), spec)
}

/// Pr[saturated-regime SNR < γ̄, P_j X + P_ĵ Y > P_th] by quadrature over Y.
///
/// With `exact == false` the φ₅ term is dropped from the SNR, which makes
/// the outage boundary the line X = (Y − Λ₁)/Λ₂; the result then returns 1
/// when φ₁ − φ₄γ̄ ≤ 0. With `exact == true` the full quadratic boundary in X
/// is used.
pub fn quad_cdf_sat(
    c: &DerivedCoeffs,
    pair: RelayPair,
    spec: &QuadSpec,
    exact: bool,
) -> Result<QuadResult> {
    pair.x.check()?;
    pair.y.check()?;
    let g = c.gamma_bar();
    let den = c.phi1 - c.phi4 * g;
    if !exact && den <= 0.0 {
        return Ok(QuadResult::exact(1.0));
    }
    let (fx, fy) = (GainLaw::new(pair.x), GainLaw::new(pair.y));
    let (pj, ph, pth) = (c.p_dest, c.p_src, c.p_th);
    let hi = fy.tail_cut(spec.abs_tol / 10.0);
    let x_eh = |y: f64| ((pth - ph * y) / pj).max(0.0);

    if !exact {
        let l1 = c.phi2 * g / den;
        let l2 = c.phi3 * g / den;
        let delta2 = (l2 * pth + l1 * pj) / (pj + ph * l2);
        let f = |y: f64| {
            let x_snr = if l2 > 0.0 {
                (y - l1) / l2
            } else if y < l1 {
                // μ = 1: SNR bound is Y < Λ₁ regardless of X
                0.0
            } else {
                f64::INFINITY
            };
            let lo = x_snr.max(x_eh(y));
            fy.pdf(y) * if lo.is_finite() { fx.sf(lo) } else { 0.0 }
        };
        let pts = sorted_points(0.0, hi, &[l1, delta2, pth / ph]);
        return integrate(f, &pts, spec);
    }

    // φ₁XY < γ̄(φ₂X + φ₃X² + φ₄XY + φ₅Y) ⇔ γ̄φ₃X² − D(Y)X + γ̄φ₅Y > 0
    // with D(Y) = (φ₁ − φ₄γ̄)Y − γ̄φ₂; outage outside the roots.
    let f = |y: f64| {
        let lo = x_eh(y);
        let d = den * y - g * c.phi2;
        let a = g * c.phi3;
        let cc = g * c.phi5 * y;
        let (r1, r2) = if a > 0.0 {
            let disc = d * d - 4.0 * a * cc;
            if d <= 0.0 || disc <= 0.0 {
                (f64::NAN, f64::NAN)
            } else {
                let s = disc.sqrt();
                // stable root pair
                let big = (d + s) / (2.0 * a);
                (cc / (a * big), big)
            }
        } else if d > 0.0 {
            (cc / d, f64::INFINITY)
        } else {
            (f64::NAN, f64::NAN)
        };
        let mut p = fx.sf(lo);
        if r1.is_finite() {
            let from = lo.max(r1);
            if r2 > from {
                p -= fx.sf(from) - fx.sf(r2);
            }
        }
        fy.pdf(y) * p.max(0.0)
    };
    let l1 = g * c.phi2 / den;
    let mut extra = vec![pth / ph];
    if den > 0.0 {
        extra.push(l1);
        // D² = 4γ̄²φ₃φ₅Y has two roots in Y; both are kinks of the inner bound
        let a = den * den;
        let b = -2.0 * den * g * c.phi2 - 4.0 * g * g * c.phi3 * c.phi5;
        let cq = (g * c.phi2).powi(2);
        let disc = b * b - 4.0 * a * cq;
        if disc >= 0.0 {
            extra.push((-b - disc.sqrt()) / (2.0 * a));
            extra.push((-b + disc.sqrt()) / (2.0 * a));
        }
    }
    integrate(f, &sorted_points(0.0, hi, &extra), spec)
}

/// Pr[P_j X + P_ĵ Y ≤ P_th] by one-dimensional convolution quadrature.
pub fn quad_region_prob(c: &DerivedCoeffs, pair: RelayPair, spec: &QuadSpec) -> Result<QuadResult> {
    pair.x.check()?;
    pair.y.check()?;
    let (fx, fy) = (GainLaw::new(pair.x), GainLaw::new(pair.y));
    let (pj, ph, pth) = (c.p_dest, c.p_src, c.p_th);
    let hi = (pth / pj).min(fx.tail_cut(spec.abs_tol / 10.0));
    integrate(|x| fx.pdf(x) * fy.cdf((pth - pj * x) / ph), &sorted_points(0.0, hi, &[]), spec)
}

/// Quadrature counterpart of the analytic outage breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleBreakdown {
    pub direction: Destination,
    pub f_lin: f64,
    pub f_sat: f64,
    pub f_relayed: f64,
    pub f_direct: f64,
    pub op: f64,
    pub abs_err: f64,
    pub converged: bool,
}

/// Outage probability with both regime probabilities from quadrature and the
/// same blocked-relay convention as the analytic path.
pub fn quad_outage_probability(
    scenario: &Scenario,
    direction: Destination,
    spec: &QuadSpec,
) -> Result<OracleBreakdown> {
    scenario.validate()?;
    let links = scenario.links()?;
    let c = derive_coeffs(&scenario.params, direction)?;
    let pair = links.relay_pair(direction);
    let lin = quad_cdf_lin(&c, pair, spec)?;
    let sat = quad_cdf_sat(&c, pair, spec, false)?;
    let blocked = c.eps1 - c.eps4 * c.gamma_bar() <= 0.0;
    let (f_lin, f_sat) = if blocked {
        let region = quad_region_prob(&c, pair, spec)?.value;
        (region, 1.0 - region)
    } else {
        (lin.value, sat.value)
    };
    let f_relayed = if blocked { 1.0 } else { (f_lin + f_sat).clamp(0.0, 1.0) };
    let f_direct = cdf_direct(c.gamma_bar(), links.ab, c.p_src, c.sigma2_dest)?;
    Ok(OracleBreakdown {
        direction,
        f_lin,
        f_sat,
        f_relayed,
        f_direct,
        op: f_relayed * f_direct,
        abs_err: lin.abs_err + sat.abs_err,
        converged: lin.converged && sat.converged,
    })
}
