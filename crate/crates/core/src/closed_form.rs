//! Closed-form outage probability and throughput.
//!
//! For destination j the relayed link is in outage when its SNR falls below
//! γ̄_j. Writing X = |h_{1,j}|² and Y = |h_{ĵ,1}|², the event splits over
//! the two harvester regimes:
//!
//! * linear (`P_j X + P_ĵ Y ≤ P_th`): finite triple sum, [`cdf_lin`];
//! * saturated (`P_j X + P_ĵ Y > P_th`): finite sums plus one series in s,
//!   with the φ₅γ̄ term dropped from the SNR denominator, [`cdf_sat`].
//!
//! The two joint probabilities add up to the relayed-link CDF; the outage
//! probability is that times the Gamma CDF of the direct link.
//!
//! Every term is assembled in the log domain and exponentiated once, since
//! powers like `(m/(ΩP))^k` multiply exponentials like `e^{−mP_th/(ΩP)}`
//! that underflow on their own at low SNR.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::special_math::{
    binom, ln_factorial, ln_gamma_unchecked, ln_lower_unchecked, ln_upper_unchecked, pq_unchecked,
    sum_series, SeriesControl,
};
use crate::system_model::{
    derive_coeffs, DerivedCoeffs, Destination, LinkStats, RelayPair, Scenario, SystemParams,
};

/// Relative size of |Ξ| (against m_j/Ω_j) treated as Ξ = 0.
pub const XI_DEGENERACY_TOL: f64 = 1e-9;
/// Multiplicative nudge applied to Ω_j when Ξ is degenerate.
pub const XI_PERTURBATION: f64 = 1e-7;
/// Slack allowed outside [0, 1] before a probability is rejected.
pub const PROBABILITY_SLACK: f64 = 1e-9;
/// The harvester-bound part of the saturated-regime sum is skipped when an
/// upper bound on it falls below this fraction of the rest of the sum.
const NEGLIGIBLE_FRACTION: f64 = 1e-17;

/// Diagnostics raised while evaluating the lemmas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BranchFlags {
    /// Θ ≤ 0: the linear-regime SNR can never reach γ̄.
    pub theta_nonpositive: bool,
    /// Ξ ≈ 0: Ω_j was nudged by [`XI_PERTURBATION`].
    pub xi_perturbed: bool,
    /// Δ₁ < 0: the relay constraint never binds in the linear regime.
    pub delta1_clamped: bool,
    /// φ₁ − φ₄γ̄ ≤ 0: the saturated-regime SNR can never reach γ̄.
    pub sat_denominator_nonpositive: bool,
    /// Δ₂ < Λ₁: the two saturated-regime boundaries cross below X = 0.
    pub sat_boundaries_reordered: bool,
    /// The s-series hit `max_terms` before its tolerance.
    pub series_cap_hit: bool,
}

impl BranchFlags {
    pub fn merge(self, o: BranchFlags) -> BranchFlags {
        BranchFlags {
            theta_nonpositive: self.theta_nonpositive | o.theta_nonpositive,
            xi_perturbed: self.xi_perturbed | o.xi_perturbed,
            delta1_clamped: self.delta1_clamped | o.delta1_clamped,
            sat_denominator_nonpositive: self.sat_denominator_nonpositive
                | o.sat_denominator_nonpositive,
            sat_boundaries_reordered: self.sat_boundaries_reordered | o.sat_boundaries_reordered,
            series_cap_hit: self.series_cap_hit | o.series_cap_hit,
        }
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.theta_nonpositive {
            v.push("theta_le_0");
        }
        if self.xi_perturbed {
            v.push("xi_perturbed");
        }
        if self.delta1_clamped {
            v.push("delta1_clamped");
        }
        if self.sat_denominator_nonpositive {
            v.push("sat_den_le_0");
        }
        if self.sat_boundaries_reordered {
            v.push("sat_reordered");
        }
        if self.series_cap_hit {
            v.push("series_cap");
        }
        v
    }

    pub fn is_empty(&self) -> bool {
        self.labels().is_empty()
    }

    /// True when the relay can never deliver γ̄ in either regime.
    pub fn relay_blocked(&self) -> bool {
        self.theta_nonpositive || self.sat_denominator_nonpositive
    }
}

/// A lemma value and what happened while computing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaValue {
    pub value: f64,
    pub flags: BranchFlags,
}

/// Auxiliary quantities shared by the two lemmas for one destination.
/// ν = m_j + k − q − 1 varies per term and is not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaAux {
    pub theta: f64,
    pub xi: f64,
    pub psi: f64,
    pub delta1: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta2: f64,
}

pub fn lemma_aux(c: &DerivedCoeffs, pair: RelayPair) -> LemmaAux {
    let g = c.gamma_bar();
    let (pj, ph, pth) = (c.p_dest, c.p_src, c.p_th);
    let theta = c.eps1 - c.eps4 * g;
    let den = c.phi1 - c.phi4 * g;
    let lambda1 = c.phi2 * g / den;
    let lambda2 = c.phi3 * g / den;
    LemmaAux {
        theta,
        xi: pair.y.rate() * pj / ph - pair.x.rate(),
        psi: pair.x.rate() + pair.y.rate() * g * c.eps3 / theta,
        delta1: (pth * theta - g * c.eps2 * ph) / (g * c.eps3 * ph + pj * theta),
        lambda1,
        lambda2,
        delta2: (lambda2 * pth + lambda1 * pj) / (pj + ph * lambda2),
    }
}

fn ln_binom(n: u32, k: u32) -> f64 {
    // shapes are small integers; binom cannot fail here
    (binom(u64::from(n), u64::from(k)).unwrap_or(u64::MAX) as f64).ln()
}

fn sign(parity: u32) -> f64 {
    if parity % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// ∫_lo^hi x^ν e^{ξx − shift} dx, evaluated by whichever exact route is
/// well conditioned for the given ξ·hi.
///
/// For large positive ξ·hi the finite antiderivative
/// `e^{ξx} Σ_t (−1)^t t! C(ν,t) x^{ν−t} / ξ^{t+1}` is used; for large negative
/// ξ·hi the incomplete-gamma difference; otherwise the power series in ξ,
/// which also covers ξ = 0.
pub(crate) fn poly_exp_integral(nu: u32, xi: f64, lo: f64, hi: f64, shift: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = f64::from(nu);
    let s = xi.abs() * hi;
    if xi > 0.0 && s > 40.0 {
        let anti = |x: f64| -> f64 {
            let mut sum = 0.0;
            let mut falling = 1.0; // ν!/(ν−t)!
            let mut xi_pow = xi; // ξ^{t+1}
            for t in 0..=nu {
                let xp = if nu == t { 1.0 } else { x.powi((nu - t) as i32) };
                sum += sign(t) * falling * xp / xi_pow;
                falling *= f64::from(nu - t);
                xi_pow *= xi;
            }
            sum * (xi * x - shift).exp()
        };
        anti(hi) - anti(lo)
    } else if xi < 0.0 && s > 1.0 {
        let lam = -xi;
        let a = n + 1.0;
        let (p_lo, q_lo) = pq_unchecked(a, lam * lo);
        let (p_hi, q_hi) = pq_unchecked(a, lam * hi);
        let diff = if lam * lo >= a { q_lo - q_hi } else { p_hi - p_lo };
        diff * (ln_gamma_unchecked(a) - a * lam.ln() - shift).exp()
    } else {
        let r = lo / hi;
        let z = xi * hi;
        let mut sum = 0.0;
        let mut zpow = 1.0; // z^i / i!
        for i in 0..2000u32 {
            let k = n + f64::from(i) + 1.0;
            let t = zpow * (1.0 - r.powf(k)) / k;
            sum += t;
            if t.abs() <= 1e-17 * sum.abs() && f64::from(i) > z.abs() {
                break;
            }
            zpow *= z / f64::from(i + 1);
        }
        sum * ((n + 1.0) * hi.ln() - shift).exp()
    }
}

fn check_probability(quantity: &'static str, v: f64, detail: impl FnOnce() -> String) -> Result<f64> {
    if !v.is_finite() || v < -PROBABILITY_SLACK || v > 1.0 + PROBABILITY_SLACK {
        return Err(Error::Integrity {
            quantity,
            value: v,
            detail: detail(),
        });
    }
    Ok(v.clamp(0.0, 1.0))
}

fn check_pair(pair: &RelayPair) -> Result<()> {
    pair.x.check()?;
    pair.y.check()
}

/// Applies the Ξ = 0 nudge when needed.
fn resolve_xi(c: &DerivedCoeffs, pair: RelayPair) -> (LinkStats, bool) {
    let mut x = pair.x;
    let xi = pair.y.rate() * c.p_dest / c.p_src - x.rate();
    if xi.abs() < XI_DEGENERACY_TOL * x.rate() {
        x.omega *= 1.0 + XI_PERTURBATION;
        (x, true)
    } else {
        (x, false)
    }
}

/// Pr[Y < relay bound, P_j X + P_ĵ Y ≤ P_th] with the relay bound
/// `Y < γ̄(ε₂ + ε₃X)/Θ`; `theta = None` drops the relay bound and returns
/// Pr[P_j X + P_ĵ Y ≤ P_th].
fn linear_regime(
    c: &DerivedCoeffs,
    x: LinkStats,
    y: LinkStats,
    theta: Option<f64>,
    flags: &mut BranchFlags,
) -> f64 {
    let g = c.gamma_bar();
    let (pj, ph, pth) = (c.p_dest, c.p_src, c.p_th);
    let (m, mh) = (x.m, y.m);
    let (rx, ry) = (x.rate(), y.rate());
    let upper = pth / pj;
    let xi = ry * pj / ph - rx;

    let delta1 = match theta {
        Some(th) => {
            let raw = (pth * th - g * c.eps2 * ph) / (g * c.eps3 * ph + pj * th);
            if raw < 0.0 {
                flags.delta1_clamped = true;
            }
            raw.max(0.0)
        }
        None => 0.0,
    };

    let (lead, _) = pq_unchecked(x.shape(), rx * upper);
    let ln_fx = x.shape() * rx.ln() - ln_gamma_unchecked(x.shape());

    // EH-constrained strip Δ₁ < x < P_th/P_j
    let shift = ry * pth / ph;
    let mut strip = 0.0;
    for k in 0..mh {
        for q in 0..=k {
            let nu = m + k - q - 1;
            let ln_coef = ln_fx + f64::from(k) * (ry / ph).ln() - ln_factorial(u64::from(k))
                + ln_binom(k, q)
                + f64::from(q) * pth.ln()
                + f64::from(k - q) * pj.ln();
            strip += sign(k - q) * poly_exp_integral(nu, xi, delta1, upper, shift - ln_coef);
        }
    }

    // relay-constrained strip 0 < x < Δ₁
    let mut relay = 0.0;
    if let Some(th) = theta {
        if delta1 > 0.0 {
            let psi = rx + ry * g * c.eps3 / th;
            let ln_pre = ln_fx - ry * g * c.eps2 / th;
            for p in 0..mh {
                for n in 0..=p {
                    if c.eps3 == 0.0 && p > n {
                        continue;
                    }
                    let a = f64::from(m + p - n);
                    let mut ln_t = ln_pre + f64::from(p) * (ry / th).ln()
                        - ln_factorial(u64::from(p))
                        + ln_binom(p, n)
                        + f64::from(p) * g.ln()
                        + f64::from(n) * c.eps2.ln()
                        + ln_lower_unchecked(a, psi * delta1)
                        - a * psi.ln();
                    if p > n {
                        ln_t += f64::from(p - n) * c.eps3.ln();
                    }
                    relay += ln_t.exp();
                }
            }
        }
    }

    lead - strip - relay
}

/// Joint probability that the linear-regime SNR is below γ̄_j while the
/// harvester stays linear.
///
/// Returns exactly 1 when Θ ≤ 0.
pub fn cdf_lin(c: &DerivedCoeffs, pair: RelayPair, _ctrl: SeriesControl) -> Result<LemmaValue> {
    check_pair(&pair)?;
    let mut flags = BranchFlags::default();
    let theta = c.eps1 - c.eps4 * c.gamma_bar();
    if theta <= 0.0 {
        flags.theta_nonpositive = true;
        return Ok(LemmaValue { value: 1.0, flags });
    }
    let (x, perturbed) = resolve_xi(c, pair);
    flags.xi_perturbed = perturbed;
    let v = linear_regime(c, x, pair.y, Some(theta), &mut flags);
    let value = check_probability("cdf_lin", v, || format!("{c:?} {pair:?}"))?;
    Ok(LemmaValue { value, flags })
}

/// Pr[P_j X + P_ĵ Y ≤ P_th], the probability the harvester stays linear.
pub fn linear_region_probability(c: &DerivedCoeffs, pair: RelayPair) -> Result<LemmaValue> {
    check_pair(&pair)?;
    let mut flags = BranchFlags::default();
    let (x, perturbed) = resolve_xi(c, pair);
    flags.xi_perturbed = perturbed;
    let v = linear_regime(c, x, pair.y, None, &mut flags);
    let value = check_probability("linear_region_probability", v, || format!("{c:?} {pair:?}"))?;
    Ok(LemmaValue { value, flags })
}

/// Joint probability that the saturated-regime SNR (φ₅γ̄ neglected) is below
/// γ̄_j while the harvester saturates.
///
/// Returns exactly 1 when φ₁ − φ₄γ̄ ≤ 0.
pub fn cdf_sat(c: &DerivedCoeffs, pair: RelayPair, ctrl: SeriesControl) -> Result<LemmaValue> {
    check_pair(&pair)?;
    let mut flags = BranchFlags::default();
    let g = c.gamma_bar();
    let den = c.phi1 - c.phi4 * g;
    if den <= 0.0 {
        flags.sat_denominator_nonpositive = true;
        return Ok(LemmaValue { value: 1.0, flags });
    }
    let (x, y) = (pair.x, pair.y);
    let (m, mh) = (x.m, y.m);
    let (rx, ry) = (x.rate(), y.rate());
    let (pj, ph, pth) = (c.p_dest, c.p_src, c.p_th);
    let lambda1 = c.phi2 * g / den;
    let lambda2 = c.phi3 * g / den;
    let delta2 = (lambda2 * pth + lambda1 * pj) / (pj + ph * lambda2);

    // Normally Λ₁ ≤ Δ₂ ≤ P_th/P_ĵ. Otherwise the boundaries cross below X = 0
    // and the band between P_th/P_ĵ and Λ₁ is in outage unconditionally.
    let lower_a = delta2.max(lambda1);
    let upper_b = delta2.min(pth / ph);
    let mut band = 0.0;
    if lower_a > upper_b {
        flags.sat_boundaries_reordered = true;
        let (_, q_ub) = pq_unchecked(y.shape(), ry * upper_b);
        let (_, q_la) = pq_unchecked(y.shape(), ry * lower_a);
        band = q_ub - q_la;
    }
    let ln_fy = y.shape() * ry.ln() - ln_gamma_unchecked(y.shape());

    // y > Δ₂: X > (Y − Λ₁)/Λ₂ binds
    let mut part_a = 0.0;
    if lambda2 > 0.0 {
        let w = ry + rx / lambda2;
        let ln_pre = ln_fy + rx * lambda1 / lambda2;
        for k in 0..m {
            for q in 0..=k {
                let a = f64::from(mh + q);
                let ln_t = ln_pre + f64::from(k) * (rx / lambda2).ln()
                    - ln_factorial(u64::from(k))
                    + ln_binom(k, q)
                    + f64::from(k - q) * lambda1.ln()
                    + ln_upper_unchecked(a, w * lower_a)
                    - a * w.ln();
                part_a += sign(k - q) * ln_t.exp();
            }
        }
    }

    // y < Δ₂: the harvester boundary X > (P_th − P_ĵY)/P_j binds
    let mut part_b = 0.0;
    let x_min = ((pth - ph * upper_b) / pj).max(0.0);
    let bound = pq_unchecked(x.shape(), rx * x_min).1 * pq_unchecked(y.shape(), ry * upper_b).0;
    if bound > NEGLIGIBLE_FRACTION * (part_a + band) && bound > f64::MIN_POSITIVE {
        let z = rx * ph / pj;
        let arg = ry * upper_b;
        let ln_base = ln_fy - rx * pth / pj;
        for p in 0..m {
            for n in 0..=p {
                let a0 = f64::from(mh + p - n);
                let ln_coef = ln_base - ln_factorial(u64::from(p))
                    + f64::from(p) * (rx / pj).ln()
                    + ln_binom(p, n)
                    + f64::from(n) * pth.ln()
                    + f64::from(p - n) * ph.ln();
                let series = sum_series(
                    |s| {
                        let sf = s as f64;
                        (ln_coef + sf * z.ln() - ln_factorial(s as u64)
                            + ln_lower_unchecked(a0 + sf, arg)
                            - (a0 + sf) * ry.ln())
                        .exp()
                    },
                    ctrl,
                );
                if !series.converged {
                    flags.series_cap_hit = true;
                }
                part_b += sign(p - n) * series.value;
            }
        }
    }

    let v = part_a + band + part_b;
    let value = check_probability("cdf_sat", v, || format!("{c:?} {pair:?}"))?;
    Ok(LemmaValue { value, flags })
}

/// Gamma CDF of the direct-link SNR P_ĵ|h_{a,b}|²/σ_j² at γ̄.
pub fn cdf_direct(gamma_bar: f64, link_ab: LinkStats, tx_power: f64, noise: f64) -> Result<f64> {
    link_ab.check()?;
    if !(gamma_bar >= 0.0) {
        return Err(domain("cdf_direct", "gamma_bar", gamma_bar));
    }
    if !(tx_power > 0.0) {
        return Err(domain("cdf_direct", "tx_power", tx_power));
    }
    if !(noise > 0.0) {
        return Err(domain("cdf_direct", "noise", noise));
    }
    let arg = link_ab.rate() * gamma_bar * noise / tx_power;
    Ok(pq_unchecked(link_ab.shape(), arg).0)
}

/// Outage probability of one destination with every intermediate value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfBreakdown {
    pub direction: Destination,
    pub f_lin: f64,
    pub f_sat: f64,
    pub f_relayed: f64,
    pub f_direct: f64,
    pub op: f64,
    pub flags: BranchFlags,
}

/// Composes the lemmas with the direct link: op = (f_lin + f_sat)·f_direct.
///
/// When the relay is blocked (Θ ≤ 0, equivalently φ₁ − φ₄γ̄ ≤ 0) the two
/// lemmas each return 1; the breakdown then reports the two regime
/// probabilities instead so that f_lin + f_sat = f_relayed = 1.
pub fn outage_probability(
    scenario: &Scenario,
    direction: Destination,
    ctrl: SeriesControl,
) -> Result<CdfBreakdown> {
    scenario.validate()?;
    let links = scenario.links()?;
    links.check()?;
    let c = derive_coeffs(&scenario.params, direction)?;
    let pair = links.relay_pair(direction);
    let lin = cdf_lin(&c, pair, ctrl)?;
    let sat = cdf_sat(&c, pair, ctrl)?;
    let mut flags = lin.flags.merge(sat.flags);
    let (f_lin, f_sat, f_relayed) = if flags.relay_blocked() {
        let region = linear_region_probability(&c, pair)?;
        flags = flags.merge(region.flags);
        (region.value, 1.0 - region.value, 1.0)
    } else {
        let sum = lin.value + sat.value;
        let sum = check_probability("f_relayed", sum, || {
            format!("f_lin={} f_sat={}", lin.value, sat.value)
        })?;
        (lin.value, sat.value, sum)
    };
    let f_direct = cdf_direct(
        c.gamma_bar(),
        links.ab,
        scenario.params.tx_power(direction.source()),
        scenario.params.pu_noise(direction),
    )?;
    Ok(CdfBreakdown {
        direction,
        f_lin,
        f_sat,
        f_relayed,
        f_direct,
        op: f_relayed * f_direct,
        flags,
    })
}

/// Sum throughput S = (1 − 2α)[(1 − op_a) r_a + (1 − op_b) r_b].
pub fn throughput(params: &SystemParams, op_a: f64, op_b: f64) -> Result<f64> {
    params.validate()?;
    for (name, v) in [("op_a", op_a), ("op_b", op_b)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(domain("throughput", name, v));
        }
    }
    Ok((1.0 - 2.0 * params.alpha) * ((1.0 - op_a) * params.r_a + (1.0 - op_b) * params.r_b))
}

/// Both destinations and the resulting throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticReport {
    pub a: CdfBreakdown,
    pub b: CdfBreakdown,
    pub throughput: f64,
}

pub fn analyze(scenario: &Scenario, ctrl: SeriesControl) -> Result<AnalyticReport> {
    let a = outage_probability(scenario, Destination::A, ctrl)?;
    let b = outage_probability(scenario, Destination::B, ctrl)?;
    let throughput = throughput(&scenario.params, a.op, b.op)?;
    Ok(AnalyticReport { a, b, throughput })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::Shapes;

    fn ctrl() -> SeriesControl {
        SeriesControl::default()
    }

    /// Plain trapezoid on a fine grid; only for the small
    /// `poly_exp_integral` checks below.
    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            s += f(lo + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn poly_exp_integral_all_routes() {
        for &(nu, xi, lo, hi) in &[
            (0u32, 0.0, 0.0, 2.0),
            (2, 0.0, 0.5, 2.0),
            (1, 30.0, 0.1, 2.0),
            (3, -10.0, 0.2, 1.5),
            (2, 0.3, 0.0, 1.0),
            (1, -0.4, 0.3, 1.0),
            (0, 50.0, 0.0, 1.0),
        ] {
            let got = poly_exp_integral(nu, xi, lo, hi, 0.0);
            let want = trapezoid(|x| x.powi(nu as i32) * (xi * x).exp(), lo, hi, 400_000);
            assert!(((got - want) / want).abs() < 1e-8, "{nu} {xi} {lo} {hi}: {got} vs {want}");
        }
    }

    #[test]
    fn poly_exp_integral_shift_folds_in() {
        let a = poly_exp_integral(2, 5.0, 0.0, 1.0, 3.0);
        let b = poly_exp_integral(2, 5.0, 0.0, 1.0, 0.0) * (-3.0f64).exp();
        assert!(((a - b) / b).abs() < 1e-13);
    }

    #[test]
    fn direct_cdf_examples() {
        let link = LinkStats::new(1, 1.0).unwrap();
        assert_eq!(cdf_direct(0.0, link, 1.0, 1.0).unwrap(), 0.0);
        // m = 1, γ̄σ²/(ΩP) = 1
        let v = cdf_direct(1.0, link, 1.0, 1.0).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        // m = 2, γ̄σ²/(ΩP) = 1 → P(2, 2) = 1 − 3e^{−2}
        let link2 = LinkStats::new(2, 1.0).unwrap();
        let v = cdf_direct(1.0, link2, 1.0, 1.0).unwrap();
        assert!((v - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-15);
        assert!(cdf_direct(-1.0, link, 1.0, 1.0).is_err());
        assert!(cdf_direct(1.0, link, 0.0, 1.0).is_err());
    }

    #[test]
    fn throughput_examples() {
        let p = SystemParams {
            alpha: 0.1,
            ..SystemParams::default()
        };
        assert_eq!(throughput(&p, 1.0, 1.0).unwrap(), 0.0);
        let s = throughput(&p, 0.0, 0.0).unwrap();
        assert!((s - 0.8 / 3.0).abs() < 1e-15);
        let p = SystemParams {
            alpha: 0.2,
            ..SystemParams::default()
        };
        assert!((throughput(&p, 0.5, 0.5).unwrap() - 0.1).abs() < 1e-15);
        assert!(throughput(&p, 1.5, 0.0).is_err());
    }

    fn blocked_scenario() -> Scenario {
        // μ/(1 − μ) ≈ 0.11 < γ̄ ≈ 0.21
        Scenario {
            params: SystemParams {
                mu: 0.1,
                ..SystemParams::default()
            },
            ..Scenario::default()
        }
    }

    #[test]
    fn blocked_relay_branches_return_one() {
        let s = blocked_scenario();
        let c = derive_coeffs(&s.params, Destination::A).unwrap();
        let pair = s.links().unwrap().relay_pair(Destination::A);
        let lin = cdf_lin(&c, pair, ctrl()).unwrap();
        assert_eq!(lin.value, 1.0);
        assert!(lin.flags.theta_nonpositive);
        let sat = cdf_sat(&c, pair, ctrl()).unwrap();
        assert_eq!(sat.value, 1.0);
        assert!(sat.flags.sat_denominator_nonpositive);

        let bd = outage_probability(&s, Destination::A, ctrl()).unwrap();
        assert_eq!(bd.f_relayed, 1.0);
        assert!((bd.f_lin + bd.f_sat - 1.0).abs() < 1e-15);
        assert_eq!(bd.op, bd.f_direct);
    }

    #[test]
    fn boundary_theta_zero_folds_into_blocked_branch() {
        let base = SystemParams::default();
        let mut c = derive_coeffs(&base, Destination::A).unwrap();
        let g = c.gamma_bar();
        c.eps1 = c.eps4 * g;
        c.phi1 = c.phi4 * g;
        let pair = Scenario::default().links().unwrap().relay_pair(Destination::A);
        assert_eq!(cdf_lin(&c, pair, ctrl()).unwrap().value, 1.0);
        assert_eq!(cdf_sat(&c, pair, ctrl()).unwrap().value, 1.0);
    }

    #[test]
    fn composition_is_a_product() {
        let s = Scenario {
            params: SystemParams::default().with_snr_db(20.0),
            ..Scenario::default()
        };
        let bd = outage_probability(&s, Destination::A, ctrl()).unwrap();
        assert!((bd.f_relayed - (bd.f_lin + bd.f_sat)).abs() < 1e-15);
        assert_eq!(bd.op, bd.f_relayed * bd.f_direct);
        for v in [bd.f_lin, bd.f_sat, bd.f_relayed, bd.f_direct, bd.op] {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn symmetric_midpoint_perturbs_xi() {
        let s = Scenario {
            shapes: Shapes {
                m_a: 2,
                m_b: 2,
                ..Shapes::default()
            },
            ..Scenario::default()
        };
        let bd = outage_probability(&s, Destination::A, ctrl()).unwrap();
        assert!(bd.flags.xi_perturbed);
    }

    #[test]
    fn threshold_limits() {
        let pair = Scenario::default().links().unwrap().relay_pair(Destination::A);
        let tiny = SystemParams {
            p_th: 1e-15,
            ..SystemParams::default()
        };
        let c = derive_coeffs(&tiny, Destination::A).unwrap();
        assert!(cdf_lin(&c, pair, ctrl()).unwrap().value < 1e-8);

        let huge = SystemParams {
            p_th: 1e6,
            ..SystemParams::default()
        };
        let c = derive_coeffs(&huge, Destination::A).unwrap();
        assert!(cdf_sat(&c, pair, ctrl()).unwrap().value < 1e-8);
    }
}
