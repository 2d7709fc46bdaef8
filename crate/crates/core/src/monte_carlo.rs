//! Link-level simulation of the three-phase protocol.
//!
//! # RNG contract
//!
//! Trials are grouped into fixed chunks of [`CHUNK_TRIALS`]. Chunk `c` of an
//! estimate keyed by `seed` draws from `ChaCha8Rng::seed_from_u64(seed)` with
//! `set_stream(c)`. Chunk boundaries do not depend on the worker count, and
//! the outage tallies are integers, so an estimate is bit-identical for any
//! thread pool size. [`derive_seed`] turns a master seed plus a path (grid
//! index, destination, ...) into the key of one estimate.
//!
//! Within a trial the four squared gains are drawn in the order
//! `a1, b1, ab, 12`; full-signal mode then draws channel phases, symbols and
//! the per-phase noise.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::system_model::{derive_coeffs, DerivedCoeffs, Destination, LinkSet, Scenario, SystemParams};

pub const CHUNK_TRIALS: u64 = 4096;

/// Symbols per block used by full-signal mode.
pub const DEFAULT_SYMBOLS_PER_BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McMode {
    /// Per-trial SNR from the closed-form SNR expressions.
    SnrFormula,
    /// Per-trial SNR measured on simulated waveforms, third-phase noise
    /// included.
    FullSignal,
}

impl McMode {
    pub fn label(self) -> &'static str {
        match self {
            McMode::SnrFormula => "snr-formula",
            McMode::FullSignal => "full-signal",
        }
    }
}

impl std::str::FromStr for McMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "snr-formula" => Ok(McMode::SnrFormula),
            "full-signal" => Ok(McMode::FullSignal),
            other => Err(format!("unknown Monte Carlo mode {other:?}")),
        }
    }
}

/// Waveform samples for one block: symbols, channel phases and every noise
/// term, each already scaled to its variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNoise {
    pub phase_a1: f64,
    pub phase_b1: f64,
    pub x_a: Vec<Complex64>,
    pub x_b: Vec<Complex64>,
    pub x_1: Vec<Complex64>,
    /// SN₁ antenna noise, phases I and II
    pub n1: [Vec<Complex64>; 2],
    /// conversion noise, phases I and II
    pub n_cr: [Vec<Complex64>; 2],
    /// phase-III noise at PU_a and PU_b
    pub n3_a: Vec<Complex64>,
    pub n3_b: Vec<Complex64>,
}

/// One block's squared channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g_a1: f64,
    pub g_b1: f64,
    pub g_ab: f64,
    pub g_12: f64,
    pub noise: Option<PhaseNoise>,
}

impl ChannelRealization {
    pub fn gains(g_a1: f64, g_b1: f64, g_ab: f64, g_12: f64) -> Self {
        Self {
            g_a1,
            g_b1,
            g_ab,
            g_12,
            noise: None,
        }
    }

    fn to_pu(&self, who: Destination) -> f64 {
        match who {
            Destination::A => self.g_a1,
            Destination::B => self.g_b1,
        }
    }

    /// P_a|h_{a,1}|² + P_b|h_{b,1}|², the power seen by the harvester.
    pub fn harvester_input(&self, p_a: f64, p_b: f64) -> f64 {
        p_a * self.g_a1 + p_b * self.g_b1
    }
}

/// Squared Nakagami-m gain: Gamma(m, Ω/m) as a sum of m unit exponentials.
pub fn sample_gain<R: Rng + ?Sized>(m: u32, omega: f64, rng: &mut R) -> Result<f64> {
    if m == 0 {
        return Err(domain("sample_gain", "m", 0.0));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(domain("sample_gain", "omega", omega));
    }
    Ok(gain_unchecked(m, omega, rng))
}

#[inline]
fn gain_unchecked<R: Rng + ?Sized>(m: u32, omega: f64, rng: &mut R) -> f64 {
    let mut s = 0.0;
    for _ in 0..m {
        let e: f64 = Exp1.sample(rng);
        s += e;
    }
    s * omega / f64::from(m)
}

fn sample_gains<R: Rng + ?Sized>(links: &LinkSet, rng: &mut R) -> ChannelRealization {
    ChannelRealization::gains(
        gain_unchecked(links.a1.m, links.a1.omega, rng),
        gain_unchecked(links.b1.m, links.b1.omega, rng),
        gain_unchecked(links.ab.m, links.ab.omega, rng),
        gain_unchecked(links.s12.m, links.s12.omega, rng),
    )
}

fn cn<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bits: u8 = rng.random_range(0..4);
    Complex64::new(
        if bits & 1 == 0 { h } else { -h },
        if bits & 2 == 0 { h } else { -h },
    )
}

fn sample_noise<R: Rng + ?Sized>(params: &SystemParams, symbols: usize, rng: &mut R) -> PhaseNoise {
    let tau = std::f64::consts::TAU;
    let phase_a1 = rng.random::<f64>() * tau;
    let phase_b1 = rng.random::<f64>() * tau;
    let mut draw = |n: usize, f: &mut dyn FnMut(&mut R) -> Complex64| -> Vec<Complex64> {
        (0..n).map(|_| f(rng)).collect()
    };
    let x_a = draw(symbols, &mut |r| qpsk(r));
    let x_b = draw(symbols, &mut |r| qpsk(r));
    let x_1 = draw(symbols, &mut |r| qpsk(r));
    let n1_i = draw(symbols, &mut |r| cn(params.sigma2_1, r));
    let n1_ii = draw(symbols, &mut |r| cn(params.sigma2_1, r));
    let ncr_i = draw(symbols, &mut |r| cn(params.sigma2_cr, r));
    let ncr_ii = draw(symbols, &mut |r| cn(params.sigma2_cr, r));
    let n3_a = draw(symbols, &mut |r| cn(params.sigma2_a, r));
    let n3_b = draw(symbols, &mut |r| cn(params.sigma2_b, r));
    PhaseNoise {
        phase_a1,
        phase_b1,
        x_a,
        x_b,
        x_1,
        n1: [n1_i, n1_ii],
        n_cr: [ncr_i, ncr_ii],
        n3_a,
        n3_b,
    }
}

/// Draws one block. `symbols > 0` also draws the waveform samples used by
/// full-signal mode.
pub fn sample_realization<R: Rng + ?Sized>(
    links: &LinkSet,
    params: &SystemParams,
    symbols: usize,
    rng: &mut R,
) -> ChannelRealization {
    let mut r = sample_gains(links, rng);
    if symbols > 0 {
        r.noise = Some(sample_noise(params, symbols, rng));
    }
    r
}

/// Relay transmit power after the piecewise-linear harvester.
pub fn harvested_power(real: &ChannelRealization, params: &SystemParams) -> f64 {
    let s = real.harvester_input(params.p_a, params.p_b);
    params.eh_slope() * s.min(params.p_th)
}

/// Relayed-link SNR at destination `coeffs.direction`, picking the linear
/// or saturated expression from the harvester input.
pub fn relayed_snr(real: &ChannelRealization, coeffs: &DerivedCoeffs) -> f64 {
    let dest = coeffs.direction;
    let x = real.to_pu(dest);
    let y = real.to_pu(dest.source());
    relayed_snr_gains(coeffs, x, y)
}

#[inline]
fn relayed_snr_gains(c: &DerivedCoeffs, x: f64, y: f64) -> f64 {
    if c.p_dest * x + c.p_src * y <= c.p_th {
        c.eps1 * y / (c.eps2 + c.eps3 * x + c.eps4 * y)
    } else {
        let den = c.phi2 * x + c.phi3 * x * x + c.phi4 * x * y + c.phi5 * y;
        if den > 0.0 {
            c.phi1 * y * x / den
        } else {
            0.0
        }
    }
}

#[inline]
fn in_saturation(c: &DerivedCoeffs, real: &ChannelRealization) -> bool {
    let dest = c.direction;
    c.p_dest * real.to_pu(dest) + c.p_src * real.to_pu(dest.source()) > c.p_th
}

/// SNR measured on the simulated broadcast after self-interference
/// cancellation: desired-signal energy over the energy of everything else
/// (relayed noise, conversion noise, secondary interference and the
/// destination's own phase-III noise).
pub fn full_signal_snr(
    real: &ChannelRealization,
    params: &SystemParams,
    dest: Destination,
) -> Result<f64> {
    let nz = real.noise.as_ref().ok_or(Error::MissingNoise)?;
    let s = real.harvester_input(params.p_a, params.p_b);
    if s <= 0.0 {
        return Ok(0.0);
    }
    let p1 = harvested_power(real, params);
    let b = 1.0 - params.beta;
    let gain = (params.mu * p1 / (b * s)).sqrt();
    let h_a1 = Complex64::from_polar(real.g_a1.sqrt(), nz.phase_a1);
    let h_b1 = Complex64::from_polar(real.g_b1.sqrt(), nz.phase_b1);
    let (h_dest, n3) = match dest {
        Destination::A => (h_a1, &nz.n3_a),
        Destination::B => (h_b1, &nz.n3_b),
    };
    let amp_a = (b * params.p_a).sqrt();
    let amp_b = (b * params.p_b).sqrt();
    let amp_1 = ((1.0 - params.mu) * p1).sqrt();
    let sb = b.sqrt();

    let mut e_sig = 0.0;
    let mut e_rest = 0.0;
    for t in 0..nz.x_a.len() {
        let from_a = amp_a * h_a1 * nz.x_a[t];
        let from_b = amp_b * h_b1 * nz.x_b[t];
        let inner = from_a + sb * nz.n1[0][t] + nz.n_cr[0][t] + from_b + sb * nz.n1[1][t] + nz.n_cr[1][t];
        let x_bc = gain * inner + amp_1 * nz.x_1[t];
        let y = h_dest * x_bc + n3[t];
        let (own, wanted) = match dest {
            Destination::A => (from_a, from_b),
            Destination::B => (from_b, from_a),
        };
        let desired = h_dest * gain * wanted;
        let residual = y - h_dest * gain * own - desired;
        e_sig += desired.norm_sqr();
        e_rest += residual.norm_sqr();
    }
    if e_sig == 0.0 {
        return Ok(0.0);
    }
    Ok(e_sig / e_rest)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one estimate from a master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub op_hat: f64,
    pub stderr: f64,
    pub trials: u64,
    pub outages: u64,
    pub ci95: (f64, f64),
    pub mode: McMode,
    /// Fraction of trials whose harvester input exceeded P_th.
    pub saturated_fraction: f64,
    /// Outage rate with the direct link ignored.
    pub relay_only_op_hat: f64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    outage: u64,
    relay_outage: u64,
    saturated: u64,
}

impl Tally {
    fn add(self, o: Tally) -> Tally {
        Tally {
            outage: self.outage + o.outage,
            relay_outage: self.relay_outage + o.relay_outage,
            saturated: self.saturated + o.saturated,
        }
    }
}

fn run_chunk(
    scenario: &Scenario,
    links: &LinkSet,
    coeffs: &DerivedCoeffs,
    seed: u64,
    chunk: u64,
    n: u64,
    mode: McMode,
) -> Result<Tally> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let params = &scenario.params;
    let dest = coeffs.direction;
    let gbar = coeffs.gamma_bar();
    let direct_scale = coeffs.p_src / coeffs.sigma2_dest;
    let symbols = match mode {
        McMode::SnrFormula => 0,
        McMode::FullSignal => DEFAULT_SYMBOLS_PER_BLOCK,
    };
    let mut t = Tally::default();
    for _ in 0..n {
        let real = sample_realization(links, params, symbols, &mut rng);
        let relay = match mode {
            McMode::SnrFormula => relayed_snr(&real, coeffs),
            McMode::FullSignal => full_signal_snr(&real, params, dest)?,
        };
        let direct = direct_scale * real.g_ab;
        if relay < gbar {
            t.relay_outage += 1;
            if direct < gbar {
                t.outage += 1;
            }
        }
        if in_saturation(coeffs, &real) {
            t.saturated += 1;
        }
    }
    Ok(t)
}

/// Empirical outage probability of one destination.
pub fn estimate_outage(
    scenario: &Scenario,
    dest: Destination,
    trials: u64,
    seed: u64,
    mode: McMode,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(domain("estimate_outage", "trials", 0.0));
    }
    scenario.validate()?;
    let links = scenario.links()?;
    let coeffs = derive_coeffs(&scenario.params, dest)?;
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
            run_chunk(scenario, &links, &coeffs, seed, c, n, mode)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.add(b)))?;
    let n = trials as f64;
    let p = tally.outage as f64 / n;
    let se = (p * (1.0 - p) / n).sqrt();
    Ok(McEstimate {
        op_hat: p,
        stderr: se,
        trials,
        outages: tally.outage,
        ci95: ((p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0)),
        mode,
        saturated_fraction: tally.saturated as f64 / n,
        relay_only_op_hat: tally.relay_outage as f64 / n,
    })
}

/// Mean relayed SNR under both fidelity modes over the same realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrAudit {
    pub realizations: u64,
    pub mean_formula: f64,
    pub mean_full: f64,
    /// |mean_full − mean_formula| / mean_formula
    pub rel_gap: f64,
}

/// Measures how far the closed-form SNR expressions sit from the simulated
/// waveform SNR.
pub fn snr_gap_audit(
    scenario: &Scenario,
    dest: Destination,
    realizations: u64,
    seed: u64,
) -> Result<SnrAudit> {
    if realizations == 0 {
        return Err(domain("snr_gap_audit", "realizations", 0.0));
    }
    scenario.validate()?;
    let links = scenario.links()?;
    let coeffs = derive_coeffs(&scenario.params, dest)?;
    let chunks = realizations.div_ceil(CHUNK_TRIALS);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let n = CHUNK_TRIALS.min(realizations - c * CHUNK_TRIALS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let (mut f, mut s) = (0.0, 0.0);
            for _ in 0..n {
                let real =
                    sample_realization(&links, &scenario.params, DEFAULT_SYMBOLS_PER_BLOCK, &mut rng);
                f += relayed_snr(&real, &coeffs);
                s += full_signal_snr(&real, &scenario.params, dest)?;
            }
            Ok((f, s))
        })
        .collect::<Result<Vec<_>>>()?;
    // fixed-order reduction keeps the float sums reproducible
    let (f, s) = sums.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = realizations as f64;
    let (mean_formula, mean_full) = (f / n, s / n);
    Ok(SnrAudit {
        realizations,
        mean_formula,
        mean_full,
        rel_gap: ((mean_full - mean_formula) / mean_formula).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::Shapes;

    fn rng(stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        r.set_stream(stream);
        r
    }

    #[test]
    fn gain_mean_matches_omega() {
        let mut r = rng(0);
        let n = 1_000_000;
        let omega = 0.03125;
        let draws: Vec<f64> = (0..n).map(|_| sample_gain(2, omega, &mut r).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        // sd of a single draw is Ω/√m
        let se = omega / 2f64.sqrt() / (n as f64).sqrt();
        assert!((mean - omega).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn gain_variance_is_omega_squared_over_m() {
        let mut r = rng(1);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_gain(2, 1.0, &mut r).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Var of sample variance for Gamma(2, 1/2): (μ4 − σ⁴)/n with μ4 = 3σ⁴(1 + 2/m)
        let sd_var = ((3.0 * 0.25 * 2.0 - 0.25) / n as f64).sqrt();
        assert!((var - 0.5).abs() < 4.0 * sd_var, "{var}");
    }

    #[test]
    fn rayleigh_gain_passes_ks() {
        let mut r = rng(2);
        let n = 20_000;
        let omega = 0.7;
        let mut d: Vec<f64> = (0..n).map(|_| sample_gain(1, omega, &mut r).unwrap()).collect();
        d.sort_by(f64::total_cmp);
        let ks = d
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x / omega).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value 1.63/√n
        assert!(ks < 1.63 / (n as f64).sqrt(), "{ks}");
    }

    #[test]
    fn gain_rejects_bad_law() {
        let mut r = rng(0);
        assert!(sample_gain(0, 1.0, &mut r).is_err());
        assert!(sample_gain(1, 0.0, &mut r).is_err());
    }

    #[test]
    fn harvester_branches() {
        let p = SystemParams {
            p_a: 1.0,
            p_b: 1.0,
            p_th: 1e-3,
            alpha: 0.1,
            eta: 0.7,
            beta: 0.8,
            ..SystemParams::default()
        };
        assert_eq!(harvested_power(&ChannelRealization::gains(0.0, 0.0, 1.0, 1.0), &p), 0.0);
        let lin = harvested_power(&ChannelRealization::gains(2e-4, 2e-4, 1.0, 1.0), &p);
        assert!((lin - 2.8e-5).abs() < 1e-18);
        let sat = harvested_power(&ChannelRealization::gains(2.5e-3, 2.5e-3, 1.0, 1.0), &p);
        assert!((sat - 7e-5).abs() < 1e-18);
    }

    #[test]
    fn relayed_snr_special_cases() {
        let p = SystemParams::default();
        let c = derive_coeffs(&p, Destination::A).unwrap();
        // Y = 0
        assert_eq!(relayed_snr(&ChannelRealization::gains(0.02, 0.0, 0.1, 0.1), &c), 0.0);
        assert_eq!(relayed_snr(&ChannelRealization::gains(5.0, 0.0, 0.1, 0.1), &c), 0.0);

        let p1 = SystemParams { mu: 1.0, ..p };
        let c1 = derive_coeffs(&p1, Destination::A).unwrap();
        let real = ChannelRealization::gains(0.02, 0.03, 0.1, 0.1);
        let want = c1.eps1 * 0.03 / c1.eps2;
        assert!((relayed_snr(&real, &c1) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn relayed_snr_at_mean_gains_by_hand() {
        // P = 1 mW, σ² = 1e−7 W, α = 0.2, β = 0.8, η = 0.7, μ = 0.8, P_th = 1 mW,
        // X = Y = 0.03125: harvester input 6.25e−5 W < P_th → linear branch.
        // ε₁ = 8e−4, ε₂ = 1.6e−7 + 8e−7 = 9.6e−7, ε₃ = ε₄ = 2e−4
        // γ = 8e−4·0.03125 / (9.6e−7 + 2e−4·0.0625) = 2.5e−5 / 1.346e−5
        let p = SystemParams::default();
        let c = derive_coeffs(&p, Destination::A).unwrap();
        let real = ChannelRealization::gains(0.03125, 0.03125, 0.0055, 0.0055);
        let want = 2.5e-5 / 1.346e-5;
        assert!((relayed_snr(&real, &c) - want).abs() < 1e-12);

        // P = 1 W pushes the same gains into saturation: δ = 0.18666..,
        // δP_th = 1.8666..e−4
        // φ₁ = 0.8·δP_th, φ₂ = 2·0.8·δP_th·1e−7·(1 + 5) + 1e−7,
        // φ₃ = φ₄ = 0.2·δP_th, φ₅ = 1e−7
        let p = SystemParams::default().with_snr_db(70.0);
        let c = derive_coeffs(&p, Destination::A).unwrap();
        let d = 0.2 * 0.7 * 0.8 / 0.6 * 1e-3;
        let (x, y) = (0.03125, 0.03125);
        let phi1 = 0.8 * d;
        let phi2 = 2.0 * 0.8 * d * 1e-7 * 6.0 + 1e-7;
        let phi34 = 0.2 * d;
        let phi5 = 1e-7;
        let want = phi1 * x * y / (phi2 * x + phi34 * x * x + phi34 * x * y + phi5 * y);
        let got = relayed_snr(&real, &c);
        assert!(((got - want) / want).abs() < 1e-9, "{got} {want}");
    }

    #[test]
    fn full_signal_requires_noise() {
        let real = ChannelRealization::gains(0.1, 0.1, 0.1, 0.1);
        assert_eq!(
            full_signal_snr(&real, &SystemParams::default(), Destination::A),
            Err(Error::MissingNoise)
        );
    }

    #[test]
    fn full_signal_zero_gains() {
        let p = SystemParams::default();
        let links = Scenario::default().links().unwrap();
        let mut r = rng(3);
        let mut real = sample_realization(&links, &p, 16, &mut r);
        real.g_a1 = 0.0;
        real.g_b1 = 0.0;
        assert_eq!(full_signal_snr(&real, &p, Destination::A).unwrap(), 0.0);
    }

    #[test]
    fn full_signal_matches_formula_without_phase_three_noise() {
        // μ = 1 and negligible σ_j²: the measured SNR converges to ε₁Y/ε₂
        let p = SystemParams {
            mu: 1.0,
            sigma2_a: 1e-30,
            sigma2_b: 1e-30,
            ..SystemParams::default()
        };
        let links = Scenario::default().links().unwrap();
        let c = derive_coeffs(&p, Destination::A).unwrap();
        let mut r = rng(4);
        let mut ratio = 0.0;
        let n = 400;
        for _ in 0..n {
            let real = sample_realization(&links, &p, 4096, &mut r);
            ratio += full_signal_snr(&real, &p, Destination::A).unwrap() / relayed_snr(&real, &c);
        }
        let mean = ratio / n as f64;
        // residual estimated from 4096 complex samples: E[1/χ²] bias ≈ 1/4095
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn full_signal_keeps_phase_three_noise() {
        // The measured SNR should follow the formula with the destination
        // noise term σ_j²S/(X·P₁) restored to the denominator.
        let p = SystemParams::default();
        let links = Scenario::default().links().unwrap();
        let mut r = rng(5);
        let n = 300;
        let mut ratio = 0.0;
        for _ in 0..n {
            let real = sample_realization(&links, &p, 4096, &mut r);
            let s = real.harvester_input(p.p_a, p.p_b);
            let p1 = harvested_power(&real, &p);
            let conv = 2.0 * p.mu * (p.sigma2_1 + p.sigma2_cr / (1.0 - p.beta));
            let want = p.mu * p.p_b * real.g_b1
                / (conv + (1.0 - p.mu) * s + p.sigma2_a * s / (real.g_a1 * p1));
            ratio += full_signal_snr(&real, &p, Destination::A).unwrap() / want;
        }
        let mean = ratio / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn zero_threshold_never_outage() {
        let s = Scenario {
            params: SystemParams {
                r_a: 1e-300,
                ..SystemParams::default()
            },
            ..Scenario::default()
        };
        let e = estimate_outage(&s, Destination::A, 10_000, 1, McMode::SnrFormula).unwrap();
        assert_eq!(e.op_hat, 0.0);
    }

    #[test]
    fn vanishing_power_always_outage() {
        let s = Scenario {
            params: SystemParams::default().with_snr_db(-120.0),
            ..Scenario::default()
        };
        let e = estimate_outage(&s, Destination::B, 10_000, 1, McMode::SnrFormula).unwrap();
        assert_eq!(e.op_hat, 1.0);
    }

    #[test]
    fn estimate_is_independent_of_pool_size() {
        let s = Scenario {
            params: SystemParams::default().with_snr_db(20.0),
            shapes: Shapes {
                m_a: 3,
                m_b: 2,
                ..Shapes::default()
            },
            ..Scenario::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_outage(&s, Destination::A, 50_000, 99, McMode::SnrFormula).unwrap())
        };
        let a = run(1);
        let b = run(5);
        assert_eq!(a, b);
        assert_eq!(a.trials, 50_000);
    }

    #[test]
    fn direct_link_never_hurts() {
        for seed in 0..5 {
            let s = Scenario {
                params: SystemParams::default().with_snr_db(15.0),
                ..Scenario::default()
            };
            let e = estimate_outage(&s, Destination::A, 20_000, seed, McMode::SnrFormula).unwrap();
            assert!(e.op_hat <= e.relay_only_op_hat);
        }
    }

    #[test]
    fn derive_seed_separates_paths() {
        let a = derive_seed(1, &[0, 0]);
        assert_ne!(a, derive_seed(1, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0]));
        assert_eq!(a, derive_seed(1, &[0, 0]));
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(estimate_outage(&Scenario::default(), Destination::A, 0, 1, McMode::SnrFormula).is_err());
    }
}
