//! Protocol parameters, link statistics and the derived SNR coefficients.
//!
//! Block timing: phases I and II last αT each and the broadcast phase lasts
//! (1 − 2α)T. T cancels between harvested energy and broadcast duration, so
//! `block_t` is carried for completeness only.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result, Violation};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Which primary user is the destination of the analysed link.
///
/// `A` is the PU_b → PU_a link (j = a, ĵ = b); `B` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Destination {
    A,
    B,
}

impl Destination {
    pub const BOTH: [Destination; 2] = [Destination::A, Destination::B];

    /// The transmitting PU, ĵ.
    pub fn source(self) -> Destination {
        match self {
            Destination::A => Destination::B,
            Destination::B => Destination::A,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Destination::A => "a",
            Destination::B => "b",
        }
    }

    pub fn index(self) -> u64 {
        match self {
            Destination::A => 0,
            Destination::B => 1,
        }
    }
}

/// All protocol constants. Powers and variances in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub p_a: f64,
    pub p_b: f64,
    /// SN₁ antenna noise
    pub sigma2_1: f64,
    pub sigma2_a: f64,
    pub sigma2_b: f64,
    /// RF-to-baseband conversion noise at SN₁
    pub sigma2_cr: f64,
    /// fraction of the block spent in each of phases I and II
    pub alpha: f64,
    /// power-splitting ratio sent to the harvester
    pub beta: f64,
    pub eta: f64,
    /// share of the relay power given to the primary signals
    pub mu: f64,
    /// harvester saturation threshold
    pub p_th: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub block_t: f64,
}

impl Default for SystemParams {
    /// The reference setup: η = 0.7, P_th = 0 dBm, every noise variance
    /// −40 dBm, α = 0.2, β = 0.8, μ = 0.8, r = 1/6 and P = 0 dBm (40 dB SNR).
    fn default() -> Self {
        let noise = dbm_to_watts(-40.0);
        Self {
            p_a: dbm_to_watts(0.0),
            p_b: dbm_to_watts(0.0),
            sigma2_1: noise,
            sigma2_a: noise,
            sigma2_b: noise,
            sigma2_cr: noise,
            alpha: 0.2,
            beta: 0.8,
            eta: 0.7,
            mu: 0.8,
            p_th: dbm_to_watts(0.0),
            r_a: 1.0 / 6.0,
            r_b: 1.0 / 6.0,
            block_t: 1.0,
        }
    }
}

fn positive(out: &mut Vec<Violation>, field: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        out.push(Violation::new(field, format!("must be > 0 and finite, got {v}")));
    }
}

fn open_interval(out: &mut Vec<Violation>, field: &str, v: f64, lo: f64, hi: f64) {
    if !(v > lo && v < hi) {
        out.push(Violation::new(field, format!("must lie in ({lo}, {hi}), got {v}")));
    }
}

impl SystemParams {
    /// Every violated invariant, in field order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        positive(&mut v, "p_a", self.p_a);
        positive(&mut v, "p_b", self.p_b);
        positive(&mut v, "sigma2_1", self.sigma2_1);
        positive(&mut v, "sigma2_a", self.sigma2_a);
        positive(&mut v, "sigma2_b", self.sigma2_b);
        positive(&mut v, "sigma2_cr", self.sigma2_cr);
        open_interval(&mut v, "alpha", self.alpha, 0.0, 0.5);
        open_interval(&mut v, "beta", self.beta, 0.0, 1.0);
        open_interval(&mut v, "eta", self.eta, 0.0, 1.0);
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            v.push(Violation::new("mu", format!("must lie in (0, 1], got {}", self.mu)));
        }
        positive(&mut v, "p_th", self.p_th);
        positive(&mut v, "r_a", self.r_a);
        positive(&mut v, "r_b", self.r_b);
        positive(&mut v, "block_t", self.block_t);
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    pub fn tx_power(&self, who: Destination) -> f64 {
        match who {
            Destination::A => self.p_a,
            Destination::B => self.p_b,
        }
    }

    /// Noise variance at a primary user.
    pub fn pu_noise(&self, who: Destination) -> f64 {
        match who {
            Destination::A => self.sigma2_a,
            Destination::B => self.sigma2_b,
        }
    }

    pub fn target_rate(&self, who: Destination) -> f64 {
        match who {
            Destination::A => self.r_a,
            Destination::B => self.r_b,
        }
    }

    /// Harvester slope δ = αηβ / (1 − 2α).
    pub fn eh_slope(&self) -> f64 {
        self.alpha * self.eta * self.beta / (1.0 - 2.0 * self.alpha)
    }

    /// SNR threshold γ̄ = 2^{r / (1 − 2α)} − 1 for a target rate r.
    pub fn snr_threshold(&self, rate: f64) -> f64 {
        (rate / (1.0 - 2.0 * self.alpha)).exp2() - 1.0
    }

    /// Sets both PU powers to `snr_db` above the SN₁ noise floor.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let p = self.sigma2_1 * db_to_linear(snr_db);
        self.p_a = p;
        self.p_b = p;
        self
    }
}

/// Fading law of one link: Nakagami shape m and mean power Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub m: u32,
    pub omega: f64,
}

impl LinkStats {
    pub fn new(m: u32, omega: f64) -> Result<Self> {
        let s = Self { m, omega };
        s.check()?;
        Ok(s)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.m == 0 {
            return Err(domain("LinkStats", "m", 0.0));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(domain("LinkStats", "omega", self.omega));
        }
        Ok(())
    }

    /// Gamma rate parameter m / Ω of the squared gain.
    pub fn rate(&self) -> f64 {
        f64::from(self.m) / self.omega
    }

    pub fn shape(&self) -> f64 {
        f64::from(self.m)
    }
}

/// Linear node placement: PU_a at (0,0), PU_b at (spacing,0),
/// SN₁ at (d,0) and SN₂ at (d, sn_offset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub d: f64,
    pub pu_spacing: f64,
    /// path-loss exponent
    pub v: f64,
    pub sn_offset: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            d: 4.0,
            pu_spacing: 8.0,
            v: 2.5,
            sn_offset: 4.0,
        }
    }
}

/// Mean channel powers from path loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossOmegas {
    pub a1: f64,
    pub b1: f64,
    pub ab: f64,
    pub s12: f64,
}

impl Topology {
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        positive(&mut v, "pu_spacing", self.pu_spacing);
        if !(self.d > 0.0 && self.d < self.pu_spacing) {
            v.push(Violation::new(
                "d",
                format!("must lie in (0, pu_spacing={}), got {}", self.pu_spacing, self.d),
            ));
        }
        positive(&mut v, "v", self.v);
        positive(&mut v, "sn_offset", self.sn_offset);
        v
    }

    /// Ω_a = d^{−v}, Ω_b = (spacing − d)^{−v}, Ω_ab = spacing^{−v},
    /// Ω_12 = offset^{−v}.
    pub fn path_loss_omegas(&self) -> Result<PathLossOmegas> {
        if !(self.d > 0.0 && self.d < self.pu_spacing) {
            return Err(domain("path_loss_omegas", "d", self.d));
        }
        if let Some(bad) = self.violations().into_iter().next() {
            return Err(Error::InvalidParams(vec![bad]));
        }
        Ok(PathLossOmegas {
            a1: self.d.powf(-self.v),
            b1: (self.pu_spacing - self.d).powf(-self.v),
            ab: self.pu_spacing.powf(-self.v),
            s12: self.sn_offset.powf(-self.v),
        })
    }
}

/// Nakagami shapes of the four links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shapes {
    pub m_a: u32,
    pub m_b: u32,
    pub m_ab: u32,
    pub m_12: u32,
}

impl Default for Shapes {
    fn default() -> Self {
        Self {
            m_a: 2,
            m_b: 2,
            m_ab: 1,
            m_12: 1,
        }
    }
}

/// Fading laws of all four links. Channels are reciprocal, so `a1` also
/// describes SN₁ → PU_a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSet {
    pub a1: LinkStats,
    pub b1: LinkStats,
    pub ab: LinkStats,
    pub s12: LinkStats,
}

/// The two relay-side gains for one destination j:
/// `x` is |h_{1,j}|², `y` is |h_{ĵ,1}|².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayPair {
    pub x: LinkStats,
    pub y: LinkStats,
}

impl LinkSet {
    pub fn from_topology(topo: &Topology, shapes: Shapes) -> Result<Self> {
        let om = topo.path_loss_omegas()?;
        Ok(Self {
            a1: LinkStats::new(shapes.m_a, om.a1)?,
            b1: LinkStats::new(shapes.m_b, om.b1)?,
            ab: LinkStats::new(shapes.m_ab, om.ab)?,
            s12: LinkStats::new(shapes.m_12, om.s12)?,
        })
    }

    pub fn to_pu(&self, who: Destination) -> LinkStats {
        match who {
            Destination::A => self.a1,
            Destination::B => self.b1,
        }
    }

    pub fn relay_pair(&self, dest: Destination) -> RelayPair {
        RelayPair {
            x: self.to_pu(dest),
            y: self.to_pu(dest.source()),
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        self.a1.check()?;
        self.b1.check()?;
        self.ab.check()?;
        self.s12.check()
    }
}

/// Everything one evaluation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub topology: Topology,
    pub shapes: Shapes,
}

impl Scenario {
    pub fn links(&self) -> Result<LinkSet> {
        LinkSet::from_topology(&self.topology, self.shapes)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = self.params.violations();
        v.extend(self.topology.violations());
        for (name, m) in [
            ("m_a", self.shapes.m_a),
            ("m_b", self.shapes.m_b),
            ("m_ab", self.shapes.m_ab),
            ("m_12", self.shapes.m_12),
        ] {
            if m == 0 {
                v.push(Violation::new(name, "Nakagami shape must be a positive integer"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            topology: Topology::default(),
            shapes: Shapes::default(),
        }
    }
}

/// Per-destination SNR coefficients of the linear (ε) and saturated (φ)
/// harvester regimes, plus the powers they were built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedCoeffs {
    pub direction: Destination,
    pub delta: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
    pub phi5: f64,
    pub gamma_bar_a: f64,
    pub gamma_bar_b: f64,
    /// P_j, transmit power of the destination PU
    pub p_dest: f64,
    /// P_ĵ, transmit power of the source PU
    pub p_src: f64,
    /// σ_j², noise at the destination PU
    pub sigma2_dest: f64,
    pub p_th: f64,
}

impl DerivedCoeffs {
    /// Threshold γ̄_j of this coefficient set's destination.
    pub fn gamma_bar(&self) -> f64 {
        match self.direction {
            Destination::A => self.gamma_bar_a,
            Destination::B => self.gamma_bar_b,
        }
    }
}

pub fn derive_coeffs(params: &SystemParams, direction: Destination) -> Result<DerivedCoeffs> {
    params.validate()?;
    let p_j = params.tx_power(direction);
    let p_h = params.tx_power(direction.source());
    let s2_j = params.pu_noise(direction);
    let mu = params.mu;
    let delta = params.eh_slope();
    let conv = params.sigma2_cr / (1.0 - params.beta);
    let dpt = delta * params.p_th;
    Ok(DerivedCoeffs {
        direction,
        delta,
        eps1: mu * p_h,
        eps2: 2.0 * mu * params.sigma2_1 + 2.0 * mu * conv,
        eps3: p_j * (1.0 - mu),
        eps4: p_h * (1.0 - mu),
        phi1: mu * dpt * p_h,
        phi2: 2.0 * mu * dpt * params.sigma2_1 + 2.0 * mu * dpt * conv + p_j * s2_j,
        phi3: p_j * (1.0 - mu) * dpt,
        phi4: p_h * (1.0 - mu) * dpt,
        phi5: p_h * s2_j,
        gamma_bar_a: params.snr_threshold(params.r_a),
        gamma_bar_b: params.snr_threshold(params.r_b),
        p_dest: p_j,
        p_src: p_h,
        sigma2_dest: s2_j,
        p_th: params.p_th,
    })
}
