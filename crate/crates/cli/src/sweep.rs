use std::str::FromStr;
use std::time::Instant;

use crsn_core::monte_carlo::derive_seed;
use crsn_core::{
    analyze, estimate_outage, quad_outage_probability, throughput, AnalyticReport, Destination, McEstimate, McMode,
    OracleBreakdown, QuadSpec, Scenario, SeriesControl, Violation,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::key_path;

/// The parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    SnrDb,
    Mu,
    Beta,
    Alpha,
    D,
    PThDbm,
    Rate,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::SnrDb,
        Axis::Mu,
        Axis::Beta,
        Axis::Alpha,
        Axis::D,
        Axis::PThDbm,
        Axis::Rate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::SnrDb => "snr_db",
            Axis::Mu => "mu",
            Axis::Beta => "beta",
            Axis::Alpha => "alpha",
            Axis::D => "d",
            Axis::PThDbm => "p_th_dbm",
            Axis::Rate => "rate",
        }
    }

    /// CSV column name, with the unit where there is one.
    pub fn column(self) -> &'static str {
        match self {
            Axis::Rate => "rate_bps_hz",
            other => other.name(),
        }
    }

    pub fn apply(self, s: &mut Scenario, v: f64) {
        let p = &mut s.params;
        match self {
            Axis::SnrDb => *p = p.with_snr_db(v),
            Axis::Mu => p.mu = v,
            Axis::Beta => p.beta = v,
            Axis::Alpha => p.alpha = v,
            Axis::D => s.topology.d = v,
            Axis::PThDbm => p.p_th = crsn_core::system_model::dbm_to_watts(v),
            Axis::Rate => {
                p.r_a = v;
                p.r_b = v;
            }
        }
    }

    /// Current value of the axis in a scenario.
    pub fn read(self, s: &Scenario) -> f64 {
        let p = &s.params;
        match self {
            Axis::SnrDb => 10.0 * (p.p_a / p.sigma2_1).log10(),
            Axis::Mu => p.mu,
            Axis::Beta => p.beta,
            Axis::Alpha => p.alpha,
            Axis::D => s.topology.d,
            Axis::PThDbm => crsn_core::system_model::watts_to_dbm(p.p_th),
            Axis::Rate => p.r_a,
        }
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Axis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<_> = Axis::ALL.iter().map(|a| a.name()).collect();
            format!("unknown axis {s:?}; expected one of {}", names.join(", "))
        })
    }
}

/// Overrides that define one curve of a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Curve {
    pub label: String,
    pub m_a: Option<u32>,
    pub m_b: Option<u32>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub r_a: Option<f64>,
    pub r_b: Option<f64>,
}

impl Curve {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(v) = self.m_a {
            s.shapes.m_a = v;
        }
        if let Some(v) = self.m_b {
            s.shapes.m_b = v;
        }
        let p = &mut s.params;
        for (src, dst) in [
            (self.mu, &mut p.mu),
            (self.alpha, &mut p.alpha),
            (self.beta, &mut p.beta),
            (self.r_a, &mut p.r_a),
            (self.r_b, &mut p.r_b),
        ] {
            if let Some(v) = src {
                *dst = v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Engines {
    pub analytic: bool,
    pub montecarlo: bool,
    pub oracle: bool,
}

impl Default for Engines {
    fn default() -> Self {
        Self {
            analytic: true,
            montecarlo: false,
            oracle: false,
        }
    }
}

impl Engines {
    pub fn parse_list<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self, String> {
        let mut e = Engines {
            analytic: false,
            montecarlo: false,
            oracle: false,
        };
        for n in names {
            match n.trim() {
                "analytic" => e.analytic = true,
                "montecarlo" | "mc" => e.montecarlo = true,
                "oracle" => e.oracle = true,
                other => return Err(format!("unknown engine {other:?}; expected analytic, montecarlo or oracle")),
            }
        }
        if !(e.analytic || e.montecarlo || e.oracle) {
            return Err("at least one engine is required".into());
        }
        Ok(e)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.analytic {
            v.push("analytic");
        }
        if self.montecarlo {
            v.push("montecarlo");
        }
        if self.oracle {
            v.push("oracle");
        }
        v
    }
}

impl FromStr for Engines {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Engines::parse_list(s.split(','))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub base: Scenario,
    /// Empty means one curve at the base configuration.
    pub curves: Vec<Curve>,
    pub engines: Engines,
    pub trials: u64,
    pub seed: u64,
    pub mc_mode: McMode,
    pub series: SeriesControl,
    pub quad: QuadSpec,
}

impl SweepSpec {
    pub fn curves(&self) -> Vec<Curve> {
        if self.curves.is_empty() {
            vec![Curve {
                label: "base".into(),
                ..Curve::default()
            }]
        } else {
            self.curves.clone()
        }
    }

    pub fn scenario(&self, curve: &Curve, value: f64) -> Scenario {
        let mut s = self.base;
        curve.apply(&mut s);
        self.axis.apply(&mut s, value);
        s
    }

    /// Grid, control and per-point checks. Base-record problems are left to
    /// the caller so they are reported once.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.grid.is_empty() {
            v.push(Violation::new("sweep.grid", "must not be empty"));
        }
        if self.grid.iter().any(|g| !g.is_finite()) {
            v.push(Violation::new("sweep.grid", "values must be finite"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            v.push(Violation::new("sweep.grid", "must be strictly increasing"));
        }
        if self.engines.montecarlo && self.trials == 0 {
            v.push(Violation::new("controls.trials", "must be > 0 when montecarlo is enabled"));
        }
        if SeriesControl::new(self.series.rel_tol, self.series.max_terms).is_err() {
            v.push(Violation::new(
                "controls.series_rel_tol",
                "series control needs rel_tol in (0, 1) and max_terms > 0",
            ));
        }
        if self.quad.check().is_err() {
            v.push(Violation::new("controls.quad_abs_tol", "quadrature tolerances must be > 0"));
        }
        if !self.base.violations().is_empty() {
            return v;
        }
        let curves = self.curves();
        for (ci, c) in curves.iter().enumerate() {
            let mut s = self.base;
            c.apply(&mut s);
            for bad in s.violations() {
                v.push(Violation::new(format!("curve[{ci}].{}", bad.field), bad.message));
            }
        }
        for (gi, &g) in self.grid.iter().enumerate() {
            for c in &curves {
                for bad in self.scenario(c, g).violations() {
                    v.push(Violation::new(
                        format!("sweep.grid[{gi}]"),
                        format!("{} ({})", bad.message, key_path(&bad.field)),
                    ));
                }
            }
        }
        v
    }
}

/// Results of every requested engine for one destination.
#[derive(Debug, Clone, Serialize, Default)]
pub struct DirectionResult {
    pub analytic: Option<crsn_core::CdfBreakdown>,
    pub mc: Option<McEstimate>,
    pub oracle: Option<OracleBreakdown>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub curve: String,
    pub curve_index: usize,
    pub point_index: usize,
    pub axis_value: f64,
    pub a: DirectionResult,
    pub b: DirectionResult,
    pub throughput: Option<f64>,
    pub throughput_mc: Option<f64>,
    pub flags: Vec<String>,
    pub errors: Vec<String>,
    pub elapsed_ms: f64,
}

impl SweepRow {
    pub fn direction(&self, d: Destination) -> &DirectionResult {
        match d {
            Destination::A => &self.a,
            Destination::B => &self.b,
        }
    }

    fn a_or_b(&mut self, d: Destination) -> &mut DirectionResult {
        match d {
            Destination::A => &mut self.a,
            Destination::B => &mut self.b,
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct SweepSummary {
    pub rows: usize,
    /// max |analytic − oracle| over both destinations
    pub max_abs_analytic_oracle: Option<f64>,
    /// max |analytic − MC| / stderr over points with a nonzero stderr
    pub max_z_analytic_mc: Option<f64>,
    pub flagged_rows: usize,
    pub failed_rows: usize,
}

fn max_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |a| a.max(b)))
}

pub fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let mut s = SweepSummary {
        rows: rows.len(),
        ..SweepSummary::default()
    };
    for r in rows {
        if !r.flags.is_empty() {
            s.flagged_rows += 1;
        }
        if !r.errors.is_empty() {
            s.failed_rows += 1;
        }
        for d in Destination::BOTH {
            let dr = r.direction(d);
            let Some(an) = dr.analytic else { continue };
            if let Some(o) = dr.oracle {
                s.max_abs_analytic_oracle = max_opt(s.max_abs_analytic_oracle, (an.op - o.op).abs());
            }
            if let Some(mc) = dr.mc {
                if mc.stderr > 0.0 {
                    s.max_z_analytic_mc = max_opt(s.max_z_analytic_mc, (an.op - mc.op_hat).abs() / mc.stderr);
                }
            }
        }
    }
    s
}

fn evaluate(spec: &SweepSpec, ci: usize, curve: &Curve, pi: usize, value: f64) -> SweepRow {
    let start = Instant::now();
    let scenario = spec.scenario(curve, value);
    let mut row = SweepRow {
        curve: curve.label.clone(),
        curve_index: ci,
        point_index: pi,
        axis_value: value,
        a: DirectionResult::default(),
        b: DirectionResult::default(),
        throughput: None,
        throughput_mc: None,
        flags: Vec::new(),
        errors: Vec::new(),
        elapsed_ms: 0.0,
    };
    if spec.engines.analytic {
        match analyze(&scenario, spec.series) {
            Ok(AnalyticReport { a, b, throughput }) => {
                for (d, bd) in [(Destination::A, &a), (Destination::B, &b)] {
                    row.flags.extend(bd.flags.labels().into_iter().map(|l| format!("{}:{l}", d.label())));
                }
                row.a.analytic = Some(a);
                row.b.analytic = Some(b);
                row.throughput = Some(throughput);
            }
            Err(e) => row.errors.push(format!("analytic: {e}")),
        }
    }
    for d in Destination::BOTH {
        if spec.engines.montecarlo {
            let seed = derive_seed(spec.seed, &[ci as u64, pi as u64, d.index()]);
            match estimate_outage(&scenario, d, spec.trials, seed, spec.mc_mode) {
                Ok(e) => {
                    row.a_or_b(d).mc = Some(e);
                }
                Err(e) => row.errors.push(format!("montecarlo({}): {e}", d.label())),
            }
        }
        if spec.engines.oracle {
            match quad_outage_probability(&scenario, d, &spec.quad) {
                Ok(o) => {
                    if !o.converged {
                        row.flags.push(format!("{}:oracle_unconverged", d.label()));
                    }
                    row.a_or_b(d).oracle = Some(o);
                }
                Err(e) => row.errors.push(format!("oracle({}): {e}", d.label())),
            }
        }
    }
    if let (Some(a), Some(b)) = (row.a.mc, row.b.mc) {
        row.throughput_mc = throughput(&scenario.params, a.op_hat, b.op_hat).ok();
    }
    row.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    row
}

/// Evaluates every (curve, grid point) pair in parallel. Rows come back
/// curve-major in grid order; engine failures are kept on the row.
pub fn run_sweep(spec: &SweepSpec) -> Result<(Vec<SweepRow>, SweepSummary), Vec<Violation>> {
    let mut bad: Vec<Violation> = spec
        .base
        .violations()
        .into_iter()
        .map(|v| Violation::new(key_path(&v.field), v.message))
        .collect();
    bad.extend(spec.violations());
    if !bad.is_empty() {
        return Err(bad);
    }
    let curves = spec.curves();
    let jobs: Vec<(usize, usize)> = (0..curves.len())
        .flat_map(|c| (0..spec.grid.len()).map(move |p| (c, p)))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(c, p)| evaluate(spec, c, &curves[c], p, spec.grid[p]))
        .collect();
    let summary = summarize(&rows);
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

    #[test]
    fn axis_names_round_trip() {
        for a in Axis::ALL {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert!("gain".parse::<Axis>().is_err());
    }

    #[test]
    fn axis_apply_then_read() {
        for (a, v) in [
            (Axis::SnrDb, 27.5),
            (Axis::Mu, 0.65),
            (Axis::Beta, 0.4),
            (Axis::Alpha, 0.15),
            (Axis::D, 3.0),
            (Axis::PThDbm, -7.0),
            (Axis::Rate, 0.4),
        ] {
            let mut s = Scenario::default();
            a.apply(&mut s, v);
            assert!((a.read(&s) - v).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn engines_parse() {
        let e: Engines = "analytic,oracle".parse().unwrap();
        assert!(e.analytic && e.oracle && !e.montecarlo);
        assert!("".parse::<Engines>().is_err());
        assert!("analytic,fast".parse::<Engines>().is_err());
    }

    #[test]
    fn single_point_analytic_only() {
        let spec = validate_config("").unwrap();
        let (rows, summary) = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].a.mc.is_none() && rows[0].a.oracle.is_none());
        assert!(summary.max_z_analytic_mc.is_none());
    }

    #[test]
    fn rows_keep_grid_order() {
        let spec = validate_config(
            "[sweep]\naxis = \"snr_db\"\nstart = 10\nstop = 40\nstep = 5\n[[curve]]\nlabel = \"x\"\n[[curve]]\nlabel = \"y\"\nmu = 0.9\n",
        )
        .unwrap();
        let (rows, _) = run_sweep(&spec).unwrap();
        let order: Vec<(usize, usize)> = rows.iter().map(|r| (r.curve_index, r.point_index)).collect();
        let want: Vec<(usize, usize)> = (0..2).flat_map(|c| (0..7).map(move |p| (c, p))).collect();
        assert_eq!(order, want);
    }

    #[test]
    fn analytic_and_oracle_agree_on_fig2() {
        let mut spec = validate_config(crate::presets::FIG2).unwrap();
        spec.engines = "analytic,oracle".parse().unwrap();
        let (rows, _) = run_sweep(&spec).unwrap();
        for r in rows.iter().filter(|r| r.axis_value >= 20.0) {
            for d in Destination::BOTH {
                let dr = r.direction(d);
                let gap = (dr.analytic.unwrap().op - dr.oracle.unwrap().op).abs();
                assert!(gap <= 1e-5, "{} {}: {gap}", r.curve, r.axis_value);
            }
        }
    }
}
