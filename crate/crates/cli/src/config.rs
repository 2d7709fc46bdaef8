//! TOML run configuration.
//!
//! ```toml
//! [system]
//! snr_db = 40.0          # or p_a_dbm / p_a_w and p_b_dbm / p_b_w
//! sigma2_1_dbm = -40.0   # every power-like key takes an explicit _w or _dbm suffix
//! alpha = 0.2
//!
//! [topology]
//! d = 4.0
//!
//! [links]
//! m_a = 2
//!
//! [sweep]
//! axis = "snr_db"
//! grid = [10.0, 20.0, 30.0]   # or start / stop / step
//!
//! [[curve]]
//! label = "m=(3,2) mu=0.9"
//! m_a = 3
//! mu = 0.9
//!
//! [controls]
//! engines = ["analytic", "oracle"]
//! trials = 1000000
//! seed = 24301
//! ```
//!
//! Parsing never stops at the first problem: every unknown key, type error
//! and out-of-range value is reported with its key path.

use std::collections::BTreeSet;

use crsn_core::system_model::dbm_to_watts;
use crsn_core::{McMode, QuadSpec, Scenario, SeriesControl, Shapes, SystemParams, Topology, Violation};
use toml::{Table, Value};

use crate::sweep::{Axis, Curve, Engines, SweepSpec};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 24_301;

/// Quadrature tolerances used by sweeps unless overridden.
pub fn default_quad() -> QuadSpec {
    QuadSpec {
        abs_tol: 1e-8,
        rel_tol: 1e-8,
        ..QuadSpec::default()
    }
}

struct Reader<'a> {
    errs: &'a mut Vec<Violation>,
}

impl Reader<'_> {
    fn push(&mut self, path: String, msg: impl Into<String>) {
        self.errs.push(Violation::new(path, msg));
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.push(name.to_string(), "must be a table");
                None
            }
        }
    }

    fn unknown(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.push(format!("{prefix}.{k}"), "unknown key");
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, prefix: &str, key: &str) -> Option<f64> {
        let v = t?.get(key)?;
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.push(format!("{prefix}.{key}"), "must be a number");
                None
            }
        }
    }

    fn uint(&mut self, t: Option<&Table>, prefix: &str, key: &str) -> Option<u64> {
        let v = t?.get(key)?;
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.push(format!("{prefix}.{key}"), "must be a non-negative integer");
                None
            }
        }
    }

    fn shape(&mut self, t: Option<&Table>, prefix: &str, key: &str) -> Option<u32> {
        let v = self.uint(t, prefix, key)?;
        if v == 0 || v > 64 {
            self.push(format!("{prefix}.{key}"), format!("must be an integer in 1..=64, got {v}"));
            return None;
        }
        Some(v as u32)
    }

    fn string(&mut self, t: Option<&Table>, prefix: &str, key: &str) -> Option<String> {
        let v = t?.get(key)?;
        match v {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.push(format!("{prefix}.{key}"), "must be a string");
                None
            }
        }
    }

    /// A power given either as `<stem>_w` or `<stem>_dbm`.
    fn power(&mut self, t: Option<&Table>, prefix: &str, stem: &str) -> Option<f64> {
        let w = self.float(t, prefix, &format!("{stem}_w"));
        let dbm = self.float(t, prefix, &format!("{stem}_dbm"));
        match (w, dbm) {
            (Some(_), Some(_)) => {
                self.push(format!("{prefix}.{stem}"), format!("give only one of {stem}_w and {stem}_dbm"));
                None
            }
            (Some(w), None) => Some(w),
            (None, Some(d)) => Some(dbm_to_watts(d)),
            (None, None) => None,
        }
    }

    fn float_list(&mut self, t: Option<&Table>, prefix: &str, key: &str) -> Option<Vec<f64>> {
        let v = t?.get(key)?;
        let path = format!("{prefix}.{key}");
        let Value::Array(items) = v else {
            self.push(path, "must be an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, it) in items.iter().enumerate() {
            match it {
                Value::Float(f) => out.push(*f),
                Value::Integer(n) => out.push(*n as f64),
                _ => self.push(format!("{path}[{i}]"), "must be a number"),
            }
        }
        Some(out)
    }
}

const SYSTEM_KEYS: &[&str] = &[
    "snr_db",
    "p_a_w",
    "p_a_dbm",
    "p_b_w",
    "p_b_dbm",
    "sigma2_1_w",
    "sigma2_1_dbm",
    "sigma2_a_w",
    "sigma2_a_dbm",
    "sigma2_b_w",
    "sigma2_b_dbm",
    "sigma2_cr_w",
    "sigma2_cr_dbm",
    "p_th_w",
    "p_th_dbm",
    "alpha",
    "beta",
    "eta",
    "mu",
    "r_a",
    "r_b",
    "block_t",
];
const TOPOLOGY_KEYS: &[&str] = &["d", "pu_spacing", "v", "sn_offset"];
const LINK_KEYS: &[&str] = &["m_a", "m_b", "m_ab", "m_12"];
const SWEEP_KEYS: &[&str] = &["axis", "grid", "start", "stop", "step"];
const CURVE_KEYS: &[&str] = &["label", "m_a", "m_b", "mu", "alpha", "beta", "rate", "r_a", "r_b"];
const CONTROL_KEYS: &[&str] = &[
    "engines",
    "trials",
    "seed",
    "mc_mode",
    "series_rel_tol",
    "series_max_terms",
    "quad_abs_tol",
    "quad_rel_tol",
    "quad_max_subdivisions",
];
const SECTIONS: &[&str] = &["system", "topology", "links", "sweep", "curve", "controls"];

fn read_system(r: &mut Reader, t: Option<&Table>) -> SystemParams {
    let s = "system";
    if let Some(t) = t {
        r.unknown(t, s, SYSTEM_KEYS);
    }
    let mut p = SystemParams::default();
    if let Some(v) = r.power(t, s, "sigma2_1") {
        p.sigma2_1 = v;
    }
    if let Some(v) = r.power(t, s, "sigma2_a") {
        p.sigma2_a = v;
    }
    if let Some(v) = r.power(t, s, "sigma2_b") {
        p.sigma2_b = v;
    }
    if let Some(v) = r.power(t, s, "sigma2_cr") {
        p.sigma2_cr = v;
    }
    if let Some(v) = r.power(t, s, "p_th") {
        p.p_th = v;
    }
    let snr = r.float(t, s, "snr_db");
    let pa = r.power(t, s, "p_a");
    let pb = r.power(t, s, "p_b");
    match snr {
        Some(_) if pa.is_some() || pb.is_some() => {
            r.push(format!("{s}.snr_db"), "conflicts with an explicit p_a/p_b");
        }
        Some(db) => p = p.with_snr_db(db),
        None => {
            if let Some(v) = pa {
                p.p_a = v;
            }
            if let Some(v) = pb {
                p.p_b = v;
            }
        }
    }
    for (key, slot) in [
        ("alpha", &mut p.alpha),
        ("beta", &mut p.beta),
        ("eta", &mut p.eta),
        ("mu", &mut p.mu),
        ("r_a", &mut p.r_a),
        ("r_b", &mut p.r_b),
        ("block_t", &mut p.block_t),
    ] {
        if let Some(v) = r.float(t, s, key) {
            *slot = v;
        }
    }
    p
}

fn read_topology(r: &mut Reader, t: Option<&Table>) -> Topology {
    let s = "topology";
    if let Some(t) = t {
        r.unknown(t, s, TOPOLOGY_KEYS);
    }
    let mut topo = Topology::default();
    for (key, slot) in [
        ("d", &mut topo.d),
        ("pu_spacing", &mut topo.pu_spacing),
        ("v", &mut topo.v),
        ("sn_offset", &mut topo.sn_offset),
    ] {
        if let Some(v) = r.float(t, s, key) {
            *slot = v;
        }
    }
    topo
}

fn read_links(r: &mut Reader, t: Option<&Table>) -> Shapes {
    let s = "links";
    if let Some(t) = t {
        r.unknown(t, s, LINK_KEYS);
    }
    let mut sh = Shapes::default();
    for (key, slot) in [
        ("m_a", &mut sh.m_a),
        ("m_b", &mut sh.m_b),
        ("m_ab", &mut sh.m_ab),
        ("m_12", &mut sh.m_12),
    ] {
        if let Some(v) = r.shape(t, s, key) {
            *slot = v;
        }
    }
    sh
}

fn read_grid(r: &mut Reader, t: Option<&Table>) -> Vec<f64> {
    let s = "sweep";
    let grid = r.float_list(t, s, "grid");
    let start = r.float(t, s, "start");
    let stop = r.float(t, s, "stop");
    let step = r.float(t, s, "step");
    let ranged = start.is_some() || stop.is_some() || step.is_some();
    match (grid, ranged) {
        (Some(_), true) => {
            r.push(format!("{s}.grid"), "give either grid or start/stop/step, not both");
            Vec::new()
        }
        (Some(g), false) => g,
        (None, true) => match (start, stop, step) {
            (Some(a), Some(b), Some(h)) if h > 0.0 && b >= a => {
                let n = ((b - a) / h + 1e-9).floor() as usize;
                (0..=n).map(|i| a + h * i as f64).collect()
            }
            (Some(_), Some(_), Some(_)) => {
                r.push(format!("{s}.step"), "must be > 0 with stop >= start");
                Vec::new()
            }
            _ => {
                r.push(format!("{s}.start"), "start, stop and step must all be given");
                Vec::new()
            }
        },
        (None, false) => Vec::new(),
    }
}

fn read_curves(r: &mut Reader, root: &Table) -> Vec<Curve> {
    let Some(v) = root.get("curve") else {
        return Vec::new();
    };
    let Value::Array(items) = v else {
        r.push("curve".into(), "must be an array of tables ([[curve]])");
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, it) in items.iter().enumerate() {
        let prefix = format!("curve[{i}]");
        let Value::Table(t) = it else {
            r.push(prefix, "must be a table");
            continue;
        };
        r.unknown(t, &prefix, CURVE_KEYS);
        let t = Some(t);
        let rate = r.float(t, &prefix, "rate");
        let mut c = Curve {
            label: r.string(t, &prefix, "label").unwrap_or_else(|| format!("curve{i}")),
            m_a: r.shape(t, &prefix, "m_a"),
            m_b: r.shape(t, &prefix, "m_b"),
            mu: r.float(t, &prefix, "mu"),
            alpha: r.float(t, &prefix, "alpha"),
            beta: r.float(t, &prefix, "beta"),
            r_a: r.float(t, &prefix, "r_a"),
            r_b: r.float(t, &prefix, "r_b"),
        };
        if let Some(rate) = rate {
            if c.r_a.is_some() || c.r_b.is_some() {
                r.push(format!("{prefix}.rate"), "conflicts with r_a/r_b");
            }
            c.r_a = Some(rate);
            c.r_b = Some(rate);
        }
        out.push(c);
    }
    let labels: BTreeSet<&str> = out.iter().map(|c| c.label.as_str()).collect();
    if labels.len() != out.len() {
        r.push("curve".into(), "labels must be unique");
    }
    out
}

fn read_controls(r: &mut Reader, t: Option<&Table>, spec: &mut SweepSpec) {
    let s = "controls";
    if let Some(t) = t {
        r.unknown(t, s, CONTROL_KEYS);
    }
    if let Some(v) = t.and_then(|t| t.get("engines")) {
        match v {
            Value::Array(items) => {
                let mut names = Vec::new();
                for (i, it) in items.iter().enumerate() {
                    match it.as_str() {
                        Some(n) => names.push(n.to_string()),
                        None => r.push(format!("{s}.engines[{i}]"), "must be a string"),
                    }
                }
                match Engines::parse_list(names.iter().map(String::as_str)) {
                    Ok(e) => spec.engines = e,
                    Err(msg) => r.push(format!("{s}.engines"), msg),
                }
            }
            _ => r.push(format!("{s}.engines"), "must be an array of strings"),
        }
    }
    if let Some(v) = r.uint(t, s, "trials") {
        spec.trials = v;
    }
    if let Some(v) = r.uint(t, s, "seed") {
        spec.seed = v;
    }
    if let Some(m) = r.string(t, s, "mc_mode") {
        match m.parse::<McMode>() {
            Ok(m) => spec.mc_mode = m,
            Err(e) => r.push(format!("{s}.mc_mode"), e),
        }
    }
    if let Some(v) = r.float(t, s, "series_rel_tol") {
        spec.series.rel_tol = v;
    }
    if let Some(v) = r.uint(t, s, "series_max_terms") {
        spec.series.max_terms = v as usize;
    }
    if let Some(v) = r.float(t, s, "quad_abs_tol") {
        spec.quad.abs_tol = v;
    }
    if let Some(v) = r.float(t, s, "quad_rel_tol") {
        spec.quad.rel_tol = v;
    }
    if let Some(v) = r.uint(t, s, "quad_max_subdivisions") {
        spec.quad.max_subdivisions = v as usize;
    }
}

/// Parses and checks a configuration, returning every violation found.
pub fn validate_config(raw: &str) -> Result<SweepSpec, Vec<Violation>> {
    let root: Table = match raw.parse() {
        Ok(t) => t,
        Err(e) => return Err(vec![Violation::new("<toml>", e.to_string())]),
    };
    let mut errs = Vec::new();
    let mut r = Reader { errs: &mut errs };
    for k in root.keys() {
        if !SECTIONS.contains(&k.as_str()) {
            r.push(k.clone(), "unknown section");
        }
    }
    let system = r.section(&root, "system");
    let topology = r.section(&root, "topology");
    let links = r.section(&root, "links");
    let sweep = r.section(&root, "sweep");
    let controls = r.section(&root, "controls");

    let base = Scenario {
        params: read_system(&mut r, system),
        topology: read_topology(&mut r, topology),
        shapes: read_links(&mut r, links),
    };
    if let Some(t) = sweep {
        r.unknown(t, "sweep", SWEEP_KEYS);
    }
    let axis = match r.string(sweep, "sweep", "axis") {
        Some(name) => match name.parse::<Axis>() {
            Ok(a) => Some(a),
            Err(e) => {
                r.push("sweep.axis".into(), e);
                None
            }
        },
        None => None,
    };
    let mut grid = read_grid(&mut r, sweep);
    let curves = read_curves(&mut r, &root);

    let mut spec = SweepSpec {
        axis: axis.unwrap_or(Axis::SnrDb),
        grid: Vec::new(),
        base,
        curves,
        engines: Engines::default(),
        trials: DEFAULT_TRIALS,
        seed: DEFAULT_SEED,
        mc_mode: McMode::SnrFormula,
        series: SeriesControl::default(),
        quad: default_quad(),
    };
    read_controls(&mut r, controls, &mut spec);

    if grid.is_empty() && sweep.is_none() {
        // no sweep section: a single point at the base configuration
        grid = vec![spec.axis.read(&spec.base)];
    }
    spec.grid = grid;

    errs.extend(
        spec.base
            .violations()
            .into_iter()
            .map(|v| Violation::new(key_path(&v.field), v.message)),
    );
    errs.extend(spec.violations());
    dedup(&mut errs);
    if errs.is_empty() {
        Ok(spec)
    } else {
        Err(errs)
    }
}

/// Maps a record field name to the config key that sets it.
pub(crate) fn key_path(field: &str) -> String {
    if TOPOLOGY_KEYS.contains(&field) {
        format!("topology.{field}")
    } else if LINK_KEYS.contains(&field) {
        format!("links.{field}")
    } else {
        format!("system.{field}")
    }
}

fn dedup(v: &mut Vec<Violation>) {
    let mut seen = BTreeSet::new();
    v.retain(|x| seen.insert((x.field.clone(), x.message.clone())));
}

/// Writes a configuration that parses back to the same record.
pub fn emit_config(spec: &SweepSpec) -> String {
    let p = &spec.base.params;
    let mut system = Table::new();
    for (k, v) in [
        ("p_a_w", p.p_a),
        ("p_b_w", p.p_b),
        ("sigma2_1_w", p.sigma2_1),
        ("sigma2_a_w", p.sigma2_a),
        ("sigma2_b_w", p.sigma2_b),
        ("sigma2_cr_w", p.sigma2_cr),
        ("p_th_w", p.p_th),
        ("alpha", p.alpha),
        ("beta", p.beta),
        ("eta", p.eta),
        ("mu", p.mu),
        ("r_a", p.r_a),
        ("r_b", p.r_b),
        ("block_t", p.block_t),
    ] {
        system.insert(k.into(), Value::Float(v));
    }
    let t = &spec.base.topology;
    let mut topology = Table::new();
    for (k, v) in [("d", t.d), ("pu_spacing", t.pu_spacing), ("v", t.v), ("sn_offset", t.sn_offset)] {
        topology.insert(k.into(), Value::Float(v));
    }
    let sh = &spec.base.shapes;
    let mut links = Table::new();
    for (k, v) in [("m_a", sh.m_a), ("m_b", sh.m_b), ("m_ab", sh.m_ab), ("m_12", sh.m_12)] {
        links.insert(k.into(), Value::Integer(i64::from(v)));
    }
    let mut sweep = Table::new();
    sweep.insert("axis".into(), Value::String(spec.axis.name().into()));
    sweep.insert("grid".into(), Value::Array(spec.grid.iter().map(|&g| Value::Float(g)).collect()));
    let curves: Vec<Value> = spec
        .curves
        .iter()
        .map(|c| {
            let mut t = Table::new();
            t.insert("label".into(), Value::String(c.label.clone()));
            for (k, v) in [("m_a", c.m_a), ("m_b", c.m_b)] {
                if let Some(v) = v {
                    t.insert(k.into(), Value::Integer(i64::from(v)));
                }
            }
            for (k, v) in [("mu", c.mu), ("alpha", c.alpha), ("beta", c.beta), ("r_a", c.r_a), ("r_b", c.r_b)] {
                if let Some(v) = v {
                    t.insert(k.into(), Value::Float(v));
                }
            }
            Value::Table(t)
        })
        .collect();
    let mut controls = Table::new();
    controls.insert(
        "engines".into(),
        Value::Array(spec.engines.names().into_iter().map(|n| Value::String(n.into())).collect()),
    );
    controls.insert("trials".into(), Value::Integer(spec.trials as i64));
    controls.insert("seed".into(), Value::Integer(spec.seed as i64));
    controls.insert("mc_mode".into(), Value::String(spec.mc_mode.label().into()));
    controls.insert("series_rel_tol".into(), Value::Float(spec.series.rel_tol));
    controls.insert("series_max_terms".into(), Value::Integer(spec.series.max_terms as i64));
    controls.insert("quad_abs_tol".into(), Value::Float(spec.quad.abs_tol));
    controls.insert("quad_rel_tol".into(), Value::Float(spec.quad.rel_tol));
    controls.insert("quad_max_subdivisions".into(), Value::Integer(spec.quad.max_subdivisions as i64));

    let mut root = Table::new();
    root.insert("system".into(), Value::Table(system));
    root.insert("topology".into(), Value::Table(topology));
    root.insert("links".into(), Value::Table(links));
    root.insert("sweep".into(), Value::Table(sweep));
    if !curves.is_empty() {
        root.insert("curve".into(), Value::Array(curves));
    }
    root.insert("controls".into(), Value::Table(controls));
    toml::to_string(&root).expect("plain tables always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(errs: &[Violation]) -> Vec<&str> {
        errs.iter().map(|v| v.field.as_str()).collect()
    }

    #[test]
    fn empty_config_is_the_reference_point() {
        let spec = validate_config("").unwrap();
        let p = spec.base.params;
        assert_eq!(p.eta, 0.7);
        assert!((p.p_th - 1e-3).abs() < 1e-18);
        assert!((p.sigma2_1 - 1e-7).abs() < 1e-22);
        assert_eq!(spec.grid.len(), 1);
    }

    #[test]
    fn alpha_half_rejected() {
        let errs = validate_config("[system]\nalpha = 0.5\n").unwrap_err();
        assert!(fields(&errs).contains(&"system.alpha"), "{errs:?}");
    }

    #[test]
    fn mu_zero_rejected() {
        let errs = validate_config("[system]\nmu = 0\n").unwrap_err();
        assert!(fields(&errs).contains(&"system.mu"), "{errs:?}");
    }

    #[test]
    fn reports_every_violation() {
        let raw = r#"
            bogus = 1
            [system]
            alpha = 0.7
            mu = 0
            p_th = 1.0
            [links]
            m_a = 0
            [sweep]
            axis = "gain"
            [controls]
            engines = ["analytic", "psychic"]
        "#;
        let errs = validate_config(raw).unwrap_err();
        let f = fields(&errs);
        for want in [
            "bogus",
            "system.alpha",
            "system.mu",
            "system.p_th",
            "links.m_a",
            "sweep.axis",
            "controls.engines",
        ] {
            assert!(f.contains(&want), "{want} missing from {f:?}");
        }
    }

    #[test]
    fn dbm_and_watts_agree() {
        let a = validate_config("[system]\np_th_dbm = -10\n").unwrap();
        let b = validate_config("[system]\np_th_w = 1e-4\n").unwrap();
        assert!((a.base.params.p_th - b.base.params.p_th).abs() < 1e-18);
        let errs = validate_config("[system]\np_th_dbm = -10\np_th_w = 1e-4\n").unwrap_err();
        assert_eq!(fields(&errs), ["system.p_th"]);
    }

    #[test]
    fn snr_conflicts_with_powers() {
        let errs = validate_config("[system]\nsnr_db = 30\np_a_w = 1\n").unwrap_err();
        assert_eq!(fields(&errs), ["system.snr_db"]);
    }

    #[test]
    fn grid_must_be_strictly_ordered() {
        let errs = validate_config("[sweep]\naxis = \"mu\"\ngrid = [0.7, 0.7, 0.9]\n").unwrap_err();
        assert!(fields(&errs).contains(&"sweep.grid"), "{errs:?}");
    }

    #[test]
    fn grid_points_are_checked() {
        let errs = validate_config("[sweep]\naxis = \"mu\"\ngrid = [0.5, 1.5]\n").unwrap_err();
        assert!(fields(&errs).contains(&"sweep.grid[1]"), "{errs:?}");
    }

    #[test]
    fn range_grid() {
        let spec = validate_config("[sweep]\naxis = \"snr_db\"\nstart = 10\nstop = 50\nstep = 10\n").unwrap();
        assert_eq!(spec.grid, [10.0, 20.0, 30.0, 40.0, 50.0]);
    }

    #[test]
    fn round_trip() {
        for raw in [
            crate::presets::FIG2,
            crate::presets::FIG3,
            "[system]\nsnr_db = 33.3\nsigma2_cr_dbm = -50\n[links]\nm_12 = 3\n[controls]\nmc_mode = \"full-signal\"\n",
        ] {
            let a = validate_config(raw).unwrap();
            let b = validate_config(&emit_config(&a)).unwrap();
            assert_eq!(a, b);
        }
    }
}
