//! Built-in sweeps for the two reference experiments.

use anyhow::bail;

use crate::config::validate_config;
use crate::sweep::SweepSpec;

/// Outage versus SNR for several fading/power-allocation pairs. The
/// (3, 2, 0.8) curve gives a same-μ partner for the (1, 1, 0.8) curve.
pub const FIG2: &str = r#"
[system]
alpha = 0.2
beta = 0.8
eta = 0.7
r_a = 0.16666666666666666
r_b = 0.16666666666666666
p_th_dbm = 0.0
sigma2_1_dbm = -40.0
sigma2_a_dbm = -40.0
sigma2_b_dbm = -40.0
sigma2_cr_dbm = -40.0

[topology]
d = 4.0

[sweep]
axis = "snr_db"
start = 10.0
stop = 50.0
step = 2.5

[[curve]]
label = "m=(1,1) mu=0.8"
m_a = 1
m_b = 1
mu = 0.8

[[curve]]
label = "m=(2,2) mu=0.8"
m_a = 2
m_b = 2
mu = 0.8

[[curve]]
label = "m=(3,2) mu=0.7"
m_a = 3
m_b = 2
mu = 0.7

[[curve]]
label = "m=(3,2) mu=0.8"
m_a = 3
m_b = 2
mu = 0.8

[[curve]]
label = "m=(3,2) mu=0.9"
m_a = 3
m_b = 2
mu = 0.9

[controls]
engines = ["analytic", "montecarlo", "oracle"]
"#;

/// Sum throughput versus SNR for several per-user target rates.
pub const FIG3: &str = r#"
[system]
alpha = 0.1
beta = 0.8
eta = 0.7
mu = 0.8
p_th_dbm = 0.0
sigma2_1_dbm = -40.0
sigma2_a_dbm = -40.0
sigma2_b_dbm = -40.0
sigma2_cr_dbm = -40.0

[topology]
d = 4.0

[links]
m_a = 3
m_b = 2

[sweep]
axis = "snr_db"
start = 0.0
stop = 50.0
step = 2.5

[[curve]]
label = "r=1/6"
rate = 0.16666666666666666

[[curve]]
label = "r=1/3"
rate = 0.3333333333333333

[[curve]]
label = "r=1/2"
rate = 0.5

[controls]
engines = ["analytic", "montecarlo"]
"#;

pub fn preset(name: &str) -> anyhow::Result<SweepSpec> {
    let raw = match name {
        "fig2" => FIG2,
        "fig3" => FIG3,
        other => bail!("unknown preset {other:?}; expected fig2 or fig3"),
    };
    Ok(validate_config(raw).expect("built-in presets are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        assert_eq!(preset("fig2").unwrap().grid.len(), 17);
        assert_eq!(preset("fig3").unwrap().curves.len(), 3);
        assert!(preset("fig9").is_err());
    }
}
