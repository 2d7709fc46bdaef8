use std::process::{Command, Output};

fn crsn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crsn")).args(args).output().expect("running crsn")
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn invalid_config_lists_every_violation_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "bad.toml", "[system]\nalpha = 0.5\nmu = 0\nwat = 1\n");
    let out = crsn(&["validate", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "invalid_config");
    let fields: Vec<&str> = err["error"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["field"].as_str().unwrap())
        .collect();
    for want in ["system.alpha", "system.mu", "system.wat"] {
        assert!(fields.contains(&want), "{fields:?}");
    }
}

#[test]
fn defaulted_config_echoes_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "empty.toml", "");
    let out = crsn(&["validate", "--config", &path]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["system"]["eta"], 0.7);
    assert!((v["system"]["p_th_dbm"].as_f64().unwrap()).abs() < 1e-9);
    assert!((v["system"]["sigma2_1_dbm"].as_f64().unwrap() + 40.0).abs() < 1e-9);
}

#[test]
fn missing_source_is_a_runtime_error() {
    let out = crsn(&["sweep"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "runtime");
}

#[test]
fn point_reports_all_engines() {
    let out = crsn(&["point", "--preset", "fig2", "--engines", "analytic,montecarlo,oracle", "--trials", "20000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for d in ["a", "b"] {
        assert!(v[d]["analytic"]["op"].is_number());
        assert!(v[d]["mc"]["op_hat"].is_number());
        assert!(v[d]["oracle"]["op"].is_number());
    }
}

#[test]
fn sweep_to_stdout() {
    let out = crsn(&["sweep", "--preset", "fig3", "--engines", "analytic"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("curve,snr_db,"));
    assert_eq!(lines.len(), 1 + 3 * 21);
}

#[test]
fn unknown_preset_fails() {
    let out = crsn(&["sweep", "--preset", "fig7"]);
    assert!(!out.status.success());
}
