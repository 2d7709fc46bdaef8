use std::fmt::Write as _;
use std::path::Path;

use anyhow::{ensure, Context};
use crsn_core::Destination;

use crate::sweep::{Axis, SweepRow};

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.8e}"),
        None => "NA".into(),
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn header(axis: Axis) -> String {
    let mut cols = vec!["curve".to_string(), axis.column().to_string()];
    for d in Destination::BOTH {
        let l = d.label();
        for c in ["analytic", "direct", "mc", "mc_stderr", "oracle"] {
            cols.push(format!("op_{l}_{c}"));
        }
    }
    cols.extend(["throughput_bps_hz", "throughput_mc_bps_hz", "flags"].map(String::from));
    cols.join(",")
}

/// One header line plus one line per row. Numbers carry 9 significant
/// digits; missing engines print `NA`; an empty flag set prints `-`.
pub fn emit_csv(axis: Axis, rows: &[SweepRow]) -> anyhow::Result<String> {
    ensure!(!rows.is_empty(), "no rows to write");
    let mut out = header(axis);
    out.push('\n');
    for r in rows {
        let mut cells = vec![field(&r.curve), num(Some(r.axis_value))];
        for d in Destination::BOTH {
            let dr = r.direction(d);
            cells.push(num(dr.analytic.map(|a| a.op)));
            cells.push(num(dr.analytic.map(|a| a.f_direct)));
            cells.push(num(dr.mc.map(|m| m.op_hat)));
            cells.push(num(dr.mc.map(|m| m.stderr)));
            cells.push(num(dr.oracle.map(|o| o.op)));
        }
        cells.push(num(r.throughput));
        cells.push(num(r.throughput_mc));
        let mut flags: Vec<String> = r.flags.clone();
        flags.extend(r.errors.iter().map(|e| format!("error({})", e.split(':').next().unwrap_or("engine"))));
        cells.push(if flags.is_empty() { "-".into() } else { field(&flags.join(";")) });
        writeln!(out, "{}", cells.join(",")).expect("writing to a String");
    }
    Ok(out)
}

pub fn write_csv(path: &Path, axis: Axis, rows: &[SweepRow]) -> anyhow::Result<()> {
    let text = emit_csv(axis, rows)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;
    use crate::sweep::run_sweep;

    #[test]
    fn header_names_every_column() {
        let h = header(Axis::SnrDb);
        assert!(h.starts_with("curve,snr_db,op_a_analytic,op_a_direct,op_a_mc,op_a_mc_stderr,op_a_oracle,op_b_analytic"));
        assert!(h.ends_with("throughput_bps_hz,throughput_mc_bps_hz,flags"));
    }

    #[test]
    fn analytic_only_row() {
        let spec = validate_config("[system]\nsnr_db = 40\n[links]\nm_a = 3\n").unwrap();
        let (rows, _) = run_sweep(&spec).unwrap();
        let text = emit_csv(spec.axis, &rows).unwrap();
        let line = text.lines().nth(1).unwrap();
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), header(spec.axis).split(',').count());
        assert_eq!(cells[0], "base");
        assert_eq!(cells[1], "4.00000000e1");
        assert_eq!(cells[4], "NA");
        assert_eq!(*cells.last().unwrap(), "-");
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(emit_csv(Axis::Mu, &[]).is_err());
    }

    #[test]
    fn quoting() {
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("plain"), "plain");
    }
}
