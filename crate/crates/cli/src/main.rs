use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use crsn_cli::config::{validate_config, DEFAULT_SEED};
use crsn_cli::presets::preset;
use crsn_cli::selftest::run_selftest;
use crsn_cli::sweep::{run_sweep, Engines, SweepSpec};
use crsn_core::system_model::watts_to_dbm;
use crsn_core::Violation;
use serde_json::json;

#[derive(Parser)]
#[command(name = "crsn", version, about = "Outage and throughput of an energy-harvesting relay network")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a sweep and write CSV
    Sweep(RunArgs),
    /// Evaluate the first grid point of the first curve and print JSON
    Point(RunArgs),
    /// Check a configuration and echo the parsed parameters
    Validate(Source),
    /// Cross-check the three engines on a few reference cases
    Selftest {
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// fig2 or fig3
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated subset of analytic,montecarlo,oracle
    #[arg(long)]
    engines: Option<Engines>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Thread count; defaults to all cores
    #[arg(long)]
    workers: Option<usize>,
}

/// A failure that should be reported as a violation list.
#[derive(Debug)]
struct Invalid(Vec<Violation>);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration ({} problems)", self.0.len())
    }
}

impl std::error::Error for Invalid {}

fn load(src: &Source) -> anyhow::Result<SweepSpec> {
    match (&src.config, &src.preset) {
        (Some(path), None) => {
            let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            validate_config(&raw).map_err(|v| Invalid(v).into())
        }
        (None, Some(name)) => preset(name),
        (None, None) => bail!("one of --config or --preset is required"),
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    }
}

fn load_run(a: &RunArgs) -> anyhow::Result<SweepSpec> {
    let mut spec = load(&a.source)?;
    if let Some(e) = a.engines {
        spec.engines = e;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    Ok(b.build().context("building thread pool")?.install(f))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Cmd::Sweep(a) => {
            let spec = load_run(&a)?;
            let (rows, summary) = in_pool(a.workers, || run_sweep(&spec))?.map_err(Invalid)?;
            let text = crsn_cli::csv::emit_csv(spec.axis, &rows)?;
            match &a.out {
                Some(path) => {
                    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
                    out(&format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
                }
                None => {
                    out(&text)?;
                    eprintln!("{}", serde_json::to_string(&summary)?);
                }
            }
            Ok(summary.failed_rows == 0)
        }
        Cmd::Point(a) => {
            let mut spec = load_run(&a)?;
            spec.grid.truncate(1);
            spec.curves.truncate(1);
            let (rows, _) = in_pool(a.workers, || run_sweep(&spec))?.map_err(Invalid)?;
            out(&format!("{}\n", serde_json::to_string_pretty(&rows[0])?))?;
            Ok(rows[0].errors.is_empty())
        }
        Cmd::Validate(src) => {
            let spec = load(&src)?;
            let p = spec.base.params;
            let echo = json!({
                "valid": true,
                "system": {
                    "p_a_dbm": watts_to_dbm(p.p_a),
                    "p_b_dbm": watts_to_dbm(p.p_b),
                    "sigma2_1_dbm": watts_to_dbm(p.sigma2_1),
                    "sigma2_a_dbm": watts_to_dbm(p.sigma2_a),
                    "sigma2_b_dbm": watts_to_dbm(p.sigma2_b),
                    "sigma2_cr_dbm": watts_to_dbm(p.sigma2_cr),
                    "p_th_dbm": watts_to_dbm(p.p_th),
                    "alpha": p.alpha,
                    "beta": p.beta,
                    "eta": p.eta,
                    "mu": p.mu,
                    "r_a": p.r_a,
                    "r_b": p.r_b,
                },
                "topology": spec.base.topology,
                "links": spec.base.shapes,
                "sweep": {
                    "axis": spec.axis.name(),
                    "points": spec.grid.len(),
                    "curves": spec.curves().iter().map(|c| c.label.clone()).collect::<Vec<_>>(),
                    "engines": spec.engines.names(),
                },
            });
            out(&format!("{}\n", serde_json::to_string_pretty(&echo)?))?;
            Ok(true)
        }
        Cmd::Selftest { trials, seed, workers } => {
            let report = in_pool(workers, || run_selftest(trials, seed))??;
            out(&format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            Ok(report.passed())
        }
    }
}

/// Writes to stdout; a closed pipe downstream is not an error.
fn out(text: &str) -> anyhow::Result<()> {
    let mut lock = std::io::stdout().lock();
    match lock.write_all(text.as_bytes()).and_then(|_| lock.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let body = match e.downcast_ref::<Invalid>() {
                Some(Invalid(v)) => json!({"error": {"kind": "invalid_config", "violations": v}}),
                None => json!({"error": {"kind": "runtime", "message": format!("{e:#}")}}),
            };
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
