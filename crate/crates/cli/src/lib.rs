//! Configuration, sweeps and CSV output for the `crsn` command.

pub mod config;
pub mod csv;
pub mod presets;
pub mod selftest;
pub mod sweep;

pub use config::{emit_config, validate_config};
pub use sweep::{run_sweep, Axis, Curve, Engines, SweepRow, SweepSpec, SweepSummary};
