//! Outage and throughput analysis of a three-phase two-way relay network in
//! which the relay harvests energy from the primary users' signals.
//!
//! The same joint probabilities are computed three ways: closed-form series
//! ([`closed_form`]), simulation ([`monte_carlo`]) and adaptive quadrature
//! ([`oracle`]).

pub mod closed_form;
pub mod error;
pub mod monte_carlo;
pub mod oracle;
pub mod special_math;
pub mod system_model;

pub use closed_form::{analyze, outage_probability, throughput, AnalyticReport, BranchFlags, CdfBreakdown, LemmaValue};
pub use error::{Error, Result, Violation};
pub use monte_carlo::{estimate_outage, McEstimate, McMode};
pub use oracle::{quad_outage_probability, OracleBreakdown, QuadResult, QuadSpec};
pub use special_math::SeriesControl;
pub use system_model::{
    derive_coeffs, DerivedCoeffs, Destination, LinkSet, LinkStats, RelayPair, Scenario, Shapes, SystemParams, Topology,
};
