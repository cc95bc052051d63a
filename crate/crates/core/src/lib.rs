//! Cost-minimizing power allocation for an EV charging station.
//!
//! A day at the station is a [`Scenario`](model::Scenario): which vehicles
//! are parked at which step, how much energy each one needs, and the price,
//! capacity and socket limits per step. The crate computes
//!
//! * the minimum-cost schedule as a linear program ([`nominal`]),
//! * robust counterparts under price-ball and load-interval uncertainty
//!   ([`robust`]),
//! * the first-come-first-served reference schedule ([`baseline`]),
//!
//! and compares them across many days ([`sim`]). Raw session and price files
//! are turned into scenarios by [`ingest`].

pub mod baseline;
pub mod ingest;
pub mod model;
pub mod nominal;
pub mod robust;
pub mod sim;
pub mod solver;
pub mod synth;

pub use model::{
    evaluate_cost, validate_schedule, CostBreakdown, Method, ModelError, Scenario, ScenarioBuilder,
    Schedule, ValidationReport, Violation, ViolationKind, Window,
};
