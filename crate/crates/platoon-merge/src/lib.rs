//! Cooperative merging of vehicle platoons at a highway on-ramp.
//!
//! The merging zone is treated as a single machine and platoons as jobs:
//! each platoon gets a merge slot from a weighted-completion-time
//! schedule, then drives a closed-form trajectory that hits its slot. A
//! discrete-time microsimulator runs that pipeline against a stop-and-
//! yield baseline and reports delay, stops, travel time, and a
//! control-effort fuel proxy.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --example schedule_platoons
//! cargo run --example time_optimal_trajectory
//! cargo run --example energy_optimal_trajectory
//! cargo run --example brute_force_oracle
//! cargo run --example run_proposed
//! cargo run --example run_baseline
//! cargo run --example compare_policies
//! cargo run --example validate_scenario
//! ```
//!
//! The `platoon-merge` binary wraps the same library behind `run`,
//! `schedule`, `oracle`, and `validate` subcommands for batch work.

pub mod cli;
pub mod error;
pub mod metrics;
pub mod scenario;
pub mod scheduler;
pub mod simulator;
pub mod trajectory;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_scenario, Origin, Platoon, RoadGeometry, ScenarioConfig, SizeRange, ValidationReport,
    VehicleState,
};
