//! Trace-driven simulator for DRAM with segmented bitlines.
//!
//! A bitline split by an isolation transistor gives each subarray a small,
//! fast near segment and a large far segment. The crate models the latency,
//! energy and area of such devices, a cycle-level command engine that enforces
//! their timing, a memory controller that caches far rows in the near
//! segment, and the harness used to run experiments.

pub mod config;
pub mod controller;
pub mod energy;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod policy;
pub mod report;
pub mod sim;
pub mod workload;

pub use config::RunConfig;
pub use error::{Result, SimError};
pub use geometry::DeviceGeometry;
pub use harness::{compare, profile, run, sweep_near_size};
pub use report::StatsReport;
