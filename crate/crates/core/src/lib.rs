//! Latency of shared situation awareness (SSA) among connected vehicles.
//!
//! Vehicles are a homogeneous Poisson point process in a bounded square
//! world. A hazard report spreads from the first vehicle to see it, hop by
//! hop to each holder's nearest uninformed neighbor. When every hop time
//! is an independent `Gamma(k, rate)`, an `N`-hop path takes
//! `Gamma(N k, rate)`; this crate computes that law in closed form
//! ([`latency`]), simulates the process ([`propagation`]) and checks the
//! two against each other ([`stats`]).
//!
//! Modules:
//! - [`geometry`]: PPP fields, grid-indexed neighbor queries, disk counts.
//! - [`latency`]: Gamma hop and path laws, MGFs.
//! - [`propagation`]: trial engine, mobility, batches.
//! - [`coverage`]: vision-sector coverage of a target disk, minimum covers.
//! - [`stats`]: empirical distributions, KS and chi-square tests, fitting.
//! - [`harness`]: experiment commands used by the `ssa` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod latency;
pub mod propagation;
pub mod seed;
pub mod stats;
mod svg;

pub use config::WorldConfig;
pub use coverage::{CoverageEstimate, CoveragePoints, SightArc, TargetDisk};
pub use error::{Error, Result};
pub use geometry::{AreaIntensity, Position, Vehicle, VehicleField, VehicleId, WorldArea};
pub use latency::{GammaParams, HopTime, SsaLatencyLaw};
pub use propagation::{
    BatchOutcome, Hazard, HopRecord, PropagationTrace, Simulator, SsaCompletionRule, TimingMode,
    TimingModel,
};
pub use stats::{EmpiricalDist, GofReport, TimeUnit};
