//! Total-order HTN planning and plan repair.
//!
//! Three repair strategies are provided: rewrite compilation (`rw`),
//! causal-link backjumping (`sf`) and simulation with chronological
//! backtracking (`ip`). The [`oracle`] module enumerates the solution sets
//! each strategy is meant to produce and checks how they relate.

pub mod bench;
pub mod disturbance;
pub mod fixtures;
pub mod hddl;
pub mod model;
pub mod oracle;
pub mod planner;
pub mod repair;
