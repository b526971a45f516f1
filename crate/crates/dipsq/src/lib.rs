//! Scenario files, snapshot images and the simulation harness built on
//! `dipsq-core`.

pub mod config;
pub mod harness;
pub mod snapshot;
