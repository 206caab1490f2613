//! Placement of UAV relays in an integrated access and backhaul network,
//! learned by independent per-UAV Q-learners.

pub mod agent;
pub mod channel;
pub mod cli;
pub mod environment;
pub mod error;
pub mod scenarios;
pub mod selftest;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
