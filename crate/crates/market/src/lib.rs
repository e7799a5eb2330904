//! Two-layer contract market simulator.
//!
//! A virtual service provider buys semantic sensing data upstream and sells
//! digital twin access downstream. On each layer it posts a menu with one
//! (quality, price) bundle per participant type and must respect participation
//! and self-selection constraints it cannot observe directly. The crate
//! provides the market economics, a multi-agent adjustment environment,
//! double Q-learning agents with prioritized replay, a training orchestrator,
//! and a brute-force oracle for small instances.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod layer;
pub mod market;
pub mod metrics;
pub mod oracle;
pub mod orchestrator;
pub mod parallel;
pub mod rng;

pub use error::{Error, Result};
