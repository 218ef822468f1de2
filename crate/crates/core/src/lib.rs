//! Simulated drone catching: projectile physics, noisy perception, object
//! forecasting, sampling-based MPC with learned or uniform action samplers,
//! and a seeded benchmark harness.

pub mod agents;
pub mod bench;
pub mod catalog;
pub mod environment;
pub mod error;
pub mod forecaster;
pub mod neural;
pub mod perception;
pub mod physics;
pub mod planner;
pub mod policy;
pub mod training;

pub use error::{Error, Result};
pub use physics::Vec3;
