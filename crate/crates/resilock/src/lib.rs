//! Analysis and synthesis toolkit for overactuated linear systems that lose
//! control authority over part of their actuators: loss-tolerance decision
//! procedures, reachability certificates, resilient layout generators, a
//! disturbance-cancelling control law, a deterministic simulation harness and
//! an ellipsoidal robust-control baseline for comparison.

pub mod admire;
pub mod error;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod reachability;
pub mod resilience;
pub mod robust;
pub mod simulator;
pub mod synthesis;

pub use error::{Error, Result};
