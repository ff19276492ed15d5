//! Experiment harness for WTA spiking networks: configuration, training and
//! evaluation commands, metrics, checkpoints and gradient checks.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod gradcheck;
pub mod metrics;
