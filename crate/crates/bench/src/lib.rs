//! Benchmark harness for the dynamic k-d tree and its baselines.

pub mod cli;
pub mod commands;
pub mod harness;
