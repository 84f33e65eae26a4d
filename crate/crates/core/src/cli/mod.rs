//! Command-line driver: configuration, sweep execution and result emission.

pub mod config;
pub mod emit;
pub mod runner;
