//! Experiment runner and acceptance gate for the mpmfg toolkit.

pub mod acceptance;
pub mod config;
pub mod runner;
