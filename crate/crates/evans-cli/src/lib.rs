//! Experiment driver and configuration layer for the Evans function toolkit.
//!
//! The library half of the command-line front end: run configuration,
//! problem/contour/method parsers, the named experiments, and the CSV/JSON
//! writers. The `evans` binary is a thin dispatcher over these.

pub mod config;
pub mod experiments;
pub mod output;
pub mod parse;
