//! Command-line front end of the `epnozzle` solver: configuration parsing,
//! run orchestration and plot-ready export.

pub mod commands;
pub mod config;
