//! Files, plots, worker pools, the experiment harness and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod pool;
pub mod svg;

pub use locstat_core as core;
