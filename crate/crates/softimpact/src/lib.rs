//! Std companion to `softimpact-core`: configuration, CSV formats and the
//! noise-fit cache, parallel ensembles and bifurcation scans, Welch spectra,
//! gnuplot sidecars and the `softimpact` command line.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod io;
pub mod plot;
pub mod scan;
pub mod spectrum;

pub use config::RunConfig;
pub use softimpact_core as core;
