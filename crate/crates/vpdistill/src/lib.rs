//! File formats, teacher transports and the `vpd` command line on top of
//! `vpdistill-core`.

pub use vpdistill_core as core;

pub mod adapters;
pub mod cli;
pub mod config;
pub mod http;
pub mod io;
pub mod manifest;
pub mod replay;
pub mod throughput;
