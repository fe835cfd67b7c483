//! Standard-library companion of `ravden-core`: image, raw, flow and
//! sidecar file formats, run configuration, and the `ravden` command line.

pub mod cli;
pub mod config;
pub mod io;

pub use ravden_core as core;
