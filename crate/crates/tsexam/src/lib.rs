//! File formats, template loading, the model evaluation harness and the
//! command-line driver for procedurally generated time-series exams.
//!
//! The algorithms live in [`tsexam_core`]; this crate adds everything
//! that touches the file system, the network or the terminal.

pub mod cli;
pub mod config;
pub mod files;
pub mod harness;
pub mod pack;
pub mod report;

pub use tsexam_core as core;
