//! Core algorithms for procedurally generated time-series exams.
//!
//! Everything here is pure and `no_std` (with `alloc`): series synthesis,
//! question templates and their instantiation, exam assembly and grading,
//! and two-parameter logistic IRT fitting with iterative refinement. File
//! formats, rendering, the model harness and the CLI live in the `tsexam`
//! crate.

#![no_std]

extern crate alloc;

pub mod rng;
pub mod special;
pub mod stats;
pub mod synth;
pub mod template;
pub mod exam;
pub mod irt;
