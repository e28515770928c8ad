//! Detection of unit type errors (wrong unit within a dimension, wrong frame
//! of reference) in programs written in a small C-like language.
//!
//! The pipeline has three stages: [`interp`] runs a program against a scripted
//! scenario and records a trace, [`deduction`] mines likely unit types from
//! that trace, and [`inference`] combines mined types with protocol
//! declarations ([`protocol`]) to type-check the source.

// Unit errors carry both offending types by value; they are rare and cold.
#![allow(clippy::result_large_err, clippy::large_enum_variant)]

pub mod deduction;
pub mod frontend;
pub mod inference;
pub mod interp;
pub mod protocol;
pub mod units;

pub use units::{FrameSpec, Scalar, UnitError, UnitType};
