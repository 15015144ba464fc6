//! Repeated-interaction (collision model) dynamics and thermodynamics
//! for open quantum systems.
//!
//! A system exchanges energy and information with a stream of
//! identically prepared units, optionally while coupled to a thermal
//! reservoir. This crate provides:
//!
//! - dense operator algebra on labeled composite Hilbert spaces
//!   ([`operators`]),
//! - Liouvillian superoperators, thermal weak-coupling generators, and
//!   propagation/steady-state tools ([`generators`]),
//! - the exact per-interval thermodynamic bookkeeping of the
//!   repeated-interaction setup ([`repeated_interaction`]),
//! - effective master equations in the fast-collision limits and their
//!   consistent rate-level thermodynamics ([`effective_me`]),
//! - ready-made physical models: a Maxwell-demon-style engine, a
//!   micromaser, lasing without inversion, and an autonomous electronic
//!   demon ([`models`]),
//! - a JSON scenario schema used by the command-line runner
//!   ([`scenario`]).

pub mod effective_me;
pub mod error;
pub mod generators;
pub mod models;
pub mod operators;
pub mod repeated_interaction;
pub mod scenario;

pub use error::{Error, Result};
pub use operators::{CMatrix, DensityMatrix, HilbertSpace, Operator};
