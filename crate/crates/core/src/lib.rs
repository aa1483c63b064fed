//! Core library for presence-condition extraction and configuration generation.
//!
//! The pipeline has three stages:
//!
//! 1. [`extract`] scans preprocessor-conditional sources, attributes every
//!    governed line to its full presence condition, and merges semantically
//!    equal conditions into a [`extract::PcMap`].
//! 2. [`metrics`] turns a cost function (logical code units, absolute lines,
//!    or per-line costs such as reachable deallocation calls) into per-entry
//!    weights and coverage ratios.
//! 3. [`generate`], [`fuzz`], and [`cit`] produce configurations from the
//!    weighted map: exact weighted MaxSAT for a single maximal configuration,
//!    a greedy cover loop for full coverage, one-swap variants, score-guided
//!    bit-string fuzzing, and covering arrays.
//!
//! [`solver`] is a self-contained CDCL SAT core with an exact MaxSAT layer on
//! top; [`oracle`] holds brute-force reference implementations used by tests
//! and by the `verify` subcommand.

pub mod cit;
pub mod cnf;
pub mod config;
pub mod extract;
pub mod formula;
pub mod fuzz;
pub mod generate;
pub mod manifest;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod solver;
#[doc(hidden)]
pub mod testgen;
