//! Iterative Hessian Sketch (IHS) for convex constrained least squares.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: sparse/dense storage, svmlight and CSV ingestion, synthetic
//!   Gaussian-design instances.
//! - [`sketch`]: Gaussian, SRHT, CountSketch and SJLT random projections with
//!   embedding-quality diagnostics.
//! - [`solver`]: the exact reference solver and the per-iteration quadratic
//!   subproblem solver.
//! - [`ihs`]: the sketched Newton-type iteration itself.
//! - [`bench`]: sketch-quality baselines, convergence experiments and the
//!   versioned report format.
//! - [`cli`]: the `hsketch` command line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod data;
mod error;
pub mod ihs;
pub mod linalg;
pub mod rng;
pub mod sketch;
pub mod solver;

pub use error::{Error, ErrorClass, Result};
