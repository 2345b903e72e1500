//! # jklab
//!
//! A laboratory for symmetric pure-jump Dirichlet forms on finite metric
//! measure spaces.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`scale`] | scale functions, composite φ, scaling indices, the Φ constructor, crossover radius |
//! | [`envelope`] | p^(j), p^(c), two-sided heat-kernel envelopes and regime labels |
//! | [`space`] | lattice tori, Sierpinski graphs, balls, volumes, VD/RVD fits |
//! | [`process`] | generators, exact and Monte-Carlo heat kernels, subordinators, exit times, capacities |
//! | [`verify`] | corridor fits and numerical condition checkers |
//!
//! ```
//! use jklab::scale::ScaleFunction;
//!
//! let phi_j = ScaleFunction::piecewise_power(vec![1.0], vec![1.0, 3.0]).unwrap();
//! assert_eq!(phi_j.eval(2.0), 8.0);
//! assert!((phi_j.invert(8.0) - 2.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
mod error;
pub mod linalg;
pub mod process;
pub mod quad;
pub mod rng;
pub mod scale;
pub mod space;
pub mod verify;

pub use error::{Error, Result};
