//! Mean-field-game equilibrium solver on a truncated state grid.
//!
//! The pipeline: coefficient fields are discretized into Markov generators,
//! the controlled Fokker-Planck-Kolmogorov equation is stepped forward on the
//! grid, best responses are computed as linear programs over occupation
//! measures and projected to feedback controls by conditional means, and the
//! best-response map is iterated to a fixed point whose exploitability is then
//! certified against challenger controls.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod best_response;
pub mod coefficients;
pub mod equilibrium;
pub mod error;
pub mod fpk;
pub mod lp;
pub mod measures;
pub mod particles;
pub mod tol;

pub use error::{Error, Result};

/// Points of the state and control spaces. One-dimensional problems use the
/// first coordinate and keep the second at zero.
pub type Point = nalgebra::Vector2<f64>;

/// Matrices acting on [`Point`]s, zero-padded in one dimension.
pub type Mat = nalgebra::Matrix2<f64>;
