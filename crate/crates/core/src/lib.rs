//! Rough-path calculus and mild solutions of semilinear rough PDEs
//!
//! `dY = (A Y + f0(t, Y)) dt + f(t, Y) d𝐗`
//!
//! on finite-dimensional truncations: the driver lives in `R^d` (a finite
//! number of noise modes) and the state in `R^m` (a spatial discretization),
//! with the generator `A` an `m x m` matrix whose exponentials play the role
//! of the semigroup.
//!
//! Module map:
//! - [`rough`]: grids, paths, Hölder norms, rough paths and Chen's relation.
//! - [`controlled`]: controlled rough paths, their norms and compositions.
//! - [`gubinelli`]: the rough integral as a compensated Riemann sum.
//! - [`semigroup`]: cached matrix exponentials, graph norms and estimates.
//! - [`convolution`]: regular and rough convolutions against the semigroup.
//! - [`solver`]: the mild-solution fixed-point map and Picard solver.
//! - [`drivers`]: Q-Wiener and Q-fractional Brownian rough path drivers.
//! - [`harness`]: config parsing, presets and the experiment runners.

pub mod controlled;
pub mod convolution;
pub mod drivers;
pub mod error;
pub mod gubinelli;
pub mod harness;
pub mod linalg;
pub mod rough;
pub mod semigroup;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
