//! Regularized Grad-type moment systems for the Wigner equation.
//!
//! The crate assembles the quasi-linear moment system
//! `∂w/∂t + Σ_j M̂_j(w) ∂w/∂x_j = G w` obtained by expanding the Wigner
//! function in scaled Hermite functions about the local Maxwellian, closes it
//! with the globally hyperbolic regularization, certifies the resulting
//! spectrum against the Hermite-root characteristic speeds, and integrates the
//! one-dimensional system in time.
//!
//! Module map:
//! - [`hermite`]: probabilists' Hermite polynomials, roots, quadrature and basis functions
//! - [`index`]: multi-indices, graded ordinal numbering and index sets
//! - [`state`]: moment unknowns, admissibility and distribution reconstruction
//! - [`potential`]: external potentials with exact spatial derivatives
//! - [`assembly`]: convection matrices, closure, regularization and source matrix
//! - [`spectral`]: eigenstructure and hyperbolicity certification
//! - [`solver`]: 1D characteristic-upwind / Strang-split time integration
//! - [`asymptotics`]: short-time quantum corrections of the `M = 3` system
//! - [`sampling`]: seeded random admissible states and directions
//! - [`cli`]: configuration, scenarios and output writers behind the binary

pub mod assembly;
pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod hermite;
pub mod index;
pub mod potential;
pub mod sampling;
pub mod solver;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use index::MultiIndex;
pub use state::{MomentState1D, MomentState3D};
