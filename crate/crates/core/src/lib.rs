//! Diffusion weights, weighted Poincare inequalities and Fokker-Planck
//! relaxation for isotropic probability densities.
//!
//! The crate is organized bottom-up:
//!
//! * [`quadrature`]: adaptive Gauss-Kronrod, hyperspherical product rules,
//!   test functions and the variance / weighted Dirichlet functionals.
//! * [`densities`]: the catalog of isotropic densities and 1-D laws.
//! * [`weights`]: diffusion weights, the `w = P/Q'` family and its
//!   optimization, angular and composite weights.
//! * [`inequality`]: checkers that compare variance against weighted
//!   Dirichlet forms over corpora of test functions.
//! * [`fpsolver`]: a radial finite-volume Fokker-Planck solver with decay
//!   diagnostics.
//! * [`experiment`]: configuration-driven runs that persist CSV/JSON reports.

// `!(x > 0.0)` is used on purpose so NaN lands on the error path
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densities;
pub mod error;
pub mod experiment;
pub mod fpsolver;
pub mod inequality;
pub mod quadrature;
pub mod weights;

pub use densities::{Density1d, DensityKind, IsotropicDensity, RadialMarginal};
pub use error::{Error, Result};
pub use quadrature::{Integrator, TestFunction};
pub use weights::{Provenance, WeightFunction};
