//! Numerical integration: adaptive Gauss-Kronrod on intervals, tensor
//! Gauss-Legendre rules on hyperspherical and product domains, and the
//! variance / weighted Dirichlet functionals built on them.

pub mod functionals;
pub mod hyperspherical;
pub mod kronrod;
pub mod legendre;
pub mod product;
pub mod test_function;

pub use functionals::{split_dirichlet_radial_angular, surface_dirichlet, variance, weighted_dirichlet, Moments};
pub use hyperspherical::{AngularRule, HypersphericalGrid};
pub use kronrod::{integrate_interval, EndpointPolicy, Estimate, Integrator, VecEstimate};
pub use legendre::{gauss_legendre, gauss_legendre_on};
pub use product::{ProductRule, Rule1d};
pub use test_function::{Support, TestFunction};
