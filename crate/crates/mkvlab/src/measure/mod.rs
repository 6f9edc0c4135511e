//! Measure representations shared by every other module.
//!
//! A probability law is carried in one of two forms: a [`Density`] (values of
//! the Lebesgue density on a regular node-centered grid, unit mass under the
//! midpoint rule) or an [`EmpiricalMeasure`] (N equally weighted points).
//! A [`MeasureFlow`] is a time-indexed family of densities on a mesh of
//! [0,T], the discrete stand-in for a path-space element t -> mu_t; its t=0
//! node may carry an exact sampler instead of a density (a Dirac initial law
//! has no density, and its dual norms are infinite for k > 1).

mod density;
mod empirical;
mod flow;
mod grid;
mod initial;
mod kde;

pub use density::Density;
pub use empirical::EmpiricalMeasure;
pub use flow::{FlowInitial, MeasureFlow};
pub use grid::Grid;
pub use initial::InitialLaw;
pub use kde::{auto_grid, kde_estimate, silverman_bandwidth};

/// Maximum relative deviation from unit mass tolerated by [`Density`].
pub const MASS_TOLERANCE: f64 = 1e-6;
