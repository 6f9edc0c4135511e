//! Numerical laboratory for McKean-Vlasov stochastic differential equations
//! with singular interaction kernels.
//!
//! The library simulates the interacting N-particle system and the decoupled
//! (frozen-flow) dynamics
//!
//! ```text
//! dX_t = b_t(X_t, L_{X_t}) dt + sigma_t(X_t) dW_t
//! ```
//!
//! for drifts built from Coulomb, Biot-Savart, and Riesz kernels, measures
//! distances between laws with the localized dual norm ("k*-norm") and its
//! companions (total variation, Wasserstein, relative entropy), runs the
//! Picard fixed-point construction on measure flows, and packages scripted
//! experiments that probe decay rates, conservation laws, entropy-cost
//! inequalities, and contraction behavior at desk scale.
//!
//! Module map:
//! - [`measure`]: grids, densities, empirical measures, KDE, measure flows.
//! - [`metrics`]: k*-norm surrogate and dual oracle, TV, W_q, entropy.
//! - [`kernels`]: singular kernels, blob regularization, drift assembly.
//! - [`sde`]: Euler-Maruyama engines with counter-based noise streams.
//! - [`picard`]: exponent classes, weighted flow distance, fixed-point solver.
//! - [`experiments`]: scripted scenarios with config-driven thresholds.
//! - [`io`]: config parsing, serialization, manifests, CLI dispatch.

pub mod error;
pub mod experiments;
pub mod io;
pub mod kernels;
pub mod measure;
pub mod metrics;
pub mod picard;
pub(crate) mod rng;
pub mod sde;

pub use error::{Error, Result};
