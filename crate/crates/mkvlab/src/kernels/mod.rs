//! Singular interaction kernels and drift assembly.
//!
//! The drift of the dynamics decomposes as
//!
//! ```text
//! b(t, x, mu) = b0(x, mu) + b1(t, x) + sum_i b_i(t, x)
//! ```
//!
//! where b0(x, mu) = integral of K(x, y) mu(dy) for a singular kernel K
//! (Coulomb, Biot-Savart, Riesz, and relatives), b1 is Lipschitz, and the
//! b_i are named singular-in-time-and-space forms with declared
//! integrability. Local singular mass is quantified by the closed-form
//! bound integral_{B(0,1)} (c/|y|^beta)^k dy, finite exactly when k < d/beta.

mod drift;
mod family;

pub use drift::{
    assemble_drift, pairwise_kernel_into, DriftMeasure, DriftSpec, LipschitzForm, MeanFieldTerm,
    SingularForm, SingularTerm,
};
pub use family::{
    eval_kernel, eval_kernel_into, kernel_bound_constant, mean_field_drift_density,
    mean_field_drift_particles, unit_ball_volume, unit_sphere_area, IntegrabilityCheck,
    KernelFamily, KernelSpec,
};
