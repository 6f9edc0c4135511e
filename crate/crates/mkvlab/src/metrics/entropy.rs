//! Total variation and relative entropy on shared grids.
//!
//! TV is the L1 distance of the densities, ||mu - nu||_var = integral of
//! |ell_mu - ell_nu|. Relative entropy Ent(mu|nu) = integral of
//! ell_mu log(ell_mu / ell_nu) where mu has mass, declared infinite when mu
//! places non-negligible mass where nu vanishes at grid resolution.

use serde::{Deserialize, Serialize};

use crate::measure::Density;
use crate::Result;

/// Reference density below this is treated as zero for absolute continuity.
const ABS_CONTINUITY_FLOOR: f64 = 1e-12;
/// Mass of mu allowed on the vanishing set before declaring Ent = infinity.
const ABS_CONTINUITY_MASS: f64 = 1e-4;
/// Clip for the log argument only, so underflow does not poison finite cases.
const LOG_FLOOR: f64 = 1e-300;

/// Relative entropy outcome: finite value or an absolute-continuity failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RelativeEntropy {
    Finite(f64),
    Infinite,
}

impl RelativeEntropy {
    pub fn is_finite(&self) -> bool {
        matches!(self, RelativeEntropy::Finite(_))
    }

    /// Finite value, if any.
    pub fn value(&self) -> Option<f64> {
        match self {
            RelativeEntropy::Finite(v) => Some(*v),
            RelativeEntropy::Infinite => None,
        }
    }

    /// Collapses to f64, mapping the failure flag to +infinity.
    pub fn as_f64(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

/// Total variation distance, integral of |ell_mu - ell_nu|; lies in [0, 2].
pub fn tv_distance(mu: &Density, nu: &Density) -> Result<f64> {
    mu.require_same_grid(nu)?;
    let vol = mu.grid().cell_volume();
    let sum: f64 = mu
        .values()
        .iter()
        .zip(nu.values())
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(sum * vol)
}

/// Relative entropy Ent(mu|nu) by grid quadrature.
pub fn relative_entropy(mu: &Density, nu: &Density) -> Result<RelativeEntropy> {
    mu.require_same_grid(nu)?;
    let vol = mu.grid().cell_volume();
    let mut escaped_mass = 0.0;
    let mut sum = 0.0;
    for (&m, &r) in mu.values().iter().zip(nu.values()) {
        if m <= 0.0 {
            continue;
        }
        if r < ABS_CONTINUITY_FLOOR {
            escaped_mass += m * vol;
        }
        sum += m * (m / r.max(LOG_FLOOR)).ln();
    }
    if escaped_mass > ABS_CONTINUITY_MASS {
        return Ok(RelativeEntropy::Infinite);
    }
    // Gibbs: the true value is nonnegative, so tiny negative quadrature
    // residue is rounding
    Ok(RelativeEntropy::Finite((sum * vol).max(0.0)))
}
